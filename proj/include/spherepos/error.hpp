#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace spherepos {

enum class ErrorCode {
  RankDeficient,
  DegenerateQuadratic,
  CollinearSatellites,
  ZeroPolynomial,
  DegenerateFoci,
  InvalidSemiAxis,
  EmptyIntersection,
  InfeasibleGeometry,
  InvalidInput,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::DegenerateQuadratic: return "DegenerateQuadratic";
    case ErrorCode::CollinearSatellites: return "CollinearSatellites";
    case ErrorCode::ZeroPolynomial: return "ZeroPolynomial";
    case ErrorCode::DegenerateFoci: return "DegenerateFoci";
    case ErrorCode::InvalidSemiAxis: return "InvalidSemiAxis";
    case ErrorCode::EmptyIntersection: return "EmptyIntersection";
    case ErrorCode::InfeasibleGeometry: return "InfeasibleGeometry";
    case ErrorCode::InvalidInput: return "InvalidInput";
  }
  return "Unknown";
}

// Domain failure raised by the solvers. InvalidInput marks caller mistakes
// (bad arity, non-finite data); every other code is a geometric condition.
class SolverError : public std::runtime_error {
 public:
  SolverError(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace spherepos
