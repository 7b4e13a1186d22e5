#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hebbpca {

enum class ErrorCode {
  UncenteredData,
  DimensionMismatch,
  NotSymmetric,
  NonOrthonormalBasis,
  RankDeficient,
  NoConvergence,
  ZeroEigenvalue,
  DegenerateData,
  ZeroVector,
  Unreachable,
  UnknownNode,
  InvalidSpec,
  InvalidConfig,
  ParseError,
  IoError,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::UncenteredData: return "UncenteredData";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NotSymmetric: return "NotSymmetric";
    case ErrorCode::NonOrthonormalBasis: return "NonOrthonormalBasis";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::ZeroEigenvalue: return "ZeroEigenvalue";
    case ErrorCode::DegenerateData: return "DegenerateData";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::Unreachable: return "Unreachable";
    case ErrorCode::UnknownNode: return "UnknownNode";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers (and the CLI) can branch on the kind without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace hebbpca
