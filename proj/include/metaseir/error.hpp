#ifndef METASEIR_ERROR_HPP
#define METASEIR_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace metaseir {

enum class ErrorCode {
  ParseError,
  IoError,
  ConfigError,
  DuplicateRegion,
  NonpositivePopulation,
  InvalidHierarchy,
  UnknownRegion,
  NegativeVolume,
  NegativeCount,
  DateOutsideCoverage,
  InsufficientLookahead,
  NonpositivePrevalence,
  NonpositiveTestedFraction,
  NegativeSusceptible,
  InvalidParameter,
  NonConvergence,
  DegenerateDesign,
  Undefined,
  MismatchedData,
  MismatchedRegions,
  MismatchedDates,
  DegenerateRanks,
  InsufficientOverlap,
  MissingEstimates,
  TooManyDroppedReplicas,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::DuplicateRegion: return "DuplicateRegion";
    case ErrorCode::NonpositivePopulation: return "NonpositivePopulation";
    case ErrorCode::InvalidHierarchy: return "InvalidHierarchy";
    case ErrorCode::UnknownRegion: return "UnknownRegion";
    case ErrorCode::NegativeVolume: return "NegativeVolume";
    case ErrorCode::NegativeCount: return "NegativeCount";
    case ErrorCode::DateOutsideCoverage: return "DateOutsideCoverage";
    case ErrorCode::InsufficientLookahead: return "InsufficientLookahead";
    case ErrorCode::NonpositivePrevalence: return "NonpositivePrevalence";
    case ErrorCode::NonpositiveTestedFraction: return "NonpositiveTestedFraction";
    case ErrorCode::NegativeSusceptible: return "NegativeSusceptible";
    case ErrorCode::InvalidParameter: return "InvalidParameter";
    case ErrorCode::NonConvergence: return "NonConvergence";
    case ErrorCode::DegenerateDesign: return "DegenerateDesign";
    case ErrorCode::Undefined: return "Undefined";
    case ErrorCode::MismatchedData: return "MismatchedData";
    case ErrorCode::MismatchedRegions: return "MismatchedRegions";
    case ErrorCode::MismatchedDates: return "MismatchedDates";
    case ErrorCode::DegenerateRanks: return "DegenerateRanks";
    case ErrorCode::InsufficientOverlap: return "InsufficientOverlap";
    case ErrorCode::MissingEstimates: return "MissingEstimates";
    case ErrorCode::TooManyDroppedReplicas: return "TooManyDroppedReplicas";
  }
  return "Unknown";
}

/// Exception carrying a machine-readable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Collects non-fatal warnings emitted by loaders and estimators.
class Diagnostics {
 public:
  void warn(std::string message) { warnings_.push_back(std::move(message)); }

  const std::vector<std::string>& warnings() const noexcept { return warnings_; }

  void merge(const Diagnostics& other) {
    warnings_.insert(warnings_.end(), other.warnings_.begin(), other.warnings_.end());
  }

 private:
  std::vector<std::string> warnings_;
};

namespace detail {

inline void warn(Diagnostics* diag, std::string message) {
  if (diag != nullptr) {
    diag->warn(std::move(message));
  }
}

}  // namespace detail

}  // namespace metaseir

#endif  // METASEIR_ERROR_HPP
