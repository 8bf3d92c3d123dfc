#pragma once

#include <stdexcept>
#include <string>

namespace ssl_lab {

enum class ErrorKind {
  Parse,
  DuplicateId,
  UnknownLabel,
  EmptyCorpus,
  EmptyAfterNormalization,
  InvalidArgument,
  ShapeMismatch,
  TokenOutOfRange,
  NonNormalizedTarget,
  ZeroFeatureRow,
  ZeroClassCount,
  NonConvergence,
  MissingAugmentation,
  Http,
  Config,
  Io,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Parse: return "ParseError";
    case ErrorKind::DuplicateId: return "DuplicateId";
    case ErrorKind::UnknownLabel: return "UnknownLabel";
    case ErrorKind::EmptyCorpus: return "EmptyCorpus";
    case ErrorKind::EmptyAfterNormalization: return "EmptyAfterNormalization";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::TokenOutOfRange: return "TokenOutOfRange";
    case ErrorKind::NonNormalizedTarget: return "NonNormalizedTarget";
    case ErrorKind::ZeroFeatureRow: return "ZeroFeatureRow";
    case ErrorKind::ZeroClassCount: return "ZeroClassCount";
    case ErrorKind::NonConvergence: return "NonConvergence";
    case ErrorKind::MissingAugmentation: return "MissingAugmentation";
    case ErrorKind::Http: return "HttpError";
    case ErrorKind::Config: return "ConfigError";
    case ErrorKind::Io: return "IoError";
  }
  return "Error";
}

/// Every failure raised by the library carries a machine-checkable kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) throw Error(kind, message);
}

}  // namespace ssl_lab
