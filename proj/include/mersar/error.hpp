#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace mersar {

enum class ErrorKind {
  InvalidPmf,
  InvalidInterval,
  ZeroMassInterval,
  ThresholdOutOfRange,
  TooManyBits,
  BitsMismatch,
  OutOfRange,
  InvalidTree,
  CodeOutOfRange,
  NoSamples,
  UnsupportedKind,
  InvalidConfig,
  ParseError,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidPmf: return "InvalidPmf";
    case ErrorKind::InvalidInterval: return "InvalidInterval";
    case ErrorKind::ZeroMassInterval: return "ZeroMassInterval";
    case ErrorKind::ThresholdOutOfRange: return "ThresholdOutOfRange";
    case ErrorKind::TooManyBits: return "TooManyBits";
    case ErrorKind::BitsMismatch: return "BitsMismatch";
    case ErrorKind::OutOfRange: return "OutOfRange";
    case ErrorKind::InvalidTree: return "InvalidTree";
    case ErrorKind::CodeOutOfRange: return "CodeOutOfRange";
    case ErrorKind::NoSamples: return "NoSamples";
    case ErrorKind::UnsupportedKind: return "UnsupportedKind";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::ParseError: return "ParseError";
  }
  return "Unknown";
}

/// Exception carrying a machine-readable kind. Batch operations attach the
/// index of the offending sample.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what,
        std::optional<std::size_t> index = std::nullopt)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what),
        kind_(kind),
        index_(index) {}

  ErrorKind kind() const noexcept { return kind_; }
  std::optional<std::size_t> index() const noexcept { return index_; }

 private:
  ErrorKind kind_;
  std::optional<std::size_t> index_;
};

}  // namespace mersar
