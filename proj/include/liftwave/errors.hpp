#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace liftwave {

// Inconsistent structure, shape or parameter configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller-supplied data violates a precondition (sizes, extents, ranges).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// File system or stream failure.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed, truncated or mismatched binary data. Carries the byte offset at
// which decoding stopped.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " (at byte " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

// Weight digest in a codestream does not match the supplied weights.
class DigestMismatch : public FormatError {
 public:
  using FormatError::FormatError;
};

// Non-finite values or a diverging objective during optimization.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace liftwave
