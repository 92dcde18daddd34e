#pragma once

#include <stdexcept>
#include <string>

namespace xids {

enum class ErrorCode {
  kIo,
  kSchema,
  kParse,
  kInvalidArgument,
  kInvalidModel,
  kDimension,
  kVersion,
  kTooLarge,
};

/// Base exception for every recoverable failure raised by the library.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace xids
