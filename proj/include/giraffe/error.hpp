#pragma once

#include <stdexcept>
#include <string>

namespace giraffe {

/// Failure category. Values line up with the CLI exit codes.
enum class ErrorKind {
  kUsage = 1,
  kValidation = 2,
  kInternal = 3,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail_validation(const std::string& what) {
  throw Error(ErrorKind::kValidation, what);
}

[[noreturn]] inline void fail_usage(const std::string& what) {
  throw Error(ErrorKind::kUsage, what);
}

[[noreturn]] inline void fail_internal(const std::string& what) {
  throw Error(ErrorKind::kInternal, what);
}

}  // namespace giraffe
