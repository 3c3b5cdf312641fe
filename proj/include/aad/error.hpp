#pragma once

#include <stdexcept>
#include <string>

namespace aad {

enum class ErrorKind {
  InvalidInput,
  Config,
  Shape,
  Size,
  Index,
  InsufficientData,
  Parse,
  Divergence,
  Label,
  Domain,
  Precondition,
  OracleFailure,
  StaleCache,
  Io,
};

const char* to_string(ErrorKind kind);

// Single exception type for the library; callers branch on kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace aad
