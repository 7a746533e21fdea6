#pragma once

#include <stdexcept>
#include <string>

namespace semprobe {

enum class ErrorKind {
  Storage,     // file could not be opened, read or written
  Format,      // bytes on disk do not follow the declared layout
  Validation,  // well-formed input violating a referential/semantic invariant
  Shape,       // dimension mismatch between operands
  Input,       // argument outside its documented domain
  Range,       // label or index out of range
  Numeric,     // NaN/inf where finite values are required
  Config,      // inconsistent pipeline configuration
  Degenerate,  // reference that pools to a zero vector
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// CLI exit-code contract: 2 for I/O and format failures, 1 for everything else.
int exit_code_for(ErrorKind kind) noexcept;

}  // namespace semprobe
