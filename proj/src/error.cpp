#include "semprobe/error.hpp"

namespace semprobe {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Storage: return "storage error";
    case ErrorKind::Format: return "format error";
    case ErrorKind::Validation: return "validation error";
    case ErrorKind::Shape: return "shape error";
    case ErrorKind::Input: return "input error";
    case ErrorKind::Range: return "range error";
    case ErrorKind::Numeric: return "numeric error";
    case ErrorKind::Config: return "configuration error";
    case ErrorKind::Degenerate: return "degenerate reference";
  }
  return "error";
}

int exit_code_for(ErrorKind kind) noexcept {
  return (kind == ErrorKind::Storage || kind == ErrorKind::Format) ? 2 : 1;
}

}  // namespace semprobe
