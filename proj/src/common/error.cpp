#include "qv/common/error.hpp"

namespace qv {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig: return "configuration error";
    case ErrorKind::kInput: return "input error";
    case ErrorKind::kStructural: return "structural error";
    case ErrorKind::kNumeric: return "numeric error";
    case ErrorKind::kFormat: return "format error";
    case ErrorKind::kCache: return "cache error";
    case ErrorKind::kIo: return "I/O error";
  }
  return "error";
}

}  // namespace qv
