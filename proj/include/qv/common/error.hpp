#pragma once

#include <stdexcept>
#include <string>

namespace qv {

enum class ErrorKind {
  kConfig,
  kInput,
  kStructural,
  kNumeric,
  kFormat,
  kCache,
  kIo,
};

const char* to_string(ErrorKind kind);

/// Base for every error raised by the library. The kind drives the CLI exit
/// code (see cli/dispatch.hpp).
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define QV_DEFINE_ERROR(Name, Kind)                                   \
  class Name : public Error {                                         \
   public:                                                            \
    explicit Name(const std::string& what) : Error(Kind, what) {}     \
  };

QV_DEFINE_ERROR(ConfigError, ErrorKind::kConfig)
QV_DEFINE_ERROR(InputError, ErrorKind::kInput)
QV_DEFINE_ERROR(StructuralError, ErrorKind::kStructural)
QV_DEFINE_ERROR(NumericError, ErrorKind::kNumeric)
QV_DEFINE_ERROR(FormatError, ErrorKind::kFormat)
QV_DEFINE_ERROR(CacheError, ErrorKind::kCache)
QV_DEFINE_ERROR(IoError, ErrorKind::kIo)

#undef QV_DEFINE_ERROR

}  // namespace qv
