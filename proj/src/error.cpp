#include "confide/error.hpp"

namespace confide {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kUsage:
      return "usage";
    case ErrorKind::kInputValidation:
      return "input-validation";
    case ErrorKind::kPrecondition:
      return "precondition";
    case ErrorKind::kIo:
      return "io";
  }
  return "unknown";
}

Error::Error(ErrorKind kind, std::string code, const std::string& message,
             std::optional<std::string> file, std::optional<std::uint64_t> offset)
    : std::runtime_error(message),
      kind_(kind),
      code_(std::move(code)),
      file_(std::move(file)),
      offset_(offset) {}

}  // namespace confide
