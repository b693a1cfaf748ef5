#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace confide {

/// Broad failure class; the CLI maps each to a distinct exit status.
enum class ErrorKind {
  kUsage,            // caller misused the API or CLI
  kInputValidation,  // malformed dataset, manifest, artifact or config
  kPrecondition,     // inputs are well-formed but the operation cannot run
  kIo,               // filesystem failure
};

const char* to_string(ErrorKind kind);

/// Every error carries a stable machine-readable code (e.g. "label-range",
/// "unusable-reference") plus the offending file and byte offset when known.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string code, const std::string& message,
        std::optional<std::string> file = std::nullopt,
        std::optional<std::uint64_t> offset = std::nullopt);

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& code() const noexcept { return code_; }
  const std::optional<std::string>& file() const noexcept { return file_; }
  const std::optional<std::uint64_t>& offset() const noexcept { return offset_; }

 private:
  ErrorKind kind_;
  std::string code_;
  std::optional<std::string> file_;
  std::optional<std::uint64_t> offset_;
};

}  // namespace confide
