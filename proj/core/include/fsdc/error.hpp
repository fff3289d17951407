#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fsdc {

enum class ErrorKind {
  format,
  dimension,
  data,
  io,
  spec,
  domain,
  undefined_skewness,
  empty_class,
  insufficient_samples,
  missing_class,
  undefined_similarity,
  not_factorizable,
  divergence,
  precondition,
  unsatisfiable,
  usage,
};

std::string_view to_string(ErrorKind kind) noexcept;

// Single exception type for the library. The kind is stable and machine
// readable; the message carries the human context.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Rethrows `e` with `context` prepended, preserving the kind.
[[noreturn]] void rethrow_with_context(const Error& e, const std::string& context);

}  // namespace fsdc
