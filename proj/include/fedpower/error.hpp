#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fedpower {

/// Base class for every error raised by the library. `kind()` is a stable
/// machine-readable tag used in the CLI's JSON error report.
class Error : public std::runtime_error {
 public:
  Error(std::string_view kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define FEDPOWER_DEFINE_ERROR(Name)                                   \
  class Name : public Error {                                         \
   public:                                                            \
    explicit Name(const std::string& message) : Error(#Name, message) {} \
  }

FEDPOWER_DEFINE_ERROR(RankDeficient);
FEDPOWER_DEFINE_ERROR(ConvergenceFailure);
FEDPOWER_DEFINE_ERROR(DimensionMismatch);
FEDPOWER_DEFINE_ERROR(NotOrthonormal);
FEDPOWER_DEFINE_ERROR(InvalidBudget);
FEDPOWER_DEFINE_ERROR(DegenerateData);
FEDPOWER_DEFINE_ERROR(ParseError);
FEDPOWER_DEFINE_ERROR(IndexOutOfRange);
FEDPOWER_DEFINE_ERROR(TooManyShards);
FEDPOWER_DEFINE_ERROR(InvalidArgument);
FEDPOWER_DEFINE_ERROR(ConfigError);
FEDPOWER_DEFINE_ERROR(IoError);

#undef FEDPOWER_DEFINE_ERROR

}  // namespace fedpower
