#pragma once

#include <stdexcept>
#include <string>

namespace lasan {

// Every error carries the name of the module that raised it; what() is
// "<module>: <message>" so the CLI can print it as a one-line diagnostic.
class Error : public std::runtime_error {
 public:
  Error(std::string module, const std::string& message)
      : std::runtime_error(module + ": " + message), module_(std::move(module)) {}

  const std::string& module() const noexcept { return module_; }

 private:
  std::string module_;
};

#define LASAN_DEFINE_ERROR(Name)                                 \
  class Name : public Error {                                    \
   public:                                                       \
    using Error::Error;                                          \
  };

LASAN_DEFINE_ERROR(DimensionError)
LASAN_DEFINE_ERROR(ConfigError)
LASAN_DEFINE_ERROR(ContractError)
LASAN_DEFINE_ERROR(DataError)
LASAN_DEFINE_ERROR(FormatError)
LASAN_DEFINE_ERROR(NumericError)
LASAN_DEFINE_ERROR(MetricError)
LASAN_DEFINE_ERROR(IoError)

#undef LASAN_DEFINE_ERROR

}  // namespace lasan
