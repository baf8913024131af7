#ifndef FLOWPACK_ERRORS_HPP
#define FLOWPACK_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace flowpack {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Arguments outside an operation's domain.
class InputError : public Error {
 public:
  using Error::Error;
};

// A free-space grid larger than the configured cell budget.
class ResourceError : public Error {
 public:
  using Error::Error;
};

class FixedPointError : public Error {
 public:
  FixedPointError(const std::string& what, std::size_t sample)
      : Error(what), sample_index(sample) {}
  std::size_t sample_index;
};

class CalibrationError : public Error {
 public:
  using Error::Error;
};

class EstimationError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  ConfigError(const std::string& field, const std::string& what)
      : Error(field + ": " + what), field_path(field) {}
  std::string field_path;
};

}  // namespace flowpack

#endif
