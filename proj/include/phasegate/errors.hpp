#pragma once

#include <stdexcept>
#include <string>

namespace phasegate {

/// Invalid or unknown configuration field. The message names the field.
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed or incomplete count / matrix files.
class DataFormatError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Reconstruction failed to converge or hit a degenerate model.
class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

}  // namespace phasegate
