#pragma once

#include <stdexcept>
#include <string>

namespace mcct {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shapes of two operands do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A value violates a documented type invariant (non-finite logit, bad label, ...).
class InvariantError : public Error {
 public:
  using Error::Error;
};

/// Emit a warning to the active sink (stderr by default).
void warn(const std::string& message);

/// Replace the warning sink; nullptr restores stderr.
using WarningSink = void (*)(const std::string&);
void set_warning_sink(WarningSink sink);

}  // namespace mcct
