#ifndef MICROFRAC_ERRORS_HPP
#define MICROFRAC_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace microfrac {

/// Invalid configuration or physically inadmissible input. CLI exit code 1.
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Numerical failure: singular system, tolerance violation, non-convergence.
/// CLI exit code 2.
class NumericError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// File system or file format failure. CLI exit code 3.
class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

} // namespace microfrac

#endif
