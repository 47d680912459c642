#pragma once

#include <stdexcept>
#include <string>

namespace ertl {

/// Bad or inconsistent data: malformed files, dimension mismatches,
/// unknown sources, broken invariants.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

/// Filesystem-level failure: missing or unwritable paths.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

/// Numerical failure, e.g. a diverging fixed-step solve.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace ertl
