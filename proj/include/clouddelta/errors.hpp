#pragma once

#include <stdexcept>
#include <string>

namespace clouddelta {

// Base for all library errors. The CLI maps subclasses to exit codes:
// parse/format -> 3, numerical/degenerate -> 4.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed or truncated input data. Message carries the file path and a
// byte or line position where the reader gave up.
struct ParseError : Error {
  using Error::Error;
};

// Structurally invalid data produced or requested on the write side:
// report invariant violations, bad transforms, invalid scene specs.
struct FormatError : Error {
  using Error::Error;
};

// Geometry too poor to solve: fewer than 3 points, collinear
// correspondences, rank-deficient covariance.
struct DegenerateGeometryError : Error {
  using Error::Error;
};

struct EmptyRegionError : Error {
  using Error::Error;
};

struct EmptyDescriptorSetError : Error {
  using Error::Error;
};

}  // namespace clouddelta
