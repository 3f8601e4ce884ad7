#pragma once

#include <stdexcept>
#include <string>

namespace mriq {

/// Base for all structured runtime failures raised by the library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Tensor / layer dimension mismatches; message names both shapes.
struct ShapeError : Error {
  using Error::Error;
};

}  // namespace mriq
