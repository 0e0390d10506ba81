#pragma once

#include <stdexcept>
#include <string>

namespace nodalflow {

// Invalid grid, config value, or unknown family tag.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Operation not defined for this configuration (e.g. Poisson below 3D).
struct UnsupportedError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Ball or window does not fit inside the grid.
struct GeometryError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Iterative linear solve hit its cap; carries the last relative residual.
struct SolverError : std::runtime_error {
  SolverError(const std::string& what, double residual)
      : std::runtime_error(what), residual(residual) {}
  double residual;
};

// A stored solution failed re-certification.
struct ConsistencyError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace nodalflow
