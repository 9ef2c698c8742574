#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rlsol {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class InputError : public Error {
 public:
  using Error::Error;
};

class ProtocolError : public Error {
 public:
  using Error::Error;
};

// Cholesky factorization hit a non-positive pivot.
class FactorizationError : public Error {
 public:
  FactorizationError(std::size_t pivot, double value)
      : Error("factorization failed: non-positive pivot " + std::to_string(value) +
              " at index " + std::to_string(pivot)),
        pivot_(pivot) {}
  std::size_t pivot() const noexcept { return pivot_; }

 private:
  std::size_t pivot_;
};

// The precision matrix lost positive definiteness or became non-finite.
class DegeneracyError : public Error {
 public:
  DegeneracyError(std::size_t step, const std::string& what, std::ptrdiff_t layer = -1)
      : Error(describe(step, what, layer)), step_(step), layer_(layer) {}
  std::size_t step() const noexcept { return step_; }
  // -1 when not attached to a network layer.
  std::ptrdiff_t layer() const noexcept { return layer_; }

 private:
  static std::string describe(std::size_t step, const std::string& what, std::ptrdiff_t layer) {
    std::string s = "numerical degeneracy at step " + std::to_string(step);
    if (layer >= 0) s += " (layer " + std::to_string(layer) + ")";
    return s + ": " + what;
  }
  std::size_t step_;
  std::ptrdiff_t layer_;
};

class DivergenceError : public Error {
 public:
  explicit DivergenceError(std::size_t iteration)
      : Error("gradient descent diverged: cost increased for 3 consecutive iterations ending at iteration " +
              std::to_string(iteration)),
        iteration_(iteration) {}
  std::size_t iteration() const noexcept { return iteration_; }

 private:
  std::size_t iteration_;
};

}  // namespace rlsol
