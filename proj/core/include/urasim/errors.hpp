#pragma once

#include <stdexcept>
#include <string>

namespace urasim {

/// Shape or parameter constraint violated. The message names the constraint.
class DimensionError : public std::runtime_error {
 public:
  explicit DimensionError(const std::string& what) : std::runtime_error(what) {}
};

/// Bit-vector or message of unexpected length.
class LengthError : public std::runtime_error {
 public:
  explicit LengthError(const std::string& what) : std::runtime_error(what) {}
};

/// Operation undefined for the given input (e.g. zero-energy codeword).
class DegenerateError : public std::runtime_error {
 public:
  explicit DegenerateError(const std::string& what) : std::runtime_error(what) {}
};

/// Non-finite value produced by an iterative update; carries the iteration.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& what, std::size_t iteration)
      : std::runtime_error(what + " (iteration " + std::to_string(iteration) + ")"),
        iteration_(iteration) {}
  std::size_t iteration() const { return iteration_; }

 private:
  std::size_t iteration_;
};

/// Error metric evaluated against an empty ground-truth list.
class EmptyTruthError : public std::runtime_error {
 public:
  explicit EmptyTruthError(const std::string& what) : std::runtime_error(what) {}
};

/// File or stream I/O failure.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace urasim
