#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>

namespace tvsbl {

// Structurally invalid arguments: dimension mismatches, bad option values.
class ContractViolation : public std::invalid_argument {
 public:
  explicit ContractViolation(const std::string& what) : std::invalid_argument(what) {}
};

// Numerically unusable inputs: NaN/Inf entries, non-positive variances.
class InputError : public std::invalid_argument {
 public:
  explicit InputError(const std::string& what) : std::invalid_argument(what) {}
};

// A condition the library guarantees cannot occur for valid inputs.
class InternalError : public std::runtime_error {
 public:
  explicit InternalError(const std::string& what) : std::runtime_error(what) {}
};

// An iterative solver exhausted its budget without meeting its certificate.
// Carries the certificate value and the iteration count at exit.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double residual, int iterations)
      : std::runtime_error(what), residual_(residual), iterations_(iterations) {}
  double residual() const { return residual_; }
  int iterations() const { return iterations_; }

 private:
  double residual_;
  int iterations_;
};

class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ContractViolation(message);
}

template <typename Derived>
void require_finite(const Eigen::DenseBase<Derived>& values, const std::string& name) {
  if (!values.derived().allFinite()) throw InputError(name + " contains non-finite values");
}

inline void require_finite(double value, const std::string& name) {
  if (!std::isfinite(value)) throw InputError(name + " is non-finite");
}

}  // namespace tvsbl
