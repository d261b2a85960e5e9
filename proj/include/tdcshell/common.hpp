#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace tdcshell {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat32 = Eigen::Matrix<double, 3, 2>;

/// Base of every error the library throws.
class ShellError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid input: malformed patch, point outside an element, bad config value.
class DomainError : public ShellError {
 public:
  using ShellError::ShellError;
};

/// Degenerate geometry or a failed numerical check.
class NumericalError : public ShellError {
 public:
  using ShellError::ShellError;
};

/// The saddle-point system has a nontrivial nullspace.
class SingularSystemError : public ShellError {
 public:
  SingularSystemError(const std::string& what, int nullspace_dim)
      : ShellError(what), nullspace_dim_(nullspace_dim) {}
  /// Detected nullspace dimension, or -1 when the system was too large to count.
  int nullspace_dim() const { return nullspace_dim_; }

 private:
  int nullspace_dim_;
};

/// Parametric coordinates on a patch (knot-space values, not reference-element values).
struct ParamPoint {
  double u = 0.0;
  double v = 0.0;
};

}  // namespace tdcshell
