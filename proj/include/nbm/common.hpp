// Shared aliases and error types.
#pragma once

#include <Eigen/Core>
#include <stdexcept>
#include <string>

namespace nbm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Bad or inconsistent user input (config files, CLI flags, shape mismatches).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical breakdown at runtime (non-finite values, solver failure).
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ConfigError(msg);
}

inline void check_finite(const Matrix& m, const std::string& what) {
  if (!m.allFinite()) throw NumericError("non-finite values in " + what);
}

inline void check_finite(const Vector& v, const std::string& what) {
  if (!v.allFinite()) throw NumericError("non-finite values in " + what);
}

// Axis-aligned box; per-axis [lo, hi].
struct Box {
  Eigen::Vector3d lo = Eigen::Vector3d::Zero();
  Eigen::Vector3d hi = Eigen::Vector3d::Zero();
  int dim = 2;

  static Box square(double a, double b, int d = 2) {
    Box box;
    box.dim = d;
    for (int i = 0; i < d; ++i) {
      box.lo[i] = a;
      box.hi[i] = b;
    }
    return box;
  }
  double length(int axis) const { return hi[axis] - lo[axis]; }
  double half_length(int axis) const { return 0.5 * (hi[axis] - lo[axis]); }
  double center(int axis) const { return 0.5 * (hi[axis] + lo[axis]); }
  void validate() const {
    require(dim >= 1 && dim <= 3, "domain dimension must be 1, 2 or 3");
    for (int i = 0; i < dim; ++i)
      require(lo[i] < hi[i] && std::isfinite(lo[i]) && std::isfinite(hi[i]),
              "domain box must have finite lo < hi per axis");
  }
};

}  // namespace nbm
