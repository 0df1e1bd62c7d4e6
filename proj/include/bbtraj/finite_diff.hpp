#pragma once

#include <algorithm>
#include <cmath>
#include <functional>

#include "bbtraj/tensor.hpp"

namespace bbtraj {

/// Central-difference gradient (f(x + eps e_i) - f(x - eps e_i)) / 2 eps for
/// every coordinate of x. Used as the oracle for hand-written backward passes.
inline Vector<double> finite_diff_grad(const std::function<double(const Vector<double>&)>& f,
                                       const Vector<double>& x, double eps) {
  if (!(eps > 0.0)) {
    throw ConfigError("finite_diff_grad: eps must be positive");
  }
  Vector<double> grad(x.size());
  Vector<double> probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + eps;
    const double up = f(probe);
    probe[i] = x[i] - eps;
    const double down = f(probe);
    probe[i] = x[i];
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw NumericError("finite_diff_grad: non-finite function value at coordinate " +
                         std::to_string(i));
    }
    grad[i] = (up - down) / (2.0 * eps);
  }
  return grad;
}

/// max_i |a_i - b_i| / max(|a_i|, |b_i|, floor). The floor keeps entries that
/// are zero in both from producing 0/0.
inline double max_relative_error(const Vector<double>& a, const Vector<double>& b,
                                 double floor = 1e-6) {
  require_same_shape(a, b, "max_relative_error");
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double denom = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  return worst;
}

}  // namespace bbtraj
