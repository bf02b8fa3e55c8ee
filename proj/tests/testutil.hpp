#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "humor/rng.hpp"
#include "humor/tensor.hpp"

namespace testutil {

// Central finite differences, h = 1e-5. `objective` must be a deterministic
// scalar function of the leaf values; this oracle never touches the autograd
// path it is checking.
struct FiniteDiffReport {
  double max_rel_err = 0.0;
  std::string worst;
};

inline double rel_err(double analytic, double numeric) {
  const double denom = std::max({1.0, std::abs(analytic), std::abs(numeric)});
  return std::abs(analytic - numeric) / denom;
}

// Checks the accumulated .grad() of `leaf` against central differences of
// `objective` with respect to each coordinate of `leaf`.
inline FiniteDiffReport check_gradient(
    humor::numcore::Tensor& leaf,
    const std::function<double()>& objective,
    const char* name = "leaf",
    double h = 1e-5) {
  FiniteDiffReport report;
  double* values = leaf.data();
  const auto analytic = leaf.grad();
  for (std::size_t i = 0; i < leaf.values().size(); ++i) {
    const double saved = values[i];
    values[i] = saved + h;
    const double up = objective();
    values[i] = saved - h;
    const double down = objective();
    values[i] = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double err = rel_err(analytic[i], numeric);
    if (err > report.max_rel_err) {
      report.max_rel_err = err;
      report.worst = std::string(name) + "[" + std::to_string(i) + "] analytic=" +
                     std::to_string(analytic[i]) + " numeric=" + std::to_string(numeric);
    }
  }
  return report;
}

inline humor::numcore::Tensor random_tensor(std::vector<int> shape,
                                            humor::Rng& rng,
                                            double lo = -1.0, double hi = 1.0,
                                            bool requires_grad = true) {
  auto t = humor::numcore::Tensor::zeros(std::move(shape), requires_grad);
  double* v = t.data();
  for (std::int64_t i = 0; i < t.size(); ++i) v[i] = rng.uniform(lo, hi);
  return t;
}

}  // namespace testutil
