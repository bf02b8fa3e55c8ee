#include "humor/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace humor::numcore {

Adam::Adam(std::vector<Tensor> params, AdamConfig config)
    : params_(std::move(params)), config_(config) {
  if (config_.learning_rate <= 0.0) {
    throw std::invalid_argument("adam learning rate must be positive");
  }
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const Tensor& p : params_) {
    m_.emplace_back(p.values().size(), 0.0);
    v_.emplace_back(p.values().size(), 0.0);
  }
}

void Adam::step() {
  ++step_count_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_count_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_count_));
  for (std::size_t pi = 0; pi < params_.size(); ++pi) {
    Tensor& p = params_[pi];
    if (!p.has_grad()) {
      throw std::runtime_error("adam step with missing gradient for parameter " +
                               std::to_string(pi));
    }
    const auto g = p.grad();
    double* values = p.data();
    std::vector<double>& m = m_[pi];
    std::vector<double>& v = v_[pi];
    for (std::size_t i = 0; i < g.size(); ++i) {
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g[i];
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      values[i] -= config_.learning_rate * mhat / (std::sqrt(vhat) + config_.epsilon);
    }
    p.zero_grad();
  }
}

}  // namespace humor::numcore
