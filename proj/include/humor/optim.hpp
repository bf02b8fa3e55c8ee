#pragma once

#include <cstdint>
#include <vector>

#include "humor/tensor.hpp"

namespace humor::numcore {

struct AdamConfig {
  double learning_rate = 2e-05;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adam with bias correction. step() consumes the accumulated gradients of
// the registered parameters, applies the update, and zeroes the gradients.
class Adam {
 public:
  Adam(std::vector<Tensor> params, AdamConfig config);

  void step();

  std::int64_t step_count() const { return step_count_; }
  const AdamConfig& config() const { return config_; }
  // Moment buffers exposed for tests.
  const std::vector<double>& first_moment(std::size_t param) const {
    return m_[param];
  }
  const std::vector<double>& second_moment(std::size_t param) const {
    return v_[param];
  }

 private:
  std::vector<Tensor> params_;
  AdamConfig config_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  std::int64_t step_count_ = 0;
};

}  // namespace humor::numcore
