#pragma once

#include <cstddef>
#include <vector>

namespace sardino {

/// Adaptive-moment gradient descent over a fixed list of parameter
/// buffers. The buffer list and sizes must not change between steps.
class AdamOptimizer {
 public:
  struct Config {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
  };

  AdamOptimizer(Config cfg, std::vector<std::vector<float>*> params);

  /// One update; `grads` parallels the parameter list.
  void step(const std::vector<const std::vector<float>*>& grads);

  std::size_t step_count() const { return t_; }

 private:
  Config cfg_;
  std::vector<std::vector<float>*> params_;
  std::vector<std::vector<double>> m_, v_;
  std::size_t t_ = 0;
};

}  // namespace sardino
