#include "sardino/adam.hpp"

#include <cmath>

#include "sardino/errors.hpp"

namespace sardino {

AdamOptimizer::AdamOptimizer(Config cfg, std::vector<std::vector<float>*> params)
    : cfg_(cfg), params_(std::move(params)) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto* p : params_) {
    m_.emplace_back(p->size(), 0.0);
    v_.emplace_back(p->size(), 0.0);
  }
}

void AdamOptimizer::step(const std::vector<const std::vector<float>*>& grads) {
  if (grads.size() != params_.size()) {
    throw BadArgument("AdamOptimizer::step: gradient list size mismatch");
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto& p = *params_[k];
    const auto& g = *grads[k];
    if (g.size() != p.size()) {
      throw BadArgument("AdamOptimizer::step: gradient buffer size mismatch");
    }
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g[i];
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * gi;
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * gi * gi;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p[i] -= static_cast<float>(cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps));
    }
  }
}

}  // namespace sardino
