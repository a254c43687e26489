#include "sardino/mlp.hpp"

#include <cmath>
#include <cstring>

#include "sardino/errors.hpp"

namespace sardino {

void MlpSpec::validate() const {
  if (widths.size() < 3) throw SpecMismatch("MlpSpec needs >= 1 hidden layer");
  for (auto w : widths) {
    if (w == 0) throw SpecMismatch("MlpSpec widths must be > 0");
  }
}

std::size_t MlpSpec::param_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    n += static_cast<std::size_t>(widths[l]) * widths[l + 1] + widths[l + 1];
  }
  return n;
}

std::size_t MlpParams::param_count() const {
  std::size_t n = 0;
  for (const auto& w : weights) n += w.numel();
  for (const auto& b : biases) n += b.numel();
  return n;
}

MlpParams MlpParams::init(const MlpSpec& spec, Rng& rng, float out_scale) {
  spec.validate();
  MlpParams p;
  const std::size_t layers = spec.layer_count();
  for (std::size_t l = 0; l < layers; ++l) {
    const std::uint32_t in = spec.widths[l];
    const std::uint32_t out = spec.widths[l + 1];
    Tensor w({out, in});
    const float std_dev = std::sqrt(2.0f / static_cast<float>(in)) *
                          (l + 1 == layers ? out_scale : 1.0f);
    for (auto& v : w.data) v = static_cast<float>(rng.next_gaussian()) * std_dev;
    p.weights.push_back(std::move(w));
    p.biases.emplace_back(std::vector<std::uint32_t>{out});
  }
  return p;
}

Tensor mlp_forward(const MlpSpec& spec, const MlpParams& p, const Tensor& input,
                   MlpCache* cache) {
  if (input.numel() != spec.widths.front()) {
    throw SpecMismatch("mlp_forward: input width mismatch");
  }
  if (cache) {
    cache->input = input;
    cache->pre_act.clear();
  }
  const std::size_t layers = spec.layer_count();
  Tensor cur = input;
  for (std::size_t l = 0; l < layers; ++l) {
    const std::uint32_t in = spec.widths[l];
    const std::uint32_t out = spec.widths[l + 1];
    Tensor next({out});
    const float* w = p.weights[l].data.data();
    const float* b = p.biases[l].data.data();
    const float* x = cur.data.data();
    for (std::uint32_t o = 0; o < out; ++o) {
      const float* row = w + static_cast<std::size_t>(o) * in;
      float acc = b[o];
      for (std::uint32_t i = 0; i < in; ++i) acc += row[i] * x[i];
      next.data[o] = acc;
    }
    if (cache) cache->pre_act.push_back(next);
    if (l + 1 < layers) {
      for (auto& v : next.data) v = v > 0.0f ? v : 0.0f;  // ReLU
    }
    cur = std::move(next);
  }
  return cur;
}

MlpGrads make_mlp_grads(const MlpSpec& spec) {
  MlpGrads g;
  for (std::size_t l = 0; l + 1 < spec.widths.size(); ++l) {
    g.params.weights.emplace_back(
        std::vector<std::uint32_t>{spec.widths[l + 1], spec.widths[l]});
    g.params.biases.emplace_back(std::vector<std::uint32_t>{spec.widths[l + 1]});
  }
  g.input = Tensor({spec.widths.front()});
  return g;
}

void mlp_backward(const MlpSpec& spec, const MlpParams& p, const MlpCache& cache,
                  const std::vector<float>& dout, MlpGrads& grads,
                  bool accumulate) {
  const std::size_t layers = spec.layer_count();
  if (dout.size() != spec.widths.back()) {
    throw SpecMismatch("mlp_backward: dout width mismatch");
  }
  if (!accumulate) {
    for (auto& w : grads.params.weights) std::fill(w.begin(), w.end(), 0.0f);
    for (auto& b : grads.params.biases) std::fill(b.begin(), b.end(), 0.0f);
  }
  std::vector<float> delta = dout;
  for (std::size_t li = layers; li-- > 0;) {
    const std::uint32_t in = spec.widths[li];
    const std::uint32_t out = spec.widths[li + 1];
    // activation of the previous layer (post-ReLU), or the raw input
    std::vector<float> prev;
    if (li == 0) {
      prev = cache.input.data;
    } else {
      prev = cache.pre_act[li - 1].data;
      for (auto& v : prev) v = v > 0.0f ? v : 0.0f;
    }
    float* dw = grads.params.weights[li].data.data();
    float* db = grads.params.biases[li].data.data();
    for (std::uint32_t o = 0; o < out; ++o) {
      const float d = delta[o];
      db[o] += d;
      float* row = dw + static_cast<std::size_t>(o) * in;
      for (std::uint32_t i = 0; i < in; ++i) row[i] += d * prev[i];
    }
    std::vector<float> dprev(in, 0.0f);
    const float* w = p.weights[li].data.data();
    for (std::uint32_t o = 0; o < out; ++o) {
      const float d = delta[o];
      const float* row = w + static_cast<std::size_t>(o) * in;
      for (std::uint32_t i = 0; i < in; ++i) dprev[i] += d * row[i];
    }
    if (li > 0) {
      const float* pre = cache.pre_act[li - 1].data.data();
      for (std::uint32_t i = 0; i < in; ++i) {
        if (pre[i] <= 0.0f) dprev[i] = 0.0f;
      }
    }
    delta = std::move(dprev);
  }
  grads.input.data = std::move(delta);
  grads.input.shape = {spec.widths.front()};
}

}  // namespace sardino
