#pragma once

#include <cstdint>
#include <vector>

#include "sardino/rng.hpp"
#include "sardino/tensor.hpp"

namespace sardino {

/// Fully connected stack: ReLU on hidden layers, identity on the
/// output layer. Shared shape for the encoder, the weight generators,
/// and the attack network.
struct MlpSpec {
  std::vector<std::uint32_t> widths;  // input, hidden..., output

  std::size_t layer_count() const { return widths.size() - 1; }
  std::size_t param_count() const;
  void validate() const;  // >= 1 hidden layer, widths > 0
};

/// Per-layer weight (out x in, row-major) and bias tensors.
struct MlpParams {
  std::vector<Tensor> weights;
  std::vector<Tensor> biases;

  std::size_t param_count() const;
  /// He-style init on hidden layers; output layer scaled by out_scale
  /// so downstream values start small.
  static MlpParams init(const MlpSpec& spec, Rng& rng, float out_scale = 1.0f);
};

/// Pre-activation values per layer, kept for the backward pass.
struct MlpCache {
  Tensor input;
  std::vector<Tensor> pre_act;  // one per layer
};

struct MlpGrads {
  MlpParams params;  // same shapes as the forward params
  Tensor input;      // d loss / d input
};

Tensor mlp_forward(const MlpSpec& spec, const MlpParams& p, const Tensor& input,
                   MlpCache* cache = nullptr);

/// Backprop of `dout` (gradient at the MLP output) through the cached
/// forward pass. Accumulates into `grads.params` if `accumulate`.
void mlp_backward(const MlpSpec& spec, const MlpParams& p, const MlpCache& cache,
                  const std::vector<float>& dout, MlpGrads& grads,
                  bool accumulate = false);

MlpGrads make_mlp_grads(const MlpSpec& spec);

}  // namespace sardino
