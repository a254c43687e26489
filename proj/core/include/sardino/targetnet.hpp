#pragma once

#include <cstdint>
#include <vector>

#include "sardino/tensor.hpp"

namespace sardino {

/// Fixed classifier family: two valid (no-padding, stride-1)
/// convolutions with ReLU and 2x2/stride-2 max pooling, then one dense
/// layer whose width equals the class count. Filter count and kernel
/// size are parameters so miniature nets can be built for gradient
/// checks; the production configuration is 32 filters, 5x5.
struct TargetNetSpec {
  std::uint32_t in_h = 28;
  std::uint32_t in_w = 28;
  std::uint32_t in_c = 1;
  std::uint32_t classes = 10;
  std::uint32_t conv_filters = 32;
  std::uint32_t kernel = 5;

  static constexpr std::uint32_t layer_count = 3;

  struct Dims {
    std::uint32_t c1_h, c1_w;  // after conv1
    std::uint32_t p1_h, p1_w;  // after pool1
    std::uint32_t c2_h, c2_w;
    std::uint32_t p2_h, p2_w;
    std::uint32_t flat;  // dense input width
  };
  Dims dims() const;
  void validate() const;

  /// weights + biases of layer i (0 = conv1, 1 = conv2, 2 = dense)
  std::size_t layer_param_count(std::uint32_t layer) const;
  std::size_t total_param_count() const;
};

/// One generated classifier's full parameter set.
/// conv weights: [filters][in_ch][ky][kx]; dense: [classes][flat].
struct TargetWeights {
  Tensor conv1_w, conv1_b;
  Tensor conv2_w, conv2_b;
  Tensor dense_w, dense_b;

  static TargetWeights zeros(const TargetNetSpec& spec);
  void validate(const TargetNetSpec& spec) const;
  std::size_t param_count() const;

  /// Flat views in layer order, weights before biases within a layer.
  std::vector<Tensor*> blocks();
  std::vector<const Tensor*> blocks() const;
};

/// Intermediate activations kept for the backward passes.
struct ActivationCache {
  Tensor input;               // CHW
  Tensor conv1_pre;           // pre-ReLU conv1 output
  Tensor pool1;               // post-ReLU, pooled
  std::vector<std::uint32_t> pool1_idx;
  Tensor conv2_pre;
  Tensor pool2;
  std::vector<std::uint32_t> pool2_idx;
};

/// Forward pass; logits length == classes.
Tensor target_forward(const TargetNetSpec& spec, const TargetWeights& w,
                      const Tensor& x, ActivationCache* cache = nullptr);

/// Numerically stable cross-entropy of logits against class y.
double cross_entropy(const Tensor& logits, std::uint32_t y);

std::vector<double> softmax(const Tensor& logits);

/// d cross_entropy / d logits == softmax - onehot(y).
std::vector<float> cross_entropy_grad_logits(const Tensor& logits,
                                             std::uint32_t y);

/// Backprop `dlogits` through the cached forward pass.
/// Accumulates weight gradients into `dw` when `accumulate`;
/// `dinput` may be null when only weight gradients are needed.
void target_backward(const TargetNetSpec& spec, const TargetWeights& w,
                     const ActivationCache& cache,
                     const std::vector<float>& dlogits, TargetWeights* dw,
                     Tensor* dinput, bool accumulate = false);

/// d cross_entropy(logits, y) / d x.
Tensor grad_input(const TargetNetSpec& spec, const TargetWeights& w,
                  const Tensor& x, std::uint32_t y);

/// d cross_entropy(logits, y) / d (every weight and bias).
TargetWeights grad_weights(const TargetNetSpec& spec, const TargetWeights& w,
                           const Tensor& x, std::uint32_t y);

std::uint32_t argmax(const Tensor& logits);

}  // namespace sardino
