#include <doctest.h>

#include <cmath>
#include <sstream>

#include "sardino/adam.hpp"
#include "sardino/errors.hpp"
#include "sardino/mlp.hpp"
#include "sardino/rng.hpp"
#include "sardino/targetnet.hpp"
#include "sardino/tensor.hpp"

using namespace sardino;

namespace {

/// Central finite difference of `loss` w.r.t. one float slot.
template <typename LossFn>
double fd_grad(float& slot, const LossFn& loss, double h = 1e-3) {
  const float saved = slot;
  slot = static_cast<float>(saved + h);
  const double up = loss();
  slot = static_cast<float>(saved - h);
  const double down = loss();
  slot = saved;
  return (up - down) / (2.0 * h);
}

bool grad_close(double fd, double an, double rel = 1e-3, double abs = 5e-4) {
  return std::fabs(fd - an) <= rel * std::max(std::fabs(fd), std::fabs(an)) + abs;
}

TargetNetSpec mini_spec() {
  TargetNetSpec s;
  s.in_h = 12;
  s.in_w = 12;
  s.in_c = 1;
  s.classes = 3;
  s.conv_filters = 2;
  s.kernel = 3;
  return s;
}

TargetWeights random_weights(const TargetNetSpec& spec, std::uint64_t seed) {
  TargetWeights w = TargetWeights::zeros(spec);
  Rng rng(seed);
  for (auto* b : w.blocks()) {
    for (auto& v : b->data) v = static_cast<float>(rng.next_gaussian() * 0.3);
  }
  return w;
}

Tensor random_image(const TargetNetSpec& spec, std::uint64_t seed) {
  Tensor x({spec.in_c, spec.in_h, spec.in_w});
  Rng rng(seed);
  for (auto& v : x.data) v = static_cast<float>(rng.next_uniform());
  return x;
}

}  // namespace

TEST_CASE("tensor blob round trip") {
  Tensor t({2, 3}, {1.0f, -2.5f, 0.0f, 4.0f, 1e-8f, 3.14f});
  std::stringstream ss;
  write_tensor_blob(ss, t);
  const Tensor back = read_tensor_blob(ss);
  CHECK(back == t);
}

TEST_CASE("rng determinism and seed splitting") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  CHECK(split_seed(7, 0) != split_seed(7, 1));
  CHECK(split_seed(7, 3) == split_seed(7, 3));
  // uniform range
  Rng c(1);
  for (int i = 0; i < 1000; ++i) {
    const double u = c.next_uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("target spec dims and parameter counts") {
  TargetNetSpec spec;  // production 28x28x1, 10 classes, 32 filters, 5x5
  const auto d = spec.dims();
  CHECK(d.c1_h == 24);
  CHECK(d.p1_h == 12);
  CHECK(d.c2_h == 8);
  CHECK(d.p2_h == 4);
  CHECK(d.flat == 512);
  CHECK(spec.layer_param_count(0) == 832);
  CHECK(spec.layer_param_count(1) == 25632);
  CHECK(spec.layer_param_count(2) == 5130);
  CHECK(spec.total_param_count() == 31594);
}

TEST_CASE("cross entropy matches naive log softmax") {
  Rng rng(5);
  for (int it = 0; it < 50; ++it) {
    Tensor logits({4});
    for (auto& v : logits.data) v = static_cast<float>(rng.next_gaussian() * 3);
    const std::uint32_t y = static_cast<std::uint32_t>(rng.next_below(4));
    double denom = 0.0;
    for (float v : logits.data) denom += std::exp(static_cast<double>(v));
    const double naive = -std::log(std::exp(static_cast<double>(logits.data[y])) / denom);
    CHECK(cross_entropy(logits, y) == doctest::Approx(naive).epsilon(1e-6));
  }
  Tensor logits({3}, {1.0f, 2.0f, 3.0f});
  CHECK_THROWS_AS(cross_entropy(logits, 3), BadLabel);
}

TEST_CASE("softmax grad is softmax minus onehot") {
  Tensor logits({3}, {0.5f, -1.0f, 2.0f});
  const auto sm = softmax(logits);
  const auto g = cross_entropy_grad_logits(logits, 1);
  for (int c = 0; c < 3; ++c) {
    const double expect = sm[c] - (c == 1 ? 1.0 : 0.0);
    CHECK(g[c] == doctest::Approx(expect).epsilon(1e-5));
  }
}

TEST_CASE("mlp backward matches finite differences") {
  MlpSpec spec{{5, 7, 4}};
  Rng rng(11);
  MlpParams p = MlpParams::init(spec, rng);
  Tensor in({5});
  for (auto& v : in.data) v = static_cast<float>(rng.next_gaussian());

  // loss = sum of squared outputs
  auto loss = [&]() {
    const Tensor out = mlp_forward(spec, p, in);
    double s = 0.0;
    for (float v : out.data) s += static_cast<double>(v) * v;
    return s;
  };
  MlpCache cache;
  const Tensor out = mlp_forward(spec, p, in, &cache);
  std::vector<float> dout(out.numel());
  for (std::size_t i = 0; i < out.numel(); ++i) dout[i] = 2.0f * out.data[i];
  MlpGrads grads = make_mlp_grads(spec);
  mlp_backward(spec, p, cache, dout, grads);

  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    for (std::size_t i = 0; i < p.weights[l].numel(); i += 3) {
      const double fd = fd_grad(p.weights[l].data[i], loss);
      CHECK_MESSAGE(grad_close(fd, grads.params.weights[l].data[i]),
                    "layer " << l << " weight " << i);
    }
    for (std::size_t i = 0; i < p.biases[l].numel(); ++i) {
      const double fd = fd_grad(p.biases[l].data[i], loss);
      CHECK(grad_close(fd, grads.params.biases[l].data[i]));
    }
  }
  // input gradient
  for (std::size_t i = 0; i < in.numel(); ++i) {
    const double fd = fd_grad(in.data[i], loss);
    CHECK(grad_close(fd, grads.input.data[i]));
  }
}

TEST_CASE("target weight gradients match finite differences") {
  const TargetNetSpec spec = mini_spec();
  TargetWeights w = random_weights(spec, 21);
  const Tensor x = random_image(spec, 22);
  const std::uint32_t y = 1;

  auto loss = [&]() { return cross_entropy(target_forward(spec, w, x), y); };
  const TargetWeights dw = grad_weights(spec, w, x, y);

  auto blocks = w.blocks();
  auto dblocks = dw.blocks();
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const std::size_t stride = std::max<std::size_t>(1, blocks[b]->numel() / 12);
    for (std::size_t i = 0; i < blocks[b]->numel(); i += stride) {
      const double fd = fd_grad(blocks[b]->data[i], loss);
      CHECK_MESSAGE(grad_close(fd, dblocks[b]->data[i]),
                    "block " << b << " slot " << i);
    }
  }
}

TEST_CASE("target input gradient matches finite differences") {
  const TargetNetSpec spec = mini_spec();
  TargetWeights w = random_weights(spec, 31);
  Tensor x = random_image(spec, 32);
  const std::uint32_t y = 2;

  auto loss = [&]() { return cross_entropy(target_forward(spec, w, x), y); };
  const Tensor dx = grad_input(spec, w, x, y);
  for (std::size_t i = 0; i < x.numel(); i += 7) {
    const double fd = fd_grad(x.data[i], loss);
    CHECK(grad_close(fd, dx.data[i]));
  }
}

TEST_CASE("forward validates shapes and rejects bad labels") {
  const TargetNetSpec spec = mini_spec();
  const TargetWeights w = random_weights(spec, 41);
  Tensor wrong({1, 5, 5});
  CHECK_THROWS_AS(target_forward(spec, w, wrong), SpecMismatch);
  const Tensor logits = target_forward(spec, w, random_image(spec, 42));
  CHECK(logits.numel() == spec.classes);
  CHECK(logits.all_finite());
}

TEST_CASE("argmax breaks ties to lowest index") {
  Tensor logits({4}, {1.0f, 3.0f, 3.0f, 0.0f});
  CHECK(argmax(logits) == 1);
}

TEST_CASE("adam converges on a quadratic") {
  std::vector<float> param{5.0f, -3.0f};
  AdamOptimizer opt({0.1, 0.9, 0.999, 1e-8}, {&param});
  for (int i = 0; i < 500; ++i) {
    std::vector<float> g{2.0f * param[0], 2.0f * param[1]};
    std::vector<float> gv(g);
    std::vector<const std::vector<float>*> gs{&gv};
    opt.step(gs);
  }
  CHECK(std::fabs(param[0]) < 1e-2);
  CHECK(std::fabs(param[1]) < 1e-2);
}
