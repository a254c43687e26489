#include "sardino/targetnet.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "sardino/errors.hpp"

namespace sardino {

namespace {

// Valid convolution, stride 1. in: [C][H][W], w: [F][C][K][K], out: [F][OH][OW].
void conv_forward(const float* in, std::uint32_t c, std::uint32_t h,
                  std::uint32_t w, const float* wt, const float* bias,
                  std::uint32_t f, std::uint32_t k, float* out) {
  const std::uint32_t oh = h - k + 1;
  const std::uint32_t ow = w - k + 1;
  for (std::uint32_t fi = 0; fi < f; ++fi) {
    float* oplane = out + static_cast<std::size_t>(fi) * oh * ow;
    const float* wbase = wt + static_cast<std::size_t>(fi) * c * k * k;
    const float b = bias[fi];
    for (std::uint32_t oy = 0; oy < oh; ++oy) {
      for (std::uint32_t ox = 0; ox < ow; ++ox) {
        float acc = b;
        for (std::uint32_t ci = 0; ci < c; ++ci) {
          const float* iplane = in + (static_cast<std::size_t>(ci) * h + oy) * w + ox;
          const float* wrow = wbase + static_cast<std::size_t>(ci) * k * k;
          for (std::uint32_t ky = 0; ky < k; ++ky) {
            const float* irow = iplane + static_cast<std::size_t>(ky) * w;
            for (std::uint32_t kx = 0; kx < k; ++kx) {
              acc += irow[kx] * wrow[ky * k + kx];
            }
          }
        }
        oplane[static_cast<std::size_t>(oy) * ow + ox] = acc;
      }
    }
  }
}

// dOut: [F][OH][OW]. Accumulates dW/dB; dIn is optional.
void conv_backward(const float* in, std::uint32_t c, std::uint32_t h,
                   std::uint32_t w, const float* wt, std::uint32_t f,
                   std::uint32_t k, const float* dout, float* dwt, float* dbias,
                   float* din) {
  const std::uint32_t oh = h - k + 1;
  const std::uint32_t ow = w - k + 1;
  for (std::uint32_t fi = 0; fi < f; ++fi) {
    const float* dplane = dout + static_cast<std::size_t>(fi) * oh * ow;
    const float* wbase = wt + static_cast<std::size_t>(fi) * c * k * k;
    float* dwbase = dwt ? dwt + static_cast<std::size_t>(fi) * c * k * k : nullptr;
    for (std::uint32_t oy = 0; oy < oh; ++oy) {
      for (std::uint32_t ox = 0; ox < ow; ++ox) {
        const float d = dplane[static_cast<std::size_t>(oy) * ow + ox];
        if (d == 0.0f) continue;
        if (dbias) dbias[fi] += d;
        for (std::uint32_t ci = 0; ci < c; ++ci) {
          const float* iplane = in + (static_cast<std::size_t>(ci) * h + oy) * w + ox;
          float* diplane =
              din ? din + (static_cast<std::size_t>(ci) * h + oy) * w + ox : nullptr;
          const float* wrow = wbase + static_cast<std::size_t>(ci) * k * k;
          float* dwrow = dwbase ? dwbase + static_cast<std::size_t>(ci) * k * k : nullptr;
          for (std::uint32_t ky = 0; ky < k; ++ky) {
            const float* irow = iplane + static_cast<std::size_t>(ky) * w;
            float* dirow = diplane ? diplane + static_cast<std::size_t>(ky) * w : nullptr;
            for (std::uint32_t kx = 0; kx < k; ++kx) {
              if (dwrow) dwrow[ky * k + kx] += d * irow[kx];
              if (dirow) dirow[kx] += d * wrow[ky * k + kx];
            }
          }
        }
      }
    }
  }
}

// 2x2 stride-2 max pool over [C][H][W]; remembers the winning flat
// index per output cell. Ties go to the first maximal element.
void pool_forward(const float* in, std::uint32_t c, std::uint32_t h,
                  std::uint32_t w, float* out, std::uint32_t* idx) {
  const std::uint32_t ph = h / 2;
  const std::uint32_t pw = w / 2;
  for (std::uint32_t ci = 0; ci < c; ++ci) {
    const float* plane = in + static_cast<std::size_t>(ci) * h * w;
    float* oplane = out + static_cast<std::size_t>(ci) * ph * pw;
    std::uint32_t* iplane = idx + static_cast<std::size_t>(ci) * ph * pw;
    for (std::uint32_t py = 0; py < ph; ++py) {
      for (std::uint32_t px = 0; px < pw; ++px) {
        std::uint32_t best = (2 * py) * w + 2 * px;
        float bv = plane[best];
        const std::uint32_t cand[3] = {(2 * py) * w + 2 * px + 1,
                                       (2 * py + 1) * w + 2 * px,
                                       (2 * py + 1) * w + 2 * px + 1};
        for (auto ix : cand) {
          if (plane[ix] > bv) {
            bv = plane[ix];
            best = ix;
          }
        }
        oplane[static_cast<std::size_t>(py) * pw + px] = bv;
        iplane[static_cast<std::size_t>(py) * pw + px] =
            static_cast<std::uint32_t>(ci) * h * w + best;
      }
    }
  }
}

void relu_inplace(float* v, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) v[i] = v[i] > 0.0f ? v[i] : 0.0f;
}

}  // namespace

TargetNetSpec::Dims TargetNetSpec::dims() const {
  Dims d{};
  d.c1_h = in_h - kernel + 1;
  d.c1_w = in_w - kernel + 1;
  d.p1_h = d.c1_h / 2;
  d.p1_w = d.c1_w / 2;
  d.c2_h = d.p1_h - kernel + 1;
  d.c2_w = d.p1_w - kernel + 1;
  d.p2_h = d.c2_h / 2;
  d.p2_w = d.c2_w / 2;
  d.flat = d.p2_h * d.p2_w * conv_filters;
  return d;
}

void TargetNetSpec::validate() const {
  if (classes < 2) throw SpecMismatch("TargetNetSpec: need >= 2 classes");
  if (conv_filters == 0 || kernel == 0 || in_c == 0) {
    throw SpecMismatch("TargetNetSpec: zero-sized layer");
  }
  if (in_h < kernel || in_w < kernel) {
    throw SpecMismatch("TargetNetSpec: input smaller than kernel");
  }
  const Dims d = dims();
  if (d.p1_h < kernel || d.p1_w < kernel || d.p2_h == 0 || d.p2_w == 0) {
    throw SpecMismatch("TargetNetSpec: input too small for two conv+pool stages");
  }
}

std::size_t TargetNetSpec::layer_param_count(std::uint32_t layer) const {
  const Dims d = dims();
  const std::size_t k2 = static_cast<std::size_t>(kernel) * kernel;
  switch (layer) {
    case 0:
      return k2 * in_c * conv_filters + conv_filters;
    case 1:
      return k2 * conv_filters * conv_filters + conv_filters;
    case 2:
      return static_cast<std::size_t>(d.flat) * classes + classes;
    default:
      throw BadArgument("layer_param_count: layer out of range");
  }
}

std::size_t TargetNetSpec::total_param_count() const {
  return layer_param_count(0) + layer_param_count(1) + layer_param_count(2);
}

TargetWeights TargetWeights::zeros(const TargetNetSpec& spec) {
  spec.validate();
  const auto d = spec.dims();
  TargetWeights w;
  w.conv1_w = Tensor({spec.conv_filters, spec.in_c, spec.kernel, spec.kernel});
  w.conv1_b = Tensor({spec.conv_filters});
  w.conv2_w = Tensor({spec.conv_filters, spec.conv_filters, spec.kernel, spec.kernel});
  w.conv2_b = Tensor({spec.conv_filters});
  w.dense_w = Tensor({spec.classes, d.flat});
  w.dense_b = Tensor({spec.classes});
  return w;
}

void TargetWeights::validate(const TargetNetSpec& spec) const {
  const auto d = spec.dims();
  auto check = [](const Tensor& got, std::initializer_list<std::uint32_t> want,
                  const char* name) {
    if (!std::equal(got.shape.begin(), got.shape.end(), want.begin(), want.end())) {
      throw SpecMismatch(std::string("TargetWeights: bad shape for ") + name);
    }
  };
  check(conv1_w, {spec.conv_filters, spec.in_c, spec.kernel, spec.kernel}, "conv1_w");
  check(conv1_b, {spec.conv_filters}, "conv1_b");
  check(conv2_w, {spec.conv_filters, spec.conv_filters, spec.kernel, spec.kernel},
        "conv2_w");
  check(conv2_b, {spec.conv_filters}, "conv2_b");
  check(dense_w, {spec.classes, d.flat}, "dense_w");
  check(dense_b, {spec.classes}, "dense_b");
}

std::size_t TargetWeights::param_count() const {
  return conv1_w.numel() + conv1_b.numel() + conv2_w.numel() + conv2_b.numel() +
         dense_w.numel() + dense_b.numel();
}

std::vector<Tensor*> TargetWeights::blocks() {
  return {&conv1_w, &conv1_b, &conv2_w, &conv2_b, &dense_w, &dense_b};
}

std::vector<const Tensor*> TargetWeights::blocks() const {
  return {&conv1_w, &conv1_b, &conv2_w, &conv2_b, &dense_w, &dense_b};
}

Tensor target_forward(const TargetNetSpec& spec, const TargetWeights& w,
                      const Tensor& x, ActivationCache* cache) {
  spec.validate();
  if (x.numel() != static_cast<std::size_t>(spec.in_h) * spec.in_w * spec.in_c) {
    throw SpecMismatch("target_forward: input shape mismatch");
  }
  w.validate(spec);
  const auto d = spec.dims();
  const std::uint32_t f = spec.conv_filters;
  const std::uint32_t k = spec.kernel;

  Tensor c1({f, d.c1_h, d.c1_w});
  conv_forward(x.data.data(), spec.in_c, spec.in_h, spec.in_w, w.conv1_w.data.data(),
               w.conv1_b.data.data(), f, k, c1.data.data());
  Tensor a1 = c1;
  relu_inplace(a1.data.data(), a1.numel());
  Tensor p1({f, d.p1_h, d.p1_w});
  std::vector<std::uint32_t> p1_idx(p1.numel());
  pool_forward(a1.data.data(), f, d.c1_h, d.c1_w, p1.data.data(), p1_idx.data());

  Tensor c2({f, d.c2_h, d.c2_w});
  conv_forward(p1.data.data(), f, d.p1_h, d.p1_w, w.conv2_w.data.data(),
               w.conv2_b.data.data(), f, k, c2.data.data());
  Tensor a2 = c2;
  relu_inplace(a2.data.data(), a2.numel());
  Tensor p2({f, d.p2_h, d.p2_w});
  std::vector<std::uint32_t> p2_idx(p2.numel());
  pool_forward(a2.data.data(), f, d.c2_h, d.c2_w, p2.data.data(), p2_idx.data());

  Tensor logits({spec.classes});
  const float* dw = w.dense_w.data.data();
  for (std::uint32_t o = 0; o < spec.classes; ++o) {
    const float* row = dw + static_cast<std::size_t>(o) * d.flat;
    float acc = w.dense_b.data[o];
    for (std::uint32_t i = 0; i < d.flat; ++i) acc += row[i] * p2.data[i];
    logits.data[o] = acc;
  }

  if (cache) {
    cache->input = x;
    cache->conv1_pre = std::move(c1);
    cache->pool1 = std::move(p1);
    cache->pool1_idx = std::move(p1_idx);
    cache->conv2_pre = std::move(c2);
    cache->pool2 = std::move(p2);
    cache->pool2_idx = std::move(p2_idx);
  }
  return logits;
}

std::vector<double> softmax(const Tensor& logits) {
  double mx = -std::numeric_limits<double>::infinity();
  for (float v : logits.data) mx = std::max(mx, static_cast<double>(v));
  std::vector<double> p(logits.numel());
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = std::exp(static_cast<double>(logits.data[i]) - mx);
    sum += p[i];
  }
  for (auto& v : p) v /= sum;
  return p;
}

double cross_entropy(const Tensor& logits, std::uint32_t y) {
  if (y >= logits.numel()) throw BadLabel("cross_entropy: label out of range");
  // -log softmax_y via log-sum-exp
  double mx = -std::numeric_limits<double>::infinity();
  for (float v : logits.data) mx = std::max(mx, static_cast<double>(v));
  double sum = 0.0;
  for (float v : logits.data) sum += std::exp(static_cast<double>(v) - mx);
  return std::log(sum) - (static_cast<double>(logits.data[y]) - mx);
}

std::vector<float> cross_entropy_grad_logits(const Tensor& logits,
                                             std::uint32_t y) {
  if (y >= logits.numel()) throw BadLabel("cross_entropy_grad: label out of range");
  const auto p = softmax(logits);
  std::vector<float> g(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) g[i] = static_cast<float>(p[i]);
  g[y] -= 1.0f;
  return g;
}

void target_backward(const TargetNetSpec& spec, const TargetWeights& w,
                     const ActivationCache& cache,
                     const std::vector<float>& dlogits, TargetWeights* dw,
                     Tensor* dinput, bool accumulate) {
  const auto d = spec.dims();
  const std::uint32_t f = spec.conv_filters;
  const std::uint32_t k = spec.kernel;
  if (dlogits.size() != spec.classes) {
    throw SpecMismatch("target_backward: dlogits size mismatch");
  }
  if (dw && !accumulate) {
    for (auto* t : dw->blocks()) std::fill(t->begin(), t->end(), 0.0f);
  }

  // dense
  std::vector<float> dflat(d.flat, 0.0f);
  {
    const float* wd = w.dense_w.data.data();
    for (std::uint32_t o = 0; o < spec.classes; ++o) {
      const float g = dlogits[o];
      if (dw) {
        dw->dense_b.data[o] += g;
        float* row = dw->dense_w.data.data() + static_cast<std::size_t>(o) * d.flat;
        for (std::uint32_t i = 0; i < d.flat; ++i) row[i] += g * cache.pool2.data[i];
      }
      const float* row = wd + static_cast<std::size_t>(o) * d.flat;
      for (std::uint32_t i = 0; i < d.flat; ++i) dflat[i] += g * row[i];
    }
  }

  // pool2 -> relu2 -> conv2
  std::vector<float> da2(static_cast<std::size_t>(f) * d.c2_h * d.c2_w, 0.0f);
  for (std::size_t i = 0; i < dflat.size(); ++i) {
    da2[cache.pool2_idx[i]] += dflat[i];
  }
  for (std::size_t i = 0; i < da2.size(); ++i) {
    if (cache.conv2_pre.data[i] <= 0.0f) da2[i] = 0.0f;
  }
  std::vector<float> dp1(static_cast<std::size_t>(f) * d.p1_h * d.p1_w, 0.0f);
  conv_backward(cache.pool1.data.data(), f, d.p1_h, d.p1_w, w.conv2_w.data.data(),
                f, k, da2.data(), dw ? dw->conv2_w.data.data() : nullptr,
                dw ? dw->conv2_b.data.data() : nullptr, dp1.data());

  // pool1 -> relu1 -> conv1
  std::vector<float> da1(static_cast<std::size_t>(f) * d.c1_h * d.c1_w, 0.0f);
  for (std::size_t i = 0; i < dp1.size(); ++i) {
    da1[cache.pool1_idx[i]] += dp1[i];
  }
  for (std::size_t i = 0; i < da1.size(); ++i) {
    if (cache.conv1_pre.data[i] <= 0.0f) da1[i] = 0.0f;
  }
  float* din = nullptr;
  if (dinput) {
    *dinput = Tensor(cache.input.shape);
    din = dinput->data.data();
  }
  conv_backward(cache.input.data.data(), spec.in_c, spec.in_h, spec.in_w,
                w.conv1_w.data.data(), f, k, da1.data(),
                dw ? dw->conv1_w.data.data() : nullptr,
                dw ? dw->conv1_b.data.data() : nullptr, din);
}

Tensor grad_input(const TargetNetSpec& spec, const TargetWeights& w,
                  const Tensor& x, std::uint32_t y) {
  ActivationCache cache;
  const Tensor logits = target_forward(spec, w, x, &cache);
  if (y >= spec.classes) throw BadLabel("grad_input: label out of range");
  const auto dlogits = cross_entropy_grad_logits(logits, y);
  Tensor dx;
  target_backward(spec, w, cache, dlogits, nullptr, &dx);
  return dx;
}

TargetWeights grad_weights(const TargetNetSpec& spec, const TargetWeights& w,
                           const Tensor& x, std::uint32_t y) {
  ActivationCache cache;
  const Tensor logits = target_forward(spec, w, x, &cache);
  if (y >= spec.classes) throw BadLabel("grad_weights: label out of range");
  const auto dlogits = cross_entropy_grad_logits(logits, y);
  TargetWeights dw = TargetWeights::zeros(spec);
  target_backward(spec, w, cache, dlogits, &dw, nullptr);
  return dw;
}

std::uint32_t argmax(const Tensor& logits) {
  std::uint32_t best = 0;
  for (std::uint32_t i = 1; i < logits.numel(); ++i) {
    if (logits.data[i] > logits.data[best]) best = i;
  }
  return best;
}

}  // namespace sardino
