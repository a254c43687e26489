#include "sardino/advtrain.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "sardino/adam.hpp"
#include "sardino/errors.hpp"
#include "sardino/rng.hpp"

namespace sardino {

namespace {

/// Forward caches for one z_H draw through the whole hypernet.
struct HyperCache {
  MlpCache encoder;
  std::vector<MlpCache> generators;
  TargetWeights theta;
};

TargetWeights generate_with_cache(const HyperNetParams& hn, const Tensor& z,
                                  HyperCache& cache) {
  const Tensor enc_out = mlp_forward(hn.encoder_spec, hn.encoder, z, &cache.encoder);
  cache.generators.resize(TargetNetSpec::layer_count);
  TargetWeights w = TargetWeights::zeros(hn.target);
  auto blocks = w.blocks();
  for (std::uint32_t i = 0; i < TargetNetSpec::layer_count; ++i) {
    Tensor code({kLatentCodeWidth});
    std::memcpy(code.data.data(), enc_out.data.data() + i * kLatentCodeWidth,
                kLatentCodeWidth * sizeof(float));
    const Tensor flat = mlp_forward(hn.generator_specs[i], hn.generators[i], code,
                                    &cache.generators[i]);
    Tensor& wt = *blocks[2 * i];
    Tensor& bias = *blocks[2 * i + 1];
    std::memcpy(wt.data.data(), flat.data.data(), wt.numel() * sizeof(float));
    std::memcpy(bias.data.data(), flat.data.data() + wt.numel(),
                bias.numel() * sizeof(float));
  }
  return w;
}

/// Gradient buffers matching HyperNetParams::param_buffers() order.
struct HyperGrads {
  MlpGrads encoder;
  std::vector<MlpGrads> generators;

  explicit HyperGrads(const HyperNetParams& hn)
      : encoder(make_mlp_grads(hn.encoder_spec)) {
    for (const auto& gs : hn.generator_specs) {
      generators.push_back(make_mlp_grads(gs));
    }
  }

  void zero() {
    auto clear = [](MlpGrads& g) {
      for (auto& w : g.params.weights) std::fill(w.begin(), w.end(), 0.0f);
      for (auto& b : g.params.biases) std::fill(b.begin(), b.end(), 0.0f);
    };
    clear(encoder);
    for (auto& g : generators) clear(g);
  }

  std::vector<const std::vector<float>*> buffers() const {
    std::vector<const std::vector<float>*> out;
    for (std::size_t l = 0; l < encoder.params.weights.size(); ++l) {
      out.push_back(&encoder.params.weights[l].data);
      out.push_back(&encoder.params.biases[l].data);
    }
    for (const auto& g : generators) {
      for (std::size_t l = 0; l < g.params.weights.size(); ++l) {
        out.push_back(&g.params.weights[l].data);
        out.push_back(&g.params.biases[l].data);
      }
    }
    return out;
  }
};

/// Chain a d(theta) gradient back through generators and encoder.
void backprop_theta(const HyperNetParams& hn, const HyperCache& cache,
                    const TargetWeights& dtheta, HyperGrads& grads) {
  std::vector<float> denc_out(kLatentCodeWidth * TargetNetSpec::layer_count, 0.0f);
  auto dblocks = dtheta.blocks();
  for (std::uint32_t i = 0; i < TargetNetSpec::layer_count; ++i) {
    const Tensor& dwt = *dblocks[2 * i];
    const Tensor& dbias = *dblocks[2 * i + 1];
    std::vector<float> dflat(dwt.numel() + dbias.numel());
    std::memcpy(dflat.data(), dwt.data.data(), dwt.numel() * sizeof(float));
    std::memcpy(dflat.data() + dwt.numel(), dbias.data.data(),
                dbias.numel() * sizeof(float));
    mlp_backward(hn.generator_specs[i], hn.generators[i], cache.generators[i],
                 dflat, grads.generators[i], /*accumulate=*/true);
    for (std::uint32_t c = 0; c < kLatentCodeWidth; ++c) {
      denc_out[i * kLatentCodeWidth + c] += grads.generators[i].input.data[c];
    }
  }
  mlp_backward(hn.encoder_spec, hn.encoder, cache.encoder, denc_out, grads.encoder,
               /*accumulate=*/true);
}

double accuracy_of(const TargetNetSpec& spec, const TargetWeights& w,
                   const Dataset& ds, std::size_t limit) {
  const std::size_t n = std::min(limit, ds.size());
  if (n == 0) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (argmax(target_forward(spec, w, ds.images[i])) == ds.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(n);
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size == 0 || zh_batch == 0 || steps == 0) {
    throw BadArgument("TrainConfig: batch sizes and steps must be positive");
  }
  if (zh_batch < 2 && enable_j2) {
    throw BadArgument("TrainConfig: J2 needs a z_H batch of >= 2");
  }
  if (lr_hypernet <= 0 || lr_attacker <= 0) {
    throw BadArgument("TrainConfig: learning rates must be positive");
  }
  if (!(eps_clip > 0.0f && eps_clip <= 1.0f)) {
    throw BadArgument("TrainConfig: eps_clip must be in (0, 1]");
  }
  if (adv_fraction < 0.0 || adv_fraction > 1.0) {
    throw BadArgument("TrainConfig: adv_fraction must be in [0, 1]");
  }
  if (weight_decay < 0.0 || weight_decay >= 0.1) {
    throw BadArgument("TrainConfig: weight_decay must be in [0, 0.1)");
  }
  if (adam_eps <= 0.0) {
    throw BadArgument("TrainConfig: adam_eps must be positive");
  }
}

AttackNetParams AttackNetParams::init(const TargetNetSpec& target, float eps_clip,
                                      std::uint64_t seed) {
  AttackNetParams atk;
  atk.eps_clip = eps_clip;
  atk.image_shape = {target.in_c, target.in_h, target.in_w};
  const auto pixels = static_cast<std::uint32_t>(
      static_cast<std::size_t>(target.in_c) * target.in_h * target.in_w);
  atk.spec.widths = {atk.noise_width, 128, pixels};
  Rng rng(seed);
  atk.params = MlpParams::init(atk.spec, rng, 0.1f);
  return atk;
}

Tensor attack_forward(const AttackNetParams& atk, const Tensor& z_a) {
  if (z_a.numel() != atk.noise_width) {
    throw SpecMismatch("attack_forward: noise width mismatch");
  }
  Tensor raw = mlp_forward(atk.spec, atk.params, z_a);
  Tensor delta(atk.image_shape);
  for (std::size_t i = 0; i < raw.numel(); ++i) {
    delta.data[i] = atk.eps_clip * std::tanh(raw.data[i]);
  }
  return delta;
}

double loss_adversarial(const Tensor& logits, std::uint32_t y,
                        const Tensor& delta) {
  if (logits.numel() < 2) throw BadArgument("loss_adversarial: need >= 2 classes");
  double runner_up = -std::numeric_limits<double>::infinity();
  for (std::uint32_t i = 0; i < logits.numel(); ++i) {
    if (i != y) runner_up = std::max(runner_up, static_cast<double>(logits.data[i]));
  }
  double norm_sq = 0.0;
  for (float v : delta.data) norm_sq += static_cast<double>(v) * v;
  return static_cast<double>(logits.data[y]) - runner_up + std::sqrt(norm_sq);
}

double loss_classification(const HyperNetParams& hn,
                           const std::vector<const Tensor*>& xs,
                           const std::vector<std::uint32_t>& ys,
                           const std::vector<Tensor>& z_batch) {
  if (xs.empty() || z_batch.empty()) {
    throw BadArgument("loss_classification: empty batch");
  }
  if (xs.size() != ys.size()) {
    throw BadArgument("loss_classification: image/label count mismatch");
  }
  double sum = 0.0;
  for (const auto& z : z_batch) {
    const TargetWeights w = generate_weights(hn, z);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      sum += cross_entropy(target_forward(hn.target, w, *xs[i]), ys[i]);
    }
  }
  return sum / (static_cast<double>(xs.size()) * static_cast<double>(z_batch.size()));
}

double loss_diversity(const HyperNetParams& hn,
                      const std::vector<Tensor>& z_batch) {
  if (z_batch.size() < 2) {
    throw BadArgument("loss_diversity: z_H batch must have >= 2 members");
  }
  const std::size_t param_count = hn.target.total_param_count();
  std::vector<double> mean(param_count, 0.0);
  std::vector<std::vector<float>> flats;
  flats.reserve(z_batch.size());
  for (const auto& z : z_batch) {
    const TargetWeights w = generate_weights(hn, z);
    std::vector<float> flat;
    flat.reserve(param_count);
    for (const auto* b : w.blocks()) {
      flat.insert(flat.end(), b->data.begin(), b->data.end());
    }
    for (std::size_t p = 0; p < param_count; ++p) mean[p] += flat[p];
    flats.push_back(std::move(flat));
  }
  for (auto& m : mean) m /= static_cast<double>(z_batch.size());
  double var_sum = 0.0;
  for (const auto& flat : flats) {
    for (std::size_t p = 0; p < param_count; ++p) {
      const double d = flat[p] - mean[p];
      var_sum += d * d;
    }
  }
  const double var = var_sum / (static_cast<double>(z_batch.size()) *
                                static_cast<double>(param_count));
  return std::exp(-var);
}

double hypernet_loss_and_grad(const HyperNetParams& hn,
                              const std::vector<const Tensor*>& xs,
                              const std::vector<std::uint32_t>& ys,
                              const std::vector<Tensor>& z_batch,
                              double j2_weight,
                              std::vector<std::vector<float>>& grads) {
  if (xs.empty() || xs.size() != ys.size() || z_batch.empty()) {
    throw BadArgument("hypernet_loss_and_grad: empty or mismatched batch");
  }
  const std::size_t bz = z_batch.size();
  const std::size_t param_count = hn.target.total_param_count();

  HyperGrads hyper_grads(hn);
  hyper_grads.zero();

  std::vector<HyperCache> caches(bz);
  std::vector<TargetWeights> thetas;
  thetas.reserve(bz);
  for (std::size_t zi = 0; zi < bz; ++zi) {
    thetas.push_back(generate_with_cache(hn, z_batch[zi], caches[zi]));
  }

  std::vector<double> mean_theta(param_count, 0.0);
  for (const auto& th : thetas) {
    std::size_t p = 0;
    for (const auto* b : th.blocks()) {
      for (float v : b->data) mean_theta[p++] += v;
    }
  }
  for (auto& m : mean_theta) m /= static_cast<double>(bz);
  double var_sum = 0.0;
  for (const auto& th : thetas) {
    std::size_t p = 0;
    for (const auto* b : th.blocks()) {
      for (float v : b->data) {
        const double d = v - mean_theta[p++];
        var_sum += d * d;
      }
    }
  }
  const double var = var_sum / (static_cast<double>(bz) * param_count);
  const double j2_val = std::exp(-var);

  double j1_sum = 0.0;
  const double pair_scale = 1.0 / (static_cast<double>(xs.size()) * bz);
  TargetWeights dtheta = TargetWeights::zeros(hn.target);
  for (std::size_t zi = 0; zi < bz; ++zi) {
    for (auto* b : dtheta.blocks()) std::fill(b->begin(), b->end(), 0.0f);
    for (std::size_t bi = 0; bi < xs.size(); ++bi) {
      ActivationCache tcache;
      const Tensor logits = target_forward(hn.target, thetas[zi], *xs[bi], &tcache);
      j1_sum += cross_entropy(logits, ys[bi]);
      auto dlogits = cross_entropy_grad_logits(logits, ys[bi]);
      for (auto& v : dlogits) v = static_cast<float>(v * pair_scale);
      target_backward(hn.target, thetas[zi], tcache, dlogits, &dtheta, nullptr,
                      /*accumulate=*/true);
    }
    const double coeff =
        j2_weight * (-j2_val) * 2.0 / (static_cast<double>(bz) * param_count);
    std::size_t p = 0;
    auto src = thetas[zi].blocks();
    auto dst = dtheta.blocks();
    for (std::size_t b = 0; b < src.size(); ++b) {
      for (std::size_t i = 0; i < src[b]->numel(); ++i, ++p) {
        dst[b]->data[i] +=
            static_cast<float>(coeff * (src[b]->data[i] - mean_theta[p]));
      }
    }
    backprop_theta(hn, caches[zi], dtheta, hyper_grads);
  }

  grads.clear();
  for (const auto* buf : hyper_grads.buffers()) grads.push_back(*buf);
  return j1_sum * pair_scale + j2_weight * j2_val;
}

TrainResult train(const TrainConfig& config, const Dataset& train_set,
                  const Dataset& val_set) {
  config.validate();
  if (train_set.size() == 0) throw BadArgument("train: empty training set");

  TargetNetSpec target;  // production geometry, class count from data
  target.classes = train_set.classes;

  TrainResult result;
  result.hypernet = HyperNetParams::init(target, mix64(config.seed));
  result.attacker = AttackNetParams::init(target, config.eps_clip,
                                          mix64(config.seed ^ 0x5EEDF00DULL));
  HyperNetParams& hn = result.hypernet;
  AttackNetParams& atk = result.attacker;

  AdamOptimizer hyper_opt(
      {config.lr_hypernet, config.beta1, config.beta2, config.adam_eps},
      hn.param_buffers());
  std::vector<std::vector<float>*> atk_buffers;
  for (std::size_t l = 0; l < atk.params.weights.size(); ++l) {
    atk_buffers.push_back(&atk.params.weights[l].data);
    atk_buffers.push_back(&atk.params.biases[l].data);
  }
  AdamOptimizer atk_opt({config.lr_attacker, config.beta1, config.beta2},
                        atk_buffers);

  Rng rng(mix64(config.seed ^ 0x7261696EULL));
  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::size_t cursor = order.size();  // trigger shuffle on first use

  HyperGrads hyper_grads(hn);
  MlpGrads atk_grads = make_mlp_grads(atk.spec);
  const Tensor val_z = sample_latent_input(mix64(config.seed ^ 0x76616CULL));
  HyperNetParams last_good = hn;
  double last_j3 = 0.0;

  const std::uint32_t n_adv = static_cast<std::uint32_t>(
      std::lround(config.adv_fraction * config.batch_size));
  const std::uint32_t attack_minibatch = 8;

  for (std::uint32_t step = 0; step < config.steps; ++step) {
    // ----- assemble batch -----
    std::vector<std::size_t> batch(config.batch_size);
    for (auto& b : batch) {
      if (cursor == order.size()) {
        for (std::size_t i = order.size(); i-- > 1;) {
          std::swap(order[i], order[rng.next_below(i + 1)]);
        }
        cursor = 0;
      }
      b = order[cursor++];
    }
    std::vector<Tensor> z_batch;
    for (std::uint32_t i = 0; i < config.zh_batch; ++i) {
      z_batch.push_back(sample_latent_input(rng.next_u64()));
    }

    // ----- attacker step(s) -----
    std::vector<Tensor> adv_images;  // x' for the hypernet's J1 mix
    if (config.enable_attacker) {
      HyperCache cache;
      const TargetWeights theta = generate_with_cache(hn, z_batch[0], cache);
      for (std::uint32_t rep = 0; rep < config.attacker_steps; ++rep) {
        for (auto& w : atk_grads.params.weights) std::fill(w.begin(), w.end(), 0.0f);
        for (auto& b : atk_grads.params.biases) std::fill(b.begin(), b.end(), 0.0f);
        double j3_sum = 0.0;
        for (std::uint32_t s = 0; s < attack_minibatch; ++s) {
          const std::size_t idx = batch[s % batch.size()];
          const Tensor& x = train_set.images[idx];
          const std::uint32_t y = train_set.labels[idx];
          Tensor z_a({atk.noise_width});
          for (auto& v : z_a.data) v = static_cast<float>(rng.next_gaussian());
          MlpCache atk_cache;
          Tensor raw = mlp_forward(atk.spec, atk.params, z_a, &atk_cache);
          Tensor delta(atk.image_shape);
          for (std::size_t i = 0; i < raw.numel(); ++i) {
            delta.data[i] = atk.eps_clip * std::tanh(raw.data[i]);
          }
          Tensor x_adv = x;
          for (std::size_t i = 0; i < x_adv.numel(); ++i) {
            x_adv.data[i] = std::clamp(x.data[i] + delta.data[i], 0.0f, 1.0f);
          }
          ActivationCache tcache;
          const Tensor logits = target_forward(hn.target, theta, x_adv, &tcache);
          j3_sum += loss_adversarial(logits, y, delta);

          // d J3 / d logits: +1 at true class, -1 at best other class
          std::vector<float> dlogits(hn.target.classes, 0.0f);
          std::uint32_t runner = y == 0 ? 1 : 0;
          for (std::uint32_t c = 0; c < hn.target.classes; ++c) {
            if (c != y && logits.data[c] > logits.data[runner]) runner = c;
          }
          dlogits[y] += 1.0f;
          dlogits[runner] -= 1.0f;
          Tensor dx;
          target_backward(hn.target, theta, tcache, dlogits, nullptr, &dx);

          double norm = 0.0;
          for (float v : delta.data) norm += static_cast<double>(v) * v;
          norm = std::sqrt(std::max(norm, 1e-12));
          std::vector<float> draw(raw.numel());
          for (std::size_t i = 0; i < raw.numel(); ++i) {
            float ddelta = static_cast<float>(delta.data[i] / norm);
            const float xi = x.data[i] + delta.data[i];
            if (xi > 0.0f && xi < 1.0f) ddelta += dx.data[i];  // clamp gate
            const float t = delta.data[i] / atk.eps_clip;  // tanh(raw)
            draw[i] = ddelta * atk.eps_clip * (1.0f - t * t) /
                      static_cast<float>(attack_minibatch);
          }
          mlp_backward(atk.spec, atk.params, atk_cache, draw, atk_grads,
                       /*accumulate=*/true);
        }
        last_j3 = j3_sum / attack_minibatch;
        std::vector<const std::vector<float>*> gbufs;
        for (std::size_t l = 0; l < atk_grads.params.weights.size(); ++l) {
          gbufs.push_back(&atk_grads.params.weights[l].data);
          gbufs.push_back(&atk_grads.params.biases[l].data);
        }
        atk_opt.step(gbufs);
      }
      // fresh perturbations for the hypernet's adversarial batch share
      for (std::uint32_t i = 0; i < n_adv; ++i) {
        Tensor z_a({atk.noise_width});
        for (auto& v : z_a.data) v = static_cast<float>(rng.next_gaussian());
        adv_images.push_back(attack_forward(atk, z_a));
      }
    }

    // ----- hypernet step -----
    hyper_grads.zero();
    std::vector<HyperCache> caches(config.zh_batch);
    std::vector<TargetWeights> thetas;
    thetas.reserve(config.zh_batch);
    for (std::uint32_t zi = 0; zi < config.zh_batch; ++zi) {
      thetas.push_back(generate_with_cache(hn, z_batch[zi], caches[zi]));
    }

    const std::size_t param_count = target.total_param_count();
    std::vector<double> mean_theta;
    double j2_val = 0.0;
    if (config.enable_j2) {
      mean_theta.assign(param_count, 0.0);
      for (const auto& th : thetas) {
        std::size_t p = 0;
        for (const auto* b : th.blocks()) {
          for (float v : b->data) mean_theta[p++] += v;
        }
      }
      for (auto& m : mean_theta) m /= config.zh_batch;
      double var_sum = 0.0;
      for (const auto& th : thetas) {
        std::size_t p = 0;
        for (const auto* b : th.blocks()) {
          for (float v : b->data) {
            const double d = v - mean_theta[p++];
            var_sum += d * d;
          }
        }
      }
      const double var =
          var_sum / (static_cast<double>(config.zh_batch) * param_count);
      j2_val = std::exp(-var);
    }

    double j1_sum = 0.0;
    const double pair_scale =
        1.0 / (static_cast<double>(config.batch_size) * config.zh_batch);
    TargetWeights dtheta = TargetWeights::zeros(target);
    for (std::uint32_t zi = 0; zi < config.zh_batch; ++zi) {
      for (auto* b : dtheta.blocks()) std::fill(b->begin(), b->end(), 0.0f);
      for (std::uint32_t bi = 0; bi < config.batch_size; ++bi) {
        const std::size_t idx = batch[bi];
        const Tensor* x = &train_set.images[idx];
        Tensor x_adv;
        if (bi < n_adv && !adv_images.empty()) {
          const Tensor& delta = adv_images[bi % adv_images.size()];
          x_adv = *x;
          for (std::size_t i = 0; i < x_adv.numel(); ++i) {
            x_adv.data[i] = std::clamp(x_adv.data[i] + delta.data[i], 0.0f, 1.0f);
          }
          x = &x_adv;
        }
        const std::uint32_t y = train_set.labels[idx];
        ActivationCache tcache;
        const Tensor logits = target_forward(target, thetas[zi], *x, &tcache);
        j1_sum += cross_entropy(logits, y);
        auto dlogits = cross_entropy_grad_logits(logits, y);
        for (auto& v : dlogits) v = static_cast<float>(v * pair_scale);
        target_backward(target, thetas[zi], tcache, dlogits, &dtheta, nullptr,
                        /*accumulate=*/true);
      }
      if (config.enable_j2) {
        // d(exp(-Var))/d theta = -J2 * 2 (theta - mean) / (B * P)
        const double coeff = config.j2_weight * (-j2_val) * 2.0 /
                             (static_cast<double>(config.zh_batch) * param_count);
        std::size_t p = 0;
        auto src = thetas[zi].blocks();
        auto dst = dtheta.blocks();
        for (std::size_t b = 0; b < src.size(); ++b) {
          for (std::size_t i = 0; i < src[b]->numel(); ++i, ++p) {
            dst[b]->data[i] +=
                static_cast<float>(coeff * (src[b]->data[i] - mean_theta[p]));
          }
        }
      }
      backprop_theta(hn, caches[zi], dtheta, hyper_grads);
    }
    hyper_opt.step(hyper_grads.buffers());
    if (config.weight_decay > 0.0) {
      const float keep = static_cast<float>(1.0 - config.weight_decay);
      for (auto* buf : hn.param_buffers()) {
        for (auto& v : *buf) v *= keep;
      }
    }

    const double j1 = j1_sum * pair_scale;
    if (!std::isfinite(j1) || !std::isfinite(j2_val) || !std::isfinite(last_j3)) {
      throw TrainingDiverged("non-finite loss at step " + std::to_string(step),
                             std::move(last_good));
    }
    if (step % 50 == 0) last_good = hn;

    double val_acc = -1.0;
    if ((step + 1) % config.val_every == 0 || step + 1 == config.steps) {
      const TargetWeights w = generate_weights(hn, val_z);
      val_acc = accuracy_of(target, w, val_set, config.val_subset);
    }
    result.log.push_back({step, j1, j2_val, last_j3, val_acc});
  }
  return result;
}

void write_train_log_csv(const std::vector<TrainLogRow>& log,
                         const std::string& path) {
  std::ofstream out(path);
  out << "step,J1,J2,J3,val_acc\n";
  for (const auto& r : log) {
    out << r.step << ',' << r.j1 << ',' << r.j2 << ',' << r.j3 << ','
        << r.val_acc << '\n';
  }
}

}  // namespace sardino
