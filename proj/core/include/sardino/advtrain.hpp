#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sardino/dataset.hpp"
#include "sardino/hypernet.hpp"
#include "sardino/mlp.hpp"

namespace sardino {

/// Attack network f_A: Gaussian noise in, bounded perturbation out.
struct AttackNetParams {
  MlpSpec spec;
  MlpParams params;
  std::uint32_t noise_width = 64;
  float eps_clip = 0.3f;  // output squashed into [-eps_clip, eps_clip]
  std::vector<std::uint32_t> image_shape;

  static AttackNetParams init(const TargetNetSpec& target, float eps_clip,
                              std::uint64_t seed);
};

struct TrainConfig {
  std::uint32_t batch_size = 32;
  std::uint32_t zh_batch = 4;
  double lr_hypernet = 1e-3;
  double lr_attacker = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  // 300 steps reaches ~99% validation accuracy while the generator
  // still emits functionally distinct members; training much longer
  // collapses the ensemble toward a single shared function even though
  // the parameter-space variance keeps growing.
  std::uint32_t steps = 300;
  float eps_clip = 0.3f;
  std::uint32_t attacker_steps = 1;  // attacker steps per hypernet step
  double adv_fraction = 0.5;         // share of the batch fed x' instead of x
  double j2_weight = 1.0;
  // Per-step multiplicative shrink of every hypernet parameter. Keeps
  // the generator's variance-only directions from growing without
  // bound once exp(-Var) has saturated, so the diversity pressure
  // stays active throughout training.
  double weight_decay = 0.0;
  double adam_eps = 1e-8;
  bool enable_attacker = true;
  bool enable_j2 = true;
  std::uint32_t val_every = 100;
  std::uint32_t val_subset = 500;
  std::uint64_t seed = 1;

  void validate() const;
};

struct TrainLogRow {
  std::uint32_t step;
  double j1, j2, j3;
  double val_acc;  // -1 when not evaluated at this step
};

struct TrainResult {
  HyperNetParams hypernet;
  AttackNetParams attacker;
  std::vector<TrainLogRow> log;
};

/// Raised when a loss goes non-finite; carries the last good checkpoint.
struct TrainingDiverged : std::runtime_error {
  TrainingDiverged(const std::string& what, HyperNetParams checkpoint)
      : std::runtime_error(what), last_good(std::move(checkpoint)) {}
  HyperNetParams last_good;
};

/// Mean cross-entropy over all (x, y, z_H) pairs.
double loss_classification(const HyperNetParams& hn,
                           const std::vector<const Tensor*>& xs,
                           const std::vector<std::uint32_t>& ys,
                           const std::vector<Tensor>& z_batch);

/// J2 = exp(-Var), Var = mean over parameters of the per-parameter
/// population variance across the z_H batch.
double loss_diversity(const HyperNetParams& hn,
                      const std::vector<Tensor>& z_batch);

/// Margin-plus-norm objective the attacker minimizes.
double loss_adversarial(const Tensor& logits, std::uint32_t y,
                        const Tensor& delta);

/// Perturbation for one noise draw; values lie in [-eps_clip, eps_clip].
Tensor attack_forward(const AttackNetParams& atk, const Tensor& z_a);

/// Loss J1 + j2_weight * J2 for one batch, plus its gradient w.r.t.
/// every hypernet parameter (flattened buffers in param_buffers()
/// order). Exposes the full encoder -> generator -> classifier chain
/// for gradient checking.
double hypernet_loss_and_grad(const HyperNetParams& hn,
                              const std::vector<const Tensor*>& xs,
                              const std::vector<std::uint32_t>& ys,
                              const std::vector<Tensor>& z_batch,
                              double j2_weight,
                              std::vector<std::vector<float>>& grads);

/// Joint adversarial training per the composite-loss game: the
/// HyperNet minimizes E[J1] + E[J2], the attacker minimizes J3.
TrainResult train(const TrainConfig& config, const Dataset& train_set,
                  const Dataset& val_set);

void write_train_log_csv(const std::vector<TrainLogRow>& log,
                         const std::string& path);

}  // namespace sardino
