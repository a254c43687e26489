#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "sardino/dataset.hpp"
#include "sardino/hypernet.hpp"
#include "sardino/targetnet.hpp"

namespace sardino {

struct AttackResult {
  Tensor adversarial;        // x' = clamp(x + delta, 0, 1)
  double perturbation_norm;  // L2 of x' - x
  bool surrogate_fooled;     // surrogate majority label != y on x'
};

/// Point on the SDR/FPR defense trade-off curve at one threshold.
struct DefenseCurvePoint {
  double threshold;
  double sdr;  // flagged or still correctly classified
  double fpr;  // clean inputs flagged
};

struct RocPoint {
  double threshold;
  double tpr;  // flagged fraction of the OOD set
  double fpr;  // flagged fraction of the in-distribution set
};

/// Single-step sign-gradient attack: x' = clamp(x + eps * sign(dL/dx)).
AttackResult fgsm(const TargetNetSpec& spec, const TargetWeights& surrogate,
                  const Tensor& x, std::uint32_t y, double eps);

/// Iterative sign-gradient ascent on the mean cross-entropy over the
/// surrogate members, re-projected to the eps ball and [0,1] each step.
AttackResult surrogate_ensemble_attack(const TargetNetSpec& spec,
                                       const std::vector<TargetWeights>& surrogates,
                                       const Tensor& x, std::uint32_t y,
                                       double eps, std::uint32_t steps,
                                       double step_size);

using AttackFn = std::function<AttackResult(const Tensor& x, std::uint32_t y)>;

enum class RenewalMode {
  PerInput,  // fresh ensemble for every input (the MTD mode)
  Static,    // one fixed ensemble for the whole evaluation
};

struct DefenderConfig {
  const HyperNetParams* hypernet = nullptr;
  std::uint32_t ensemble_size = 20;
  std::vector<double> thresholds;  // T_s sweep
  RenewalMode renewal = RenewalMode::PerInput;
  std::uint64_t base_seed = 0;

  /// {0.50, 0.55, ..., 1.00}
  static std::vector<double> default_threshold_sweep();
};

/// SDR = fraction of adversarial inputs flagged or correctly
/// classified; FPR = fraction of clean inputs flagged. One point per
/// threshold. A flagged input counts as handled by the operator.
std::vector<DefenseCurvePoint> evaluate_defense(const DefenderConfig& config,
                                                const Dataset& clean,
                                                const AttackFn& attack);

/// TPR from the OOD set, FPR from the in-distribution set, per threshold.
std::vector<RocPoint> evaluate_ood(const DefenderConfig& config,
                                   const Dataset& in_distribution,
                                   const Dataset& ood);

/// ROC of the max-softmax single-DNN baseline over a threshold sweep.
std::vector<RocPoint> evaluate_ood_softmax_baseline(
    const TargetNetSpec& spec, const TargetWeights& w,
    const Dataset& in_distribution, const Dataset& ood,
    const std::vector<double>& thresholds);

/// Trapezoid area under (FPR, TPR) points, anchored at (0,0) and (1,1).
double roc_auc(const std::vector<RocPoint>& points);

void write_defense_csv(const std::vector<DefenseCurvePoint>& points,
                       const std::string& path);
void write_roc_csv(const std::vector<RocPoint>& points, const std::string& path);

}  // namespace sardino
