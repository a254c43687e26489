#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace sardino {

/// 100 Hz utilization/power traces from the 100 ms before ensemble
/// generation starts. Index i is the sample taken i*10 ms before the
/// start, so [0] is the most recent.
struct TelemetrySnapshot {
  std::array<float, 10> utilization;  // percent, [0, 100]
  std::array<float, 10> power_mw;

  void validate() const;
  /// Fraction of utilization samples at or above 99%.
  double duty_cycle() const;
};

/// Training record for the latency predictor.
struct LatencySample {
  std::uint32_t ensemble_size;
  TelemetrySnapshot telemetry;
  double latency_ms;  // generation + execution
};

/// [N, U[0..9], P[0..9]] — 21 features, or 11 without power.
std::vector<double> extract_features(std::uint32_t ensemble_size,
                                     const TelemetrySnapshot& telemetry,
                                     bool include_power);

struct TreeHyperParams {
  std::uint32_t max_depth = 12;
  std::uint32_t min_samples_leaf = 2;
};

/// CART regressor: exhaustive greedy MSE splits on midpoints of sorted
/// unique feature values; leaves predict the mean training target.
struct RegressionTree {
  struct Node {
    bool leaf = true;
    std::uint32_t feature = 0;
    double threshold = 0.0;
    std::int32_t left = -1;   // node index
    std::int32_t right = -1;
    double value = 0.0;       // leaf prediction
  };
  std::vector<Node> nodes;  // [0] is the root
  TreeHyperParams hyper;
  std::uint32_t feature_count = 0;
};

RegressionTree fit_tree(const std::vector<std::vector<double>>& features,
                        const std::vector<double>& targets,
                        const TreeHyperParams& hyper);

/// Descend: go left iff feature <= threshold.
double predict_tree(const RegressionTree& tree, const std::vector<double>& features);

/// Ridge-damped least squares with intercept.
struct LinearModel {
  std::vector<double> weights;
  double intercept = 0.0;
};

LinearModel fit_linear(const std::vector<std::vector<double>>& features,
                       const std::vector<double>& targets,
                       double ridge = 1e-6);
double predict_linear(const LinearModel& model, const std::vector<double>& features);

/// Per-crop soft deadline (1000/x - t_d) / k in ms; throws NoBudget if
/// detection already consumed the frame period.
double compute_deadline(double frame_rate_fps, double detector_ms, std::uint32_t k);

struct PlanResult {
  std::uint32_t ensemble_size;
  bool feasible;
};

using LatencyPredictor =
    std::function<double(std::uint32_t n, const TelemetrySnapshot&)>;

/// Largest N in [n_min, n_max] whose predicted latency fits the
/// deadline; (n_min, false) when none does. Exhaustive scan — tree
/// predictions need not be monotone in N.
PlanResult plan_size(const LatencyPredictor& predictor,
                     const TelemetrySnapshot& telemetry, double deadline_ms,
                     std::uint32_t n_min, std::uint32_t n_max);

/// JSON round-trip for tree models (nodes, hyperparams, feature schema).
void save_tree_json(const RegressionTree& tree, const std::string& path);
RegressionTree load_tree_json(const std::string& path);

/// Profile dataset CSV: N, U0..U9, P0..P9, latency_ms.
void write_profile_csv(const std::vector<LatencySample>& samples,
                       const std::string& path);
std::vector<LatencySample> read_profile_csv(const std::string& path);

}  // namespace sardino
