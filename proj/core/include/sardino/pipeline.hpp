#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sardino/attacks.hpp"
#include "sardino/dataset.hpp"
#include "sardino/ensemble.hpp"
#include "sardino/hypernet.hpp"
#include "sardino/planner.hpp"
#include "sardino/rng.hpp"

namespace sardino {

enum class CropTag { Clean, Adversarial, Ood };

/// One simulated camera frame after the detector stub ran.
struct FrameEvent {
  std::uint64_t frame_id = 0;
  double arrival_ms = 0.0;
  double detector_ms = 0.0;  // t_d
  struct Crop {
    Tensor image;
    std::uint32_t label;  // ground truth for scoring
    CropTag tag;
  };
  std::vector<Crop> crops;  // k == crops.size()
};

/// Synthetic stand-in for the shared-GPU background computation. The
/// engine holds a dedicated slice until background load crosses
/// load_contention, at which point preemption adds a fixed penalty;
/// per-inference cost grows slightly superlinearly in N (batching
/// pressure). Telemetry is a deterministic function of the load level:
/// utilization saturates at 100% well before the contention point, so
/// the power draw (which steps up under contention) is the only signal
/// that separates contended from uncontended load. Jitter terms default
/// to zero; coefficients are tuning constants of the simulator.
struct BackgroundLoadModel {
  // latency law: slope*N + quad*N^2 + intercept
  //              + step_add*step(L > load_contention) + noise
  double slope_base = 0.22;
  double quad = 0.002;
  double intercept_base = 2.0;
  double step_add_ms = 8.0;
  double noise_sigma = 0.5;      // ms
  double load_contention = 0.7;  // L_c

  // telemetry laws: util = clip(util_base + util_load*L, 0, 100),
  // power = power_base + power_load*L + power_step*step
  double util_base = 20.0, util_load = 145.0, util_jitter = 0.0;
  double power_base_mw = 4000.0, power_load_mw = 6000.0;
  double power_step_mw = 3000.0, power_jitter_mw = 0.0;

  double mean_latency(std::uint32_t n, double load) const;
};

TelemetrySnapshot simulate_telemetry(const BackgroundLoadModel& model,
                                     double load, Rng& rng);

/// Draw from the latency law, floored at 0.1 ms.
double simulated_latency(const BackgroundLoadModel& model, std::uint32_t n,
                         double load, Rng& rng);

struct ProfileGrid {
  std::vector<std::uint32_t> n_values;  // default 10..100 step 10
  std::vector<double> load_values;      // default 10 levels in [0, 1]
  std::uint32_t repeats = 5;

  static ProfileGrid defaults();
};

/// One LatencySample per (N, L, repeat) — the predictor's training data.
std::vector<LatencySample> collect_profile(const BackgroundLoadModel& model,
                                           const ProfileGrid& grid, Rng& rng);

struct StreamConfig {
  std::size_t frames = 1000;
  double frame_rate_fps = 25.0;
  double clean_ratio = 1.0, adv_ratio = 0.0, ood_ratio = 0.0;
  std::uint32_t k_min = 1, k_max = 1;  // detected-crop count law
  double detector_ms = 15.0;           // constant t_d law
  std::uint64_t seed = 7;
};

/// Deterministic frame stream; each crop carries its ground truth tag.
std::vector<FrameEvent> inject_stream(const Dataset& clean, const Dataset& ood,
                                      const AttackFn& attack,
                                      const StreamConfig& config);

struct FrameRecord {
  std::uint64_t frame_id;
  double detector_ms;
  std::uint32_t k;
  double deadline_ms;  // per-crop; 0 when no budget
  std::uint32_t planned_n;
  double latency_ms;  // total frame processing time
  bool met_deadline;  // within the frame period
  std::uint32_t n_flagged;
};

struct RunMetrics {
  std::vector<FrameRecord> frames;
  double mean_latency_ms = 0.0;
  double max_latency_ms = 0.0;
  double deadline_hit_rate = 0.0;
  double mean_planned_n = 0.0;
};

struct PipelineConfig {
  double frame_rate_fps = 25.0;
  std::uint32_t n_min = 3, n_max = 100;
  double consistency_threshold = 0.6;
  std::uint64_t seed = 11;
  // background load random walk
  double load_init = 0.3;
  double load_walk_step = 0.04;
};

/// Plan -> generate -> execute -> decide for every frame of the
/// stream. Latencies are injected from the load model so runs are
/// hardware independent; classification itself is real.
RunMetrics run_pipeline(const PipelineConfig& config,
                        const std::vector<FrameEvent>& stream,
                        const BackgroundLoadModel& model,
                        const LatencyPredictor& predictor,
                        const HyperNetParams& hypernet,
                        SeedLog* seed_log = nullptr,
                        OperatorQueue* flag_queue = nullptr);

void write_metrics_csv(const RunMetrics& metrics, const std::string& path);

/// Non-CI host mode: real wall-clock generation/execution and host CPU
/// utilization sampled from /proc/stat at 100 Hz by a background thread.
class HostTelemetrySampler {
 public:
  HostTelemetrySampler();
  ~HostTelemetrySampler();
  HostTelemetrySampler(const HostTelemetrySampler&) = delete;
  HostTelemetrySampler& operator=(const HostTelemetrySampler&) = delete;

  /// Latest 10 utilization samples, most recent first. Power is zero
  /// (no host power source); pair with include_power=false features.
  TelemetrySnapshot snapshot() const;

 private:
  struct Impl;
  Impl* impl_;
};

}  // namespace sardino
