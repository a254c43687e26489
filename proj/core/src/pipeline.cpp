#include "sardino/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "sardino/errors.hpp"

namespace sardino {

double BackgroundLoadModel::mean_latency(std::uint32_t n, double load) const {
  const double step = load > load_contention ? 1.0 : 0.0;
  const double dn = static_cast<double>(n);
  return slope_base * dn + quad * dn * dn + intercept_base + step_add_ms * step;
}

TelemetrySnapshot simulate_telemetry(const BackgroundLoadModel& model,
                                     double load, Rng& rng) {
  if (load < 0.0 || load > 1.0) {
    throw BadArgument("simulate_telemetry: load must be in [0, 1]");
  }
  TelemetrySnapshot t;
  const double u_mean = model.util_base + model.util_load * load;
  const double step = load > model.load_contention ? 1.0 : 0.0;
  const double p_mean =
      model.power_base_mw + model.power_load_mw * load + model.power_step_mw * step;
  for (int i = 0; i < 10; ++i) {
    const double u = u_mean + rng.next_gaussian() * model.util_jitter;
    t.utilization[i] = static_cast<float>(std::clamp(u, 0.0, 100.0));
    t.power_mw[i] =
        static_cast<float>(p_mean + rng.next_gaussian() * model.power_jitter_mw);
  }
  return t;
}

double simulated_latency(const BackgroundLoadModel& model, std::uint32_t n,
                         double load, Rng& rng) {
  if (n < 1) throw BadArgument("simulated_latency: N must be >= 1");
  const double lat =
      model.mean_latency(n, load) + rng.next_gaussian() * model.noise_sigma;
  return std::max(lat, 0.1);
}

ProfileGrid ProfileGrid::defaults() {
  ProfileGrid g;
  for (std::uint32_t n = 10; n <= 100; n += 10) g.n_values.push_back(n);
  for (int i = 0; i < 10; ++i) g.load_values.push_back(0.05 + 0.1 * i);
  g.repeats = 5;
  return g;
}

std::vector<LatencySample> collect_profile(const BackgroundLoadModel& model,
                                           const ProfileGrid& grid, Rng& rng) {
  if (grid.n_values.empty() || grid.load_values.empty() || grid.repeats == 0) {
    throw BadArgument("collect_profile: empty grid");
  }
  std::vector<LatencySample> out;
  out.reserve(grid.n_values.size() * grid.load_values.size() * grid.repeats);
  for (auto n : grid.n_values) {
    for (double load : grid.load_values) {
      for (std::uint32_t r = 0; r < grid.repeats; ++r) {
        LatencySample s;
        s.ensemble_size = n;
        s.telemetry = simulate_telemetry(model, load, rng);
        s.latency_ms = simulated_latency(model, n, load, rng);
        out.push_back(std::move(s));
      }
    }
  }
  return out;
}

std::vector<FrameEvent> inject_stream(const Dataset& clean, const Dataset& ood,
                                      const AttackFn& attack,
                                      const StreamConfig& config) {
  const double ratio_sum = config.clean_ratio + config.adv_ratio + config.ood_ratio;
  if (std::fabs(ratio_sum - 1.0) > 1e-9) {
    throw BadConfig("inject_stream: mix ratios must sum to 1");
  }
  if (clean.size() == 0) throw BadConfig("inject_stream: empty clean set");
  if (config.ood_ratio > 0.0 && ood.size() == 0) {
    throw BadConfig("inject_stream: OOD ratio > 0 but OOD set empty");
  }
  if (config.adv_ratio > 0.0 && !attack) {
    throw BadConfig("inject_stream: adversarial ratio > 0 but no attack fn");
  }
  if (config.k_min > config.k_max) throw BadConfig("inject_stream: k_min > k_max");

  Rng rng(mix64(config.seed));
  std::vector<FrameEvent> stream;
  const double period = 1000.0 / config.frame_rate_fps;
  for (std::size_t f = 0; f < config.frames; ++f) {
    FrameEvent ev;
    ev.frame_id = f;
    ev.arrival_ms = period * static_cast<double>(f);
    ev.detector_ms = config.detector_ms;
    const std::uint32_t k =
        config.k_min +
        static_cast<std::uint32_t>(rng.next_below(config.k_max - config.k_min + 1));
    for (std::uint32_t c = 0; c < k; ++c) {
      const double roll = rng.next_uniform();
      FrameEvent::Crop crop;
      if (roll < config.clean_ratio) {
        const std::size_t i = rng.next_below(clean.size());
        crop.image = clean.images[i];
        crop.label = clean.labels[i];
        crop.tag = CropTag::Clean;
      } else if (roll < config.clean_ratio + config.adv_ratio) {
        const std::size_t i = rng.next_below(clean.size());
        crop.image = attack(clean.images[i], clean.labels[i]).adversarial;
        crop.label = clean.labels[i];
        crop.tag = CropTag::Adversarial;
      } else {
        const std::size_t i = rng.next_below(ood.size());
        crop.image = ood.images[i];
        crop.label = ood.labels[i];
        crop.tag = CropTag::Ood;
      }
      ev.crops.push_back(std::move(crop));
    }
    stream.push_back(std::move(ev));
  }
  return stream;
}

RunMetrics run_pipeline(const PipelineConfig& config,
                        const std::vector<FrameEvent>& stream,
                        const BackgroundLoadModel& model,
                        const LatencyPredictor& predictor,
                        const HyperNetParams& hypernet,
                        SeedLog* seed_log, OperatorQueue* flag_queue) {
  if (config.frame_rate_fps <= 0.0) throw BadConfig("run_pipeline: bad frame rate");
  if (config.n_min < 1 || config.n_min > config.n_max) {
    throw BadConfig("run_pipeline: bad ensemble size bounds");
  }
  if (config.consistency_threshold < 0.5 || config.consistency_threshold > 1.0) {
    throw BadConfig("run_pipeline: consistency threshold outside [0.5, 1.0]");
  }
  const TargetNetSpec& spec = hypernet.target;
  const double period = 1000.0 / config.frame_rate_fps;

  Rng rng(mix64(config.seed));
  double load = config.load_init;

  RunMetrics metrics;
  double planned_sum = 0.0;
  std::size_t hits = 0;
  for (const auto& frame : stream) {
    // background load drifts as a bounded random walk
    load = std::clamp(
        load + (rng.next_uniform() - 0.5) * 2.0 * config.load_walk_step, 0.0, 1.0);

    FrameRecord rec{};
    rec.frame_id = frame.frame_id;
    rec.detector_ms = frame.detector_ms;
    rec.k = static_cast<std::uint32_t>(frame.crops.size());

    if (frame.crops.empty()) {
      rec.latency_ms = frame.detector_ms;
      rec.met_deadline = rec.latency_ms <= period;
    } else {
      const TelemetrySnapshot telemetry = simulate_telemetry(model, load, rng);
      double total = frame.detector_ms;
      try {
        rec.deadline_ms = compute_deadline(config.frame_rate_fps,
                                           frame.detector_ms, rec.k);
        const PlanResult plan =
            plan_size(predictor, telemetry, rec.deadline_ms, config.n_min,
                      config.n_max);
        rec.planned_n = plan.ensemble_size;
        for (std::uint32_t c = 0; c < rec.k; ++c) {
          const std::uint64_t base_seed =
              split_seed(config.seed, frame.frame_id * 64 + c);
          const auto members = generate_ensemble(
              hypernet, base_seed, plan.ensemble_size, frame.frame_id, seed_log);
          const auto labels =
              ensemble_classify(spec, members, frame.crops[c].image);
          const auto verdict =
              decide(labels, spec.classes, config.consistency_threshold);
          if (!verdict.accepted()) {
            ++rec.n_flagged;
            if (flag_queue) {
              flag_queue->push(frame.frame_id, c, verdict, frame.crops[c].image);
            }
          }
          // plan and decide carry zero simulated cost; generation and
          // execution are one draw from the latency law
          total += simulated_latency(model, plan.ensemble_size, load, rng);
        }
      } catch (const NoBudget&) {
        rec.deadline_ms = 0.0;
        rec.planned_n = 0;
      }
      rec.latency_ms = total;
      rec.met_deadline = rec.planned_n > 0 && rec.latency_ms <= period;
    }
    planned_sum += rec.planned_n;
    if (rec.met_deadline) ++hits;
    metrics.mean_latency_ms += rec.latency_ms;
    metrics.max_latency_ms = std::max(metrics.max_latency_ms, rec.latency_ms);
    metrics.frames.push_back(rec);
  }
  const auto n = static_cast<double>(metrics.frames.size());
  if (n > 0) {
    metrics.mean_latency_ms /= n;
    metrics.deadline_hit_rate = static_cast<double>(hits) / n;
    metrics.mean_planned_n = planned_sum / n;
  }
  return metrics;
}

void write_metrics_csv(const RunMetrics& metrics, const std::string& path) {
  std::ofstream out(path);
  out << "frame,t_d_ms,k,deadline_ms,planned_N,latency_ms,met_deadline,n_flagged\n";
  for (const auto& r : metrics.frames) {
    out << r.frame_id << ',' << r.detector_ms << ',' << r.k << ','
        << r.deadline_ms << ',' << r.planned_n << ',' << r.latency_ms << ','
        << (r.met_deadline ? 1 : 0) << ',' << r.n_flagged << '\n';
  }
}

struct HostTelemetrySampler::Impl {
  std::thread worker;
  std::atomic<bool> stop{false};
  mutable std::mutex mu;
  std::array<float, 10> ring{};  // most recent first after snapshot()
  std::size_t head = 0;

  static bool read_proc_stat(std::uint64_t& busy, std::uint64_t& total) {
    std::ifstream in("/proc/stat");
    std::string cpu;
    if (!(in >> cpu) || cpu != "cpu") return false;
    std::uint64_t v, idle = 0, sum = 0;
    int field = 0;
    while (in >> v) {
      sum += v;
      if (field == 3 || field == 4) idle += v;  // idle + iowait
      ++field;
      if (field >= 10) break;
    }
    busy = sum - idle;
    total = sum;
    return field >= 4;
  }

  void run() {
    std::uint64_t prev_busy = 0, prev_total = 0;
    read_proc_stat(prev_busy, prev_total);
    while (!stop.load()) {
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
      std::uint64_t busy = 0, total = 0;
      if (!read_proc_stat(busy, total)) continue;
      const std::uint64_t db = busy - prev_busy, dt = total - prev_total;
      prev_busy = busy;
      prev_total = total;
      const float util = dt > 0 ? 100.0f * static_cast<float>(db) / dt : 0.0f;
      std::lock_guard<std::mutex> lock(mu);
      ring[head] = std::clamp(util, 0.0f, 100.0f);
      head = (head + 1) % ring.size();
    }
  }
};

HostTelemetrySampler::HostTelemetrySampler() : impl_(new Impl) {
  impl_->worker = std::thread([this] { impl_->run(); });
}

HostTelemetrySampler::~HostTelemetrySampler() {
  impl_->stop.store(true);
  impl_->worker.join();
  delete impl_;
}

TelemetrySnapshot HostTelemetrySampler::snapshot() const {
  TelemetrySnapshot t;
  t.power_mw.fill(0.0f);
  std::lock_guard<std::mutex> lock(impl_->mu);
  for (std::size_t i = 0; i < 10; ++i) {
    // i samples back from the most recent write
    const std::size_t pos = (impl_->head + 10 - 1 - i) % 10;
    t.utilization[i] = impl_->ring[pos];
  }
  return t;
}

}  // namespace sardino
