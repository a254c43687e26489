#include <benchmark/benchmark.h>

#include "sardino/ensemble.hpp"
#include "sardino/hypernet.hpp"
#include "sardino/pipeline.hpp"
#include "sardino/planner.hpp"
#include "sardino/rng.hpp"

using namespace sardino;

namespace {

const HyperNetParams& production_hypernet() {
  static const HyperNetParams hn = HyperNetParams::init(TargetNetSpec{}, 1);
  return hn;
}

Tensor random_image(const TargetNetSpec& spec, std::uint64_t seed) {
  Tensor x({spec.in_c, spec.in_h, spec.in_w});
  Rng rng(seed);
  for (auto& v : x.data) v = static_cast<float>(rng.next_uniform());
  return x;
}

void BM_GenerateWeights(benchmark::State& state) {
  const HyperNetParams& hn = production_hypernet();
  const Tensor z = sample_latent_input(3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(generate_weights(hn, z));
  }
}
BENCHMARK(BM_GenerateWeights);

void BM_GenerateEnsemble(benchmark::State& state) {
  const HyperNetParams& hn = production_hypernet();
  const auto n = static_cast<std::uint32_t>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(generate_ensemble(hn, 7, n));
  }
}
BENCHMARK(BM_GenerateEnsemble)->Arg(5)->Arg(20);

void BM_TargetForward(benchmark::State& state) {
  const HyperNetParams& hn = production_hypernet();
  const TargetWeights w = generate_weights(hn, sample_latent_input(5));
  const Tensor x = random_image(hn.target, 9);
  for (auto _ : state) {
    benchmark::DoNotOptimize(target_forward(hn.target, w, x));
  }
}
BENCHMARK(BM_TargetForward);

void BM_EnsembleClassify(benchmark::State& state) {
  const HyperNetParams& hn = production_hypernet();
  const auto members =
      generate_ensemble(hn, 11, static_cast<std::uint32_t>(state.range(0)));
  const Tensor x = random_image(hn.target, 13);
  for (auto _ : state) {
    benchmark::DoNotOptimize(ensemble_classify(hn.target, members, x));
  }
}
BENCHMARK(BM_EnsembleClassify)->Arg(5)->Arg(20);

RegressionTree profile_tree() {
  BackgroundLoadModel model;
  Rng rng(17);
  const auto samples = collect_profile(model, ProfileGrid::defaults(), rng);
  std::vector<std::vector<double>> x;
  std::vector<double> y;
  for (const auto& s : samples) {
    x.push_back(extract_features(s.ensemble_size, s.telemetry, true));
    y.push_back(s.latency_ms);
  }
  return fit_tree(x, y, {});
}

void BM_PredictTree(benchmark::State& state) {
  const RegressionTree tree = profile_tree();
  BackgroundLoadModel model;
  Rng rng(19);
  const TelemetrySnapshot t = simulate_telemetry(model, 0.4, rng);
  const auto features = extract_features(50, t, true);
  for (auto _ : state) {
    benchmark::DoNotOptimize(predict_tree(tree, features));
  }
}
BENCHMARK(BM_PredictTree);

void BM_PlanSize(benchmark::State& state) {
  const RegressionTree tree = profile_tree();
  BackgroundLoadModel model;
  Rng rng(23);
  const TelemetrySnapshot t = simulate_telemetry(model, 0.4, rng);
  LatencyPredictor pred = [&](std::uint32_t n, const TelemetrySnapshot& tel) {
    return predict_tree(tree, extract_features(n, tel, true));
  };
  for (auto _ : state) {
    benchmark::DoNotOptimize(plan_size(pred, t, 25.0, 3, 100));
  }
}
BENCHMARK(BM_PlanSize);

void BM_FitTree(benchmark::State& state) {
  BackgroundLoadModel model;
  Rng rng(29);
  const auto samples = collect_profile(model, ProfileGrid::defaults(), rng);
  std::vector<std::vector<double>> x;
  std::vector<double> y;
  for (const auto& s : samples) {
    x.push_back(extract_features(s.ensemble_size, s.telemetry, true));
    y.push_back(s.latency_ms);
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(fit_tree(x, y, {}));
  }
}
BENCHMARK(BM_FitTree);

}  // namespace

BENCHMARK_MAIN();
