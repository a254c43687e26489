// sardino — moving-target-defense inference engine CLI.
//
// Subcommands: make-data, train, profile, fit-predictor, eval-attack,
// eval-ood, validate, run. Most take --config <file> with a JSON
// document; missing keys fall back to built-in defaults.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sardino/advtrain.hpp"
#include "sardino/attacks.hpp"
#include "sardino/dataset.hpp"
#include "sardino/ensemble.hpp"
#include "sardino/errors.hpp"
#include "sardino/hypernet.hpp"
#include "sardino/pipeline.hpp"
#include "sardino/planner.hpp"
#include "sardino/svg.hpp"

using nlohmann::json;
using namespace sardino;

namespace {

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw BadConfig("cannot open config: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw BadConfig(std::string("bad config JSON: ") + e.what());
  }
  return j;
}

json section(const json& cfg, const std::string& name) {
  return cfg.contains(name) ? cfg.at(name) : json::object();
}

template <typename T>
T get_or(const json& j, const std::string& key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

Dataset load_split(const json& ds, const std::string& prefix) {
  const std::string imgs = get_or<std::string>(ds, prefix + "_images", "");
  const std::string lbls = get_or<std::string>(ds, prefix + "_labels", "");
  if (imgs.empty() || lbls.empty()) {
    throw BadConfig("config dataset section missing " + prefix + " paths");
  }
  return load_idx(imgs, lbls);
}

std::string require_model_path(const json& cfg) {
  const json m = section(cfg, "model");
  const std::string path = get_or<std::string>(m, "path", "");
  if (path.empty()) throw BadConfig("config model.path is required");
  return path;
}

BackgroundLoadModel load_model_from_config(const json& cfg) {
  const json s = section(cfg, "simulator");
  BackgroundLoadModel m;
  m.slope_base = get_or(s, "slope_base", m.slope_base);
  m.quad = get_or(s, "quad", m.quad);
  m.intercept_base = get_or(s, "intercept_base", m.intercept_base);
  m.step_add_ms = get_or(s, "step_add_ms", m.step_add_ms);
  m.noise_sigma = get_or(s, "noise_sigma", m.noise_sigma);
  m.load_contention = get_or(s, "load_contention", m.load_contention);
  return m;
}

struct PredictorModel {
  bool is_tree = false;
  RegressionTree tree;
  LinearModel linear;
  bool include_power = true;

  double predict(std::uint32_t n, const TelemetrySnapshot& t) const {
    const auto f = extract_features(n, t, include_power);
    return is_tree ? predict_tree(tree, f) : predict_linear(linear, f);
  }
  LatencyPredictor as_fn() const {
    return [this](std::uint32_t n, const TelemetrySnapshot& t) {
      return predict(n, t);
    };
  }
};

void save_linear_json(const LinearModel& model, bool include_power,
                      const std::string& path) {
  json j;
  j["kind"] = "linear";
  j["schema"] = include_power ? "n_util_power" : "n_util";
  j["feature_count"] = include_power ? 21 : 11;
  j["weights"] = model.weights;
  j["intercept"] = model.intercept;
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write model: " + path);
  out << j.dump(2) << '\n';
}

PredictorModel load_predictor(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open predictor model: " + path);
  json j;
  in >> j;
  PredictorModel m;
  if (j.contains("nodes")) {
    m.is_tree = true;
    m.tree = load_tree_json(path);
    m.include_power = m.tree.feature_count == 21;
  } else {
    m.is_tree = false;
    m.linear.weights = j.at("weights").get<std::vector<double>>();
    m.linear.intercept = j.at("intercept").get<double>();
    m.include_power = m.linear.weights.size() == 21;
  }
  return m;
}

AttackFn make_attack_fn(const HyperNetParams& hn, const json& atk_cfg,
                        std::uint64_t surrogate_seed) {
  const double eps = get_or(atk_cfg, "eps", 0.3);
  const std::uint32_t steps = get_or<std::uint32_t>(atk_cfg, "steps", 10);
  const double step_size = get_or(atk_cfg, "step_size", eps / 4.0);
  const std::uint32_t surrogate_n =
      get_or<std::uint32_t>(atk_cfg, "surrogate_size", 20);
  auto surrogates =
      std::make_shared<std::vector<TargetWeights>>(generate_ensemble(
          hn, surrogate_seed, surrogate_n));
  const TargetNetSpec spec = hn.target;
  return [spec, surrogates, eps, steps, step_size](const Tensor& x,
                                                   std::uint32_t y) {
    return surrogate_ensemble_attack(spec, *surrogates, x, y, eps, steps,
                                     step_size);
  };
}

// --- subcommands -----------------------------------------------------------

int cmd_make_data(const std::string& out_dir, std::size_t n_train,
                  std::size_t n_test, std::size_t n_ood, std::uint64_t seed) {
  const Dataset train = make_glyph_dataset(GlyphKind::Digits, n_train, seed);
  const Dataset test = make_glyph_dataset(GlyphKind::Digits, n_test, seed + 1);
  const Dataset ood = make_glyph_dataset(GlyphKind::Letters, n_ood, seed + 2);
  write_idx(train, out_dir + "/train-images.idx", out_dir + "/train-labels.idx");
  write_idx(test, out_dir + "/test-images.idx", out_dir + "/test-labels.idx");
  write_idx(ood, out_dir + "/ood-images.idx", out_dir + "/ood-labels.idx");
  std::printf("wrote %zu train / %zu test / %zu ood samples to %s\n", n_train,
              n_test, n_ood, out_dir.c_str());
  return 0;
}

int cmd_train(const json& cfg) {
  const json ds = section(cfg, "dataset");
  const Dataset train_set = load_split(ds, "train");
  const Dataset val_set = load_split(ds, "test");

  const json t = section(cfg, "train");
  TrainConfig tc;
  tc.batch_size = get_or(t, "batch_size", tc.batch_size);
  tc.zh_batch = get_or(t, "zh_batch", tc.zh_batch);
  tc.lr_hypernet = get_or(t, "lr_hypernet", tc.lr_hypernet);
  tc.lr_attacker = get_or(t, "lr_attacker", tc.lr_attacker);
  tc.steps = get_or(t, "steps", tc.steps);
  tc.eps_clip = get_or(t, "eps_clip", tc.eps_clip);
  tc.attacker_steps = get_or(t, "attacker_steps", tc.attacker_steps);
  tc.adv_fraction = get_or(t, "adv_fraction", tc.adv_fraction);
  tc.j2_weight = get_or(t, "j2_weight", tc.j2_weight);
  tc.enable_attacker = get_or(t, "enable_attacker", tc.enable_attacker);
  tc.enable_j2 = get_or(t, "enable_j2", tc.enable_j2);
  tc.val_every = get_or(t, "val_every", tc.val_every);
  tc.val_subset = get_or(t, "val_subset", tc.val_subset);
  tc.seed = get_or(t, "seed", tc.seed);

  const TrainResult result = train(tc, train_set, val_set);
  save_hypernet(result.hypernet, require_model_path(cfg));
  const std::string log_csv = get_or<std::string>(t, "log_csv", "");
  if (!log_csv.empty()) write_train_log_csv(result.log, log_csv);

  double last_val = -1.0;
  for (const auto& row : result.log) {
    if (row.val_acc >= 0.0) last_val = row.val_acc;
  }
  std::printf("trained %u steps; final val accuracy %.4f\n", tc.steps, last_val);
  return 0;
}

int cmd_profile(const json& cfg, const std::string& out_path) {
  const BackgroundLoadModel model = load_model_from_config(cfg);
  const json s = section(cfg, "simulator");
  Rng rng(mix64(get_or<std::uint64_t>(s, "seed", 5)));
  const auto samples = collect_profile(model, ProfileGrid::defaults(), rng);
  write_profile_csv(samples, out_path);
  std::printf("wrote %zu profile samples to %s\n", samples.size(),
              out_path.c_str());
  return 0;
}

int cmd_fit_predictor(const std::string& kind, bool with_power,
                      const std::string& in_path, const std::string& out_path,
                      std::uint64_t seed) {
  const auto samples = read_profile_csv(in_path);
  if (samples.size() < 5) throw BadArgument("too few profile samples");

  // deterministic shuffle, 4:1 train/validation split
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(mix64(seed));
  for (std::size_t i = order.size() - 1; i > 0; --i) {
    std::swap(order[i], order[rng.next_below(i + 1)]);
  }
  const std::size_t n_train = samples.size() * 4 / 5;

  std::vector<std::vector<double>> xtr, xva;
  std::vector<double> ytr, yva;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto& s = samples[order[i]];
    auto f = extract_features(s.ensemble_size, s.telemetry, with_power);
    if (i < n_train) {
      xtr.push_back(std::move(f));
      ytr.push_back(s.latency_ms);
    } else {
      xva.push_back(std::move(f));
      yva.push_back(s.latency_ms);
    }
  }

  double sse = 0.0;
  if (kind == "dt") {
    const RegressionTree tree = fit_tree(xtr, ytr, TreeHyperParams{});
    save_tree_json(tree, out_path);
    for (std::size_t i = 0; i < xva.size(); ++i) {
      const double e = predict_tree(tree, xva[i]) - yva[i];
      sse += e * e;
    }
  } else if (kind == "lr") {
    const LinearModel lin = fit_linear(xtr, ytr);
    save_linear_json(lin, with_power, out_path);
    for (std::size_t i = 0; i < xva.size(); ++i) {
      const double e = predict_linear(lin, xva[i]) - yva[i];
      sse += e * e;
    }
  } else {
    throw BadArgument("--model must be dt or lr");
  }
  const double rmse = std::sqrt(sse / static_cast<double>(xva.size()));
  std::printf("%s model on %zu train / %zu held-out samples: RMSE %.4f ms\n",
              kind.c_str(), xtr.size(), xva.size(), rmse);
  return 0;
}

int cmd_eval_attack(const json& cfg) {
  const HyperNetParams hn = load_hypernet(require_model_path(cfg));
  const Dataset test = load_split(section(cfg, "dataset"), "test");
  const json a = section(cfg, "attack");

  const std::size_t samples = get_or<std::size_t>(a, "samples", 200);
  const Dataset clean = test.subset(0, std::min(samples, test.size()));

  DefenderConfig dc;
  dc.hypernet = &hn;
  dc.ensemble_size = get_or<std::uint32_t>(a, "ensemble_size", 20);
  dc.thresholds = DefenderConfig::default_threshold_sweep();
  dc.base_seed = get_or<std::uint64_t>(a, "defense_seed", 101);
  const std::string renewal = get_or<std::string>(a, "renewal", "per-input");
  dc.renewal =
      renewal == "static" ? RenewalMode::Static : RenewalMode::PerInput;

  const AttackFn attack =
      make_attack_fn(hn, a, get_or<std::uint64_t>(a, "surrogate_seed", 202));
  const auto curve = evaluate_defense(dc, clean, attack);

  const std::string out_csv = get_or<std::string>(a, "out_csv", "defense.csv");
  write_defense_csv(curve, out_csv);
  const std::string out_svg = get_or<std::string>(a, "out_svg", "");
  if (!out_svg.empty()) {
    SvgChart chart("Defense trade-off (" + renewal + " renewal)",
                   "false positive rate", "successful defense rate");
    std::vector<double> xs, ys;
    for (const auto& p : curve) {
      xs.push_back(p.fpr);
      ys.push_back(p.sdr);
    }
    chart.add_series("SDR vs FPR", xs, ys);
    chart.write(out_svg);
  }
  for (const auto& p : curve) {
    std::printf("T_s=%.2f  SDR=%.4f  FPR=%.4f\n", p.threshold, p.sdr, p.fpr);
  }
  return 0;
}

int cmd_eval_ood(const json& cfg) {
  const HyperNetParams hn = load_hypernet(require_model_path(cfg));
  const json ds = section(cfg, "dataset");
  const json o = section(cfg, "ood");
  const std::size_t samples = get_or<std::size_t>(o, "samples", 500);
  Dataset in_dist = load_split(ds, "test");
  Dataset ood = load_split(ds, "ood");
  in_dist = in_dist.subset(0, std::min(samples, in_dist.size()));
  ood = ood.subset(0, std::min(samples, ood.size()));

  DefenderConfig dc;
  dc.hypernet = &hn;
  dc.ensemble_size = get_or<std::uint32_t>(o, "ensemble_size", 20);
  dc.thresholds = DefenderConfig::default_threshold_sweep();
  dc.base_seed = get_or<std::uint64_t>(o, "defense_seed", 303);

  const auto roc = evaluate_ood(dc, in_dist, ood);
  std::vector<double> soft_sweep;
  for (int i = 0; i <= 10; ++i) soft_sweep.push_back(0.90 + 0.01 * i);
  const TargetWeights baseline_w =
      generate_weights(hn, sample_latent_input(dc.base_seed));
  const auto roc_soft = evaluate_ood_softmax_baseline(hn.target, baseline_w,
                                                      in_dist, ood, soft_sweep);

  const std::string prefix = get_or<std::string>(o, "out_prefix", "ood");
  write_roc_csv(roc, prefix + "_ensemble_roc.csv");
  write_roc_csv(roc_soft, prefix + "_softmax_roc.csv");

  SvgChart chart("OOD detection ROC", "false positive rate",
                 "true positive rate");
  auto to_xy = [](const std::vector<RocPoint>& pts, std::vector<double>& xs,
                  std::vector<double>& ys) {
    for (const auto& p : pts) {
      xs.push_back(p.fpr);
      ys.push_back(p.tpr);
    }
  };
  std::vector<double> x1, y1, x2, y2;
  to_xy(roc, x1, y1);
  to_xy(roc_soft, x2, y2);
  chart.add_series("ensemble consistency", x1, y1);
  chart.add_series("softmax baseline", x2, y2);
  chart.write(prefix + "_roc.svg");

  std::printf("ensemble AUC %.4f, softmax baseline AUC %.4f\n", roc_auc(roc),
              roc_auc(roc_soft));
  return 0;
}

int cmd_validate(const json& cfg) {
  const HyperNetParams hn = load_hypernet(require_model_path(cfg));
  const Dataset test = load_split(section(cfg, "dataset"), "test");
  const json v = section(cfg, "validate");
  const std::uint32_t n = get_or<std::uint32_t>(v, "ensemble_size", 20);
  const double floor = get_or(v, "min_accuracy", 0.9);
  const std::uint64_t seed = get_or<std::uint64_t>(v, "seed", 3);

  const auto members = generate_ensemble(hn, seed, n);
  const ValidationResult r = validate_ensemble(hn.target, members, test, floor);
  std::printf("ensemble (N=%u, seed=%llu): accuracy %.4f — %s\n", n,
              static_cast<unsigned long long>(seed), r.accuracy,
              r.passed ? "commissioned" : "REJECTED");
  return r.passed ? 0 : 1;
}

int cmd_run(const json& cfg) {
  const HyperNetParams hn = load_hypernet(require_model_path(cfg));
  const json ds = section(cfg, "dataset");
  const json p = section(cfg, "pipeline");
  const json planner = section(cfg, "planner");

  const std::string predictor_path =
      get_or<std::string>(planner, "predictor", "");
  if (predictor_path.empty()) {
    throw BadConfig("config planner.predictor is required for run");
  }
  const PredictorModel predictor = load_predictor(predictor_path);

  const Dataset clean = load_split(ds, "test");
  Dataset ood;
  StreamConfig sc;
  sc.frames = get_or<std::size_t>(p, "frames", 1000);
  sc.frame_rate_fps = get_or(p, "frame_rate_fps", 25.0);
  sc.clean_ratio = get_or(p, "clean_ratio", 1.0);
  sc.adv_ratio = get_or(p, "adv_ratio", 0.0);
  sc.ood_ratio = get_or(p, "ood_ratio", 0.0);
  sc.k_min = get_or<std::uint32_t>(p, "k_min", 1);
  sc.k_max = get_or<std::uint32_t>(p, "k_max", 1);
  sc.detector_ms = get_or(p, "detector_ms", 15.0);
  sc.seed = get_or<std::uint64_t>(p, "stream_seed", 7);
  if (sc.ood_ratio > 0.0) ood = load_split(ds, "ood");
  AttackFn attack;
  if (sc.adv_ratio > 0.0) {
    attack = make_attack_fn(hn, section(cfg, "attack"),
                            get_or<std::uint64_t>(p, "surrogate_seed", 404));
  }
  const auto stream = inject_stream(clean, ood, attack, sc);

  PipelineConfig pc;
  pc.frame_rate_fps = sc.frame_rate_fps;
  pc.n_min = get_or<std::uint32_t>(planner, "n_min", 3);
  pc.n_max = get_or<std::uint32_t>(planner, "n_max", 100);
  pc.consistency_threshold = get_or(p, "consistency_threshold", 0.6);
  pc.seed = get_or<std::uint64_t>(p, "seed", 11);
  pc.load_init = get_or(p, "load_init", 0.3);
  pc.load_walk_step = get_or(p, "load_walk_step", 0.04);

  const BackgroundLoadModel model = load_model_from_config(cfg);

  const std::string seed_log_path = get_or<std::string>(p, "seed_log", "");
  SeedLog seed_log(seed_log_path);
  std::optional<OperatorQueue> queue;
  const std::string queue_bin = get_or<std::string>(p, "queue_bin", "");
  if (!queue_bin.empty()) {
    queue.emplace(queue_bin, get_or<std::string>(p, "queue_csv",
                                                 queue_bin + ".csv"));
  }

  const RunMetrics metrics =
      run_pipeline(pc, stream, model, predictor.as_fn(), hn, &seed_log,
                   queue ? &*queue : nullptr);

  const std::string metrics_csv =
      get_or<std::string>(p, "metrics_csv", "metrics.csv");
  write_metrics_csv(metrics, metrics_csv);
  const std::string csv_seed_log = get_or<std::string>(p, "seed_log_csv", "");
  if (!csv_seed_log.empty()) seed_log.export_csv(csv_seed_log);

  const std::string svg = get_or<std::string>(p, "svg", "");
  if (!svg.empty()) {
    SvgChart chart("Frame latency trace", "frame", "latency (ms)");
    std::vector<double> xs, lat, planned;
    for (const auto& r : metrics.frames) {
      xs.push_back(static_cast<double>(r.frame_id));
      lat.push_back(r.latency_ms);
      planned.push_back(static_cast<double>(r.planned_n));
    }
    chart.add_series("frame latency (ms)", xs, lat);
    chart.add_series("planned N", xs, planned);
    chart.add_hline(1000.0 / pc.frame_rate_fps, "frame period");
    chart.write(svg);
  }

  std::printf(
      "frames %zu  mean latency %.2f ms  max %.2f ms  deadline hit rate %.4f  "
      "mean planned N %.1f\n",
      metrics.frames.size(), metrics.mean_latency_ms, metrics.max_latency_ms,
      metrics.deadline_hit_rate, metrics.mean_planned_n);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sardino — renewable-ensemble inference engine"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_path = "profile.csv";
  std::string in_path, model_kind = "dt", out_dir = ".";
  bool with_power = false;
  std::size_t n_train = 6000, n_test = 1000, n_ood = 1000;
  std::uint64_t seed = 1;

  auto add_config = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file");
  };

  auto* mk = app.add_subcommand("make-data", "Write glyph IDX dataset files");
  mk->add_option("--out-dir", out_dir, "Output directory");
  mk->add_option("--train", n_train, "Training sample count");
  mk->add_option("--test", n_test, "Test sample count");
  mk->add_option("--ood", n_ood, "OOD sample count");
  mk->add_option("--seed", seed, "Dataset seed");

  auto* tr = app.add_subcommand("train", "Train the generator against the attacker");
  add_config(tr);
  auto* pf = app.add_subcommand("profile", "Collect a simulated latency profile");
  add_config(pf);
  pf->add_option("--out", out_path, "Profile CSV output path");
  auto* fp = app.add_subcommand("fit-predictor", "Fit the latency predictor");
  fp->add_option("--model", model_kind, "dt or lr")->required();
  fp->add_flag("--with-power", with_power, "Include power features");
  fp->add_option("--in", in_path, "Profile CSV")->required();
  fp->add_option("--out", out_path, "Model JSON output")->required();
  fp->add_option("--seed", seed, "Split shuffle seed");
  auto* ea = app.add_subcommand("eval-attack", "Defense curve vs a surrogate attack");
  add_config(ea);
  auto* eo = app.add_subcommand("eval-ood", "OOD ROC vs the softmax baseline");
  add_config(eo);
  auto* va = app.add_subcommand("validate", "Commission-check one ensemble");
  add_config(va);
  auto* rn = app.add_subcommand("run", "Run the pipeline simulator");
  add_config(rn);

  CLI11_PARSE(app, argc, argv);

  try {
    if (mk->parsed()) return cmd_make_data(out_dir, n_train, n_test, n_ood, seed);
    const json cfg = load_config(config_path);
    if (tr->parsed()) return cmd_train(cfg);
    if (pf->parsed()) return cmd_profile(cfg, out_path);
    if (fp->parsed())
      return cmd_fit_predictor(model_kind, with_power, in_path, out_path, seed);
    if (ea->parsed()) return cmd_eval_attack(cfg);
    if (eo->parsed()) return cmd_eval_ood(cfg);
    if (va->parsed()) return cmd_validate(cfg);
    if (rn->parsed()) return cmd_run(cfg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
