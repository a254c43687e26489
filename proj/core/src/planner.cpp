#include "sardino/planner.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include <json.hpp>

#include "sardino/errors.hpp"

namespace sardino {

void TelemetrySnapshot::validate() const {
  for (float u : utilization) {
    if (!std::isfinite(u) || u < 0.0f || u > 100.0f) {
      throw BadTelemetry("utilization sample outside [0, 100]");
    }
  }
  for (float p : power_mw) {
    if (!std::isfinite(p)) throw BadTelemetry("non-finite power sample");
  }
}

double TelemetrySnapshot::duty_cycle() const {
  std::size_t n = 0;
  for (float u : utilization) {
    if (u >= 99.0f) ++n;
  }
  return static_cast<double>(n) / utilization.size();
}

std::vector<double> extract_features(std::uint32_t ensemble_size,
                                     const TelemetrySnapshot& telemetry,
                                     bool include_power) {
  telemetry.validate();
  std::vector<double> f;
  f.reserve(include_power ? 21 : 11);
  f.push_back(static_cast<double>(ensemble_size));
  for (float u : telemetry.utilization) f.push_back(u);
  if (include_power) {
    for (float p : telemetry.power_mw) f.push_back(p);
  }
  return f;
}

namespace {

struct SplitChoice {
  bool found = false;
  std::uint32_t feature = 0;
  double threshold = 0.0;
  double cost = 0.0;  // weighted child SSE
};

double subset_sse(const std::vector<double>& targets,
                  const std::vector<std::uint32_t>& idx) {
  double mean = 0.0;
  for (auto i : idx) mean += targets[i];
  mean /= static_cast<double>(idx.size());
  double sse = 0.0;
  for (auto i : idx) {
    const double d = targets[i] - mean;
    sse += d * d;
  }
  return sse;
}

/// Best (feature, midpoint-threshold) split by weighted child SSE.
/// Ties break to the lowest feature index, then lowest threshold;
/// this rule is part of the model contract.
SplitChoice best_split(const std::vector<std::vector<double>>& features,
                       const std::vector<double>& targets,
                       const std::vector<std::uint32_t>& idx,
                       std::uint32_t min_leaf) {
  SplitChoice best;
  const std::size_t feature_count = features[idx[0]].size();
  for (std::uint32_t f = 0; f < feature_count; ++f) {
    std::vector<double> values;
    values.reserve(idx.size());
    for (auto i : idx) values.push_back(features[i][f]);
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    for (std::size_t v = 0; v + 1 < values.size(); ++v) {
      const double thr = 0.5 * (values[v] + values[v + 1]);
      std::vector<std::uint32_t> left, right;
      for (auto i : idx) {
        (features[i][f] <= thr ? left : right).push_back(i);
      }
      if (left.size() < min_leaf || right.size() < min_leaf) continue;
      const double cost = subset_sse(targets, left) + subset_sse(targets, right);
      if (!best.found || cost < best.cost) {
        best = {true, f, thr, cost};
      }
    }
  }
  return best;
}

std::int32_t build_node(const std::vector<std::vector<double>>& features,
                        const std::vector<double>& targets,
                        std::vector<std::uint32_t> idx, std::uint32_t depth,
                        const TreeHyperParams& hyper, RegressionTree& tree) {
  const std::int32_t id = static_cast<std::int32_t>(tree.nodes.size());
  tree.nodes.emplace_back();

  double mean = 0.0;
  for (auto i : idx) mean += targets[i];
  mean /= static_cast<double>(idx.size());
  tree.nodes[id].value = mean;

  const double sse = subset_sse(targets, idx);
  if (depth >= hyper.max_depth || idx.size() < 2 * hyper.min_samples_leaf ||
      sse <= 0.0) {
    return id;
  }
  const SplitChoice split =
      best_split(features, targets, idx, hyper.min_samples_leaf);
  if (!split.found || split.cost >= sse) return id;

  std::vector<std::uint32_t> left, right;
  for (auto i : idx) {
    (features[i][split.feature] <= split.threshold ? left : right).push_back(i);
  }
  tree.nodes[id].leaf = false;
  tree.nodes[id].feature = split.feature;
  tree.nodes[id].threshold = split.threshold;
  tree.nodes[id].left =
      build_node(features, targets, std::move(left), depth + 1, hyper, tree);
  tree.nodes[id].right =
      build_node(features, targets, std::move(right), depth + 1, hyper, tree);
  return id;
}

}  // namespace

RegressionTree fit_tree(const std::vector<std::vector<double>>& features,
                        const std::vector<double>& targets,
                        const TreeHyperParams& hyper) {
  if (features.empty() || features.size() != targets.size()) {
    throw BadArgument("fit_tree: empty or mismatched training set");
  }
  const std::size_t fc = features[0].size();
  for (const auto& f : features) {
    if (f.size() != fc) throw BadArgument("fit_tree: ragged feature rows");
  }
  RegressionTree tree;
  tree.hyper = hyper;
  tree.feature_count = static_cast<std::uint32_t>(fc);
  std::vector<std::uint32_t> idx(features.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<std::uint32_t>(i);
  build_node(features, targets, std::move(idx), 0, hyper, tree);
  return tree;
}

double predict_tree(const RegressionTree& tree,
                    const std::vector<double>& features) {
  if (features.size() != tree.feature_count) {
    throw BadArgument("predict_tree: feature length mismatch");
  }
  std::int32_t id = 0;
  while (!tree.nodes[id].leaf) {
    const auto& n = tree.nodes[id];
    id = features[n.feature] <= n.threshold ? n.left : n.right;
  }
  return tree.nodes[id].value;
}

LinearModel fit_linear(const std::vector<std::vector<double>>& features,
                       const std::vector<double>& targets, double ridge) {
  if (features.empty() || features.size() != targets.size()) {
    throw BadArgument("fit_linear: empty or mismatched training set");
  }
  const std::size_t p = features[0].size();
  const std::size_t n = features.size();
  const double dn = static_cast<double>(n);

  // Standardize columns so the ridge term is scale-free and exactly
  // collinear telemetry columns stay solvable; constant columns get a
  // zero weight through the ridge.
  std::vector<double> mean(p, 0.0), sd(p, 0.0);
  double y_mean = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    if (features[s].size() != p) {
      throw BadArgument("fit_linear: inconsistent feature lengths");
    }
    for (std::size_t i = 0; i < p; ++i) mean[i] += features[s][i];
    y_mean += targets[s];
  }
  for (std::size_t i = 0; i < p; ++i) mean[i] /= dn;
  y_mean /= dn;
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t i = 0; i < p; ++i) {
      const double c = features[s][i] - mean[i];
      sd[i] += c * c;
    }
  }
  for (std::size_t i = 0; i < p; ++i) {
    sd[i] = std::sqrt(sd[i] / dn);
    if (sd[i] <= 0.0) sd[i] = 1.0;
  }

  // normal equations (Z^T Z + n*ridge I) w = Z^T (y - y_mean) on the
  // standardized, centered design (intercept handled by centering)
  std::vector<std::vector<double>> a(p, std::vector<double>(p, 0.0));
  std::vector<double> b(p, 0.0);
  std::vector<double> z(p);
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t i = 0; i < p; ++i) {
      z[i] = (features[s][i] - mean[i]) / sd[i];
    }
    const double yc = targets[s] - y_mean;
    for (std::size_t i = 0; i < p; ++i) {
      b[i] += z[i] * yc;
      for (std::size_t j = 0; j < p; ++j) a[i][j] += z[i] * z[j];
    }
  }
  for (std::size_t i = 0; i < p; ++i) a[i][i] += dn * ridge;

  // Gauss-Jordan elimination with partial pivoting
  for (std::size_t col = 0; col < p; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < p; ++r) {
      if (std::fabs(a[r][col]) > std::fabs(a[pivot][col])) pivot = r;
    }
    std::swap(a[col], a[pivot]);
    std::swap(b[col], b[pivot]);
    const double diag = a[col][col];
    for (std::size_t r = 0; r < p; ++r) {
      if (r == col || a[r][col] == 0.0) continue;
      const double factor = a[r][col] / diag;
      for (std::size_t c = col; c < p; ++c) a[r][c] -= factor * a[col][c];
      b[r] -= factor * b[col];
    }
  }
  LinearModel m;
  m.weights.resize(p);
  m.intercept = y_mean;
  for (std::size_t i = 0; i < p; ++i) {
    m.weights[i] = b[i] / a[i][i] / sd[i];
    m.intercept -= m.weights[i] * mean[i];
  }
  return m;
}

double predict_linear(const LinearModel& model,
                      const std::vector<double>& features) {
  if (features.size() != model.weights.size()) {
    throw BadArgument("predict_linear: feature length mismatch");
  }
  double y = model.intercept;
  for (std::size_t i = 0; i < features.size(); ++i) {
    y += model.weights[i] * features[i];
  }
  return y;
}

double compute_deadline(double frame_rate_fps, double detector_ms,
                        std::uint32_t k) {
  if (frame_rate_fps <= 0.0) throw BadArgument("compute_deadline: fps must be > 0");
  if (k < 1) throw BadArgument("compute_deadline: k must be >= 1");
  if (detector_ms < 0.0) throw BadArgument("compute_deadline: t_d must be >= 0");
  const double budget = 1000.0 / frame_rate_fps - detector_ms;
  if (budget <= 0.0) {
    throw NoBudget("detection consumed the whole frame period");
  }
  return budget / static_cast<double>(k);
}

PlanResult plan_size(const LatencyPredictor& predictor,
                     const TelemetrySnapshot& telemetry, double deadline_ms,
                     std::uint32_t n_min, std::uint32_t n_max) {
  if (n_min > n_max) throw BadArgument("plan_size: n_min > n_max");
  for (std::uint32_t n = n_max;; --n) {
    if (predictor(n, telemetry) <= deadline_ms) return {n, true};
    if (n == n_min) break;
  }
  return {n_min, false};
}

void save_tree_json(const RegressionTree& tree, const std::string& path) {
  nlohmann::json j;
  j["schema"] = tree.feature_count == 21 ? "n_util_power" : "n_util";
  j["feature_count"] = tree.feature_count;
  j["hyperparams"] = {{"max_depth", tree.hyper.max_depth},
                      {"min_samples_leaf", tree.hyper.min_samples_leaf}};
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& n : tree.nodes) {
    nodes.push_back({{"leaf", n.leaf},
                     {"feature", n.feature},
                     {"threshold", n.threshold},
                     {"left", n.left},
                     {"right", n.right},
                     {"value", n.value}});
  }
  j["nodes"] = std::move(nodes);
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write tree model: " + path);
  out << j.dump(2) << '\n';
}

RegressionTree load_tree_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open tree model: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad tree model JSON: ") + e.what());
  }
  RegressionTree tree;
  tree.feature_count = j.at("feature_count").get<std::uint32_t>();
  tree.hyper.max_depth = j.at("hyperparams").at("max_depth").get<std::uint32_t>();
  tree.hyper.min_samples_leaf =
      j.at("hyperparams").at("min_samples_leaf").get<std::uint32_t>();
  for (const auto& nj : j.at("nodes")) {
    RegressionTree::Node n;
    n.leaf = nj.at("leaf").get<bool>();
    n.feature = nj.at("feature").get<std::uint32_t>();
    n.threshold = nj.at("threshold").get<double>();
    n.left = nj.at("left").get<std::int32_t>();
    n.right = nj.at("right").get<std::int32_t>();
    n.value = nj.at("value").get<double>();
    tree.nodes.push_back(n);
  }
  if (tree.nodes.empty()) throw FormatError("tree model has no nodes");
  return tree;
}

void write_profile_csv(const std::vector<LatencySample>& samples,
                       const std::string& path) {
  std::ofstream out(path);
  out << "N";
  for (int i = 0; i < 10; ++i) out << ",U" << i;
  for (int i = 0; i < 10; ++i) out << ",P" << i;
  out << ",latency_ms\n";
  for (const auto& s : samples) {
    out << s.ensemble_size;
    for (float u : s.telemetry.utilization) out << ',' << u;
    for (float p : s.telemetry.power_mw) out << ',' << p;
    out << ',' << s.latency_ms << '\n';
  }
}

std::vector<LatencySample> read_profile_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open profile CSV: " + path);
  std::string line;
  if (!std::getline(in, line)) throw FormatError("empty profile CSV");
  std::vector<LatencySample> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> vals;
    while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
    if (vals.size() != 22) throw FormatError("profile CSV row must have 22 columns");
    LatencySample s;
    s.ensemble_size = static_cast<std::uint32_t>(vals[0]);
    for (int i = 0; i < 10; ++i) {
      s.telemetry.utilization[i] = static_cast<float>(vals[1 + i]);
      s.telemetry.power_mw[i] = static_cast<float>(vals[11 + i]);
    }
    s.latency_ms = vals[21];
    out.push_back(s);
  }
  return out;
}

}  // namespace sardino
