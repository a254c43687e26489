#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "sardino/errors.hpp"
#include "sardino/planner.hpp"
#include "sardino/rng.hpp"

using namespace sardino;

namespace {

std::string temp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

TelemetrySnapshot flat_telemetry(float util, float power) {
  TelemetrySnapshot t;
  t.utilization.fill(util);
  t.power_mw.fill(power);
  return t;
}

/// Reference CART prediction computed from scratch at query time:
/// recursively re-derives the exhaustive best split (midpoints of
/// sorted unique values, summed child SSE, ties to the lowest feature
/// index then lowest threshold) and routes the query down.
double oracle_predict(const std::vector<std::vector<double>>& features,
                      const std::vector<double>& targets,
                      const std::vector<std::size_t>& idx, std::uint32_t depth,
                      const TreeHyperParams& hyper,
                      const std::vector<double>& query) {
  double mean = 0.0;
  for (auto i : idx) mean += targets[i];
  mean /= static_cast<double>(idx.size());

  double sse = 0.0;
  for (auto i : idx) sse += (targets[i] - mean) * (targets[i] - mean);
  if (depth >= hyper.max_depth || idx.size() < 2 * hyper.min_samples_leaf ||
      sse <= 0.0) {
    return mean;
  }

  bool found = false;
  std::size_t best_f = 0;
  double best_thr = 0.0, best_cost = 0.0;
  const std::size_t fc = features[idx[0]].size();
  for (std::size_t f = 0; f < fc; ++f) {
    std::vector<double> vals;
    for (auto i : idx) vals.push_back(features[i][f]);
    std::sort(vals.begin(), vals.end());
    vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
    for (std::size_t v = 0; v + 1 < vals.size(); ++v) {
      const double thr = 0.5 * (vals[v] + vals[v + 1]);
      std::vector<std::size_t> l, r;
      for (auto i : idx) (features[i][f] <= thr ? l : r).push_back(i);
      if (l.size() < hyper.min_samples_leaf || r.size() < hyper.min_samples_leaf) {
        continue;
      }
      auto sse_of = [&](const std::vector<std::size_t>& part) {
        double m = 0.0;
        for (auto i : part) m += targets[i];
        m /= static_cast<double>(part.size());
        double s = 0.0;
        for (auto i : part) s += (targets[i] - m) * (targets[i] - m);
        return s;
      };
      const double cost = sse_of(l) + sse_of(r);
      if (!found || cost < best_cost) {
        found = true;
        best_f = f;
        best_thr = thr;
        best_cost = cost;
      }
    }
  }
  if (!found || best_cost >= sse) return mean;

  std::vector<std::size_t> part;
  const bool go_left = query[best_f] <= best_thr;
  for (auto i : idx) {
    if ((features[i][best_f] <= best_thr) == go_left) part.push_back(i);
  }
  return oracle_predict(features, targets, part, depth + 1, hyper, query);
}

}  // namespace

TEST_CASE("feature extraction order and width") {
  auto t = flat_telemetry(50.0f, 7000.0f);
  t.utilization[0] = 42.0f;
  t.power_mw[9] = 9000.0f;
  const auto full = extract_features(30, t, true);
  REQUIRE(full.size() == 21);
  CHECK(full[0] == 30.0);
  CHECK(full[1] == 42.0);   // U0 right after N
  CHECK(full[20] == 9000.0);  // P9 last
  const auto no_power = extract_features(30, t, false);
  REQUIRE(no_power.size() == 11);
  CHECK(no_power[10] == 50.0);
  auto bad = flat_telemetry(150.0f, 0.0f);
  CHECK_THROWS_AS(extract_features(1, bad, true), BadTelemetry);
}

TEST_CASE("two-cluster tree splits on ensemble size") {
  std::vector<std::vector<double>> x{{10, 1}, {10, 2}, {10, 3},
                                     {100, 1}, {100, 2}, {100, 3}};
  std::vector<double> y{5, 5, 5, 50, 50, 50};
  const RegressionTree tree = fit_tree(x, y, {});
  REQUIRE(!tree.nodes.empty());
  CHECK_FALSE(tree.nodes[0].leaf);
  CHECK(tree.nodes[0].feature == 0);
  CHECK(tree.nodes[0].threshold == doctest::Approx(55.0));
  CHECK(predict_tree(tree, {10, 2}) == doctest::Approx(5.0));
  CHECK(predict_tree(tree, {100, 2}) == doctest::Approx(50.0));
  CHECK(predict_tree(tree, {55, 2}) == doctest::Approx(5.0));  // <= goes left
}

TEST_CASE("fit_tree matches the brute-force oracle on random datasets") {
  Rng rng(71);
  for (int ds = 0; ds < 20; ++ds) {
    const std::size_t n = 5 + rng.next_below(40);
    const std::size_t fc = 1 + rng.next_below(4);
    std::vector<std::vector<double>> x(n, std::vector<double>(fc));
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (auto& v : x[i]) {
        // coarse grid values force duplicate feature values and ties
        v = static_cast<double>(rng.next_below(8));
      }
      y[i] = static_cast<double>(rng.next_below(12)) + 0.25 * rng.next_gaussian();
    }
    TreeHyperParams hyper;
    hyper.max_depth = 1 + static_cast<std::uint32_t>(rng.next_below(6));
    hyper.min_samples_leaf = 1 + static_cast<std::uint32_t>(rng.next_below(3));
    const RegressionTree tree = fit_tree(x, y, hyper);

    std::vector<std::size_t> all(n);
    for (std::size_t i = 0; i < n; ++i) all[i] = i;
    for (int q = 0; q < 25; ++q) {
      std::vector<double> query(fc);
      for (auto& v : query) v = 8.0 * rng.next_uniform() - 0.5;
      const double got = predict_tree(tree, query);
      const double want = oracle_predict(x, y, all, 0, hyper, query);
      CHECK_MESSAGE(got == doctest::Approx(want).epsilon(1e-12),
                    "dataset " << ds << " query " << q);
    }
  }
}

TEST_CASE("fit_linear recovers an exact linear law") {
  Rng rng(91);
  const std::vector<double> w_true{0.31, -2.0, 7.5};
  const double b_true = 4.25;
  std::vector<std::vector<double>> x;
  std::vector<double> y;
  for (int i = 0; i < 60; ++i) {
    std::vector<double> row{rng.next_gaussian() * 10, rng.next_gaussian(),
                            rng.next_gaussian() * 0.1};
    double yi = b_true;
    for (std::size_t j = 0; j < 3; ++j) yi += w_true[j] * row[j];
    x.push_back(std::move(row));
    y.push_back(yi);
  }
  const LinearModel m = fit_linear(x, y);
  for (std::size_t j = 0; j < 3; ++j) {
    CHECK(m.weights[j] == doctest::Approx(w_true[j]).epsilon(1e-5));
  }
  CHECK(m.intercept == doctest::Approx(b_true).epsilon(1e-5));
  CHECK(predict_linear(m, {1.0, 2.0, 3.0}) ==
        doctest::Approx(b_true + 0.31 - 4.0 + 22.5).epsilon(1e-5));
}

TEST_CASE("fit_linear survives exactly collinear columns") {
  // second column is 2x the first; constant third column
  std::vector<std::vector<double>> x;
  std::vector<double> y;
  Rng rng(92);
  for (int i = 0; i < 40; ++i) {
    const double a = rng.next_gaussian();
    x.push_back({a, 2.0 * a, 3.0});
    y.push_back(5.0 * a + 1.0);
  }
  const LinearModel m = fit_linear(x, y);
  for (double w : m.weights) CHECK(std::isfinite(w));
  CHECK(std::isfinite(m.intercept));
  // predictions still reproduce the law on the training manifold
  CHECK(predict_linear(m, {1.0, 2.0, 3.0}) == doctest::Approx(6.0).epsilon(1e-6));
}

TEST_CASE("deadline formula and failure modes") {
  CHECK(compute_deadline(25.0, 15.0, 1) == doctest::Approx(25.0));
  CHECK(compute_deadline(25.0, 0.0, 2) == doctest::Approx(20.0));
  CHECK(compute_deadline(10.0, 40.0, 3) == doctest::Approx(20.0));
  CHECK_THROWS_AS(compute_deadline(25.0, 40.0, 1), NoBudget);
  CHECK_THROWS_AS(compute_deadline(25.0, 45.0, 1), NoBudget);
  CHECK_THROWS_AS(compute_deadline(0.0, 1.0, 1), BadArgument);
  CHECK_THROWS_AS(compute_deadline(25.0, 1.0, 0), BadArgument);
  CHECK_THROWS_AS(compute_deadline(25.0, -1.0, 1), BadArgument);
}

TEST_CASE("plan_size matches a descending scan oracle under fuzz") {
  Rng rng(81);
  const auto telemetry = flat_telemetry(40.0f, 5000.0f);
  for (int it = 0; it < 300; ++it) {
    const std::uint32_t n_min = 1 + static_cast<std::uint32_t>(rng.next_below(10));
    const std::uint32_t n_max =
        n_min + static_cast<std::uint32_t>(rng.next_below(50));
    // random (possibly non-monotone) latency table
    std::vector<double> table(n_max + 1, 0.0);
    for (auto& v : table) v = 50.0 * rng.next_uniform();
    const double deadline = 50.0 * rng.next_uniform();
    LatencyPredictor pred = [&](std::uint32_t n, const TelemetrySnapshot&) {
      return table[n];
    };
    const PlanResult got = plan_size(pred, telemetry, deadline, n_min, n_max);

    std::uint32_t want_n = n_min;
    bool want_feasible = false;
    for (std::uint32_t n = n_max; n >= n_min; --n) {
      if (table[n] <= deadline) {
        want_n = n;
        want_feasible = true;
        break;
      }
      if (n == n_min) break;
    }
    CHECK(got.ensemble_size == want_n);
    CHECK(got.feasible == want_feasible);
  }
  CHECK_THROWS_AS(plan_size([](std::uint32_t, const TelemetrySnapshot&) {
                    return 0.0;
                  }, telemetry, 1.0, 5, 4),
                  BadArgument);
}

TEST_CASE("tree JSON round trip preserves predictions and schema") {
  Rng rng(61);
  std::vector<std::vector<double>> x;
  std::vector<double> y;
  const auto telemetry = flat_telemetry(35.0f, 6000.0f);
  for (int i = 0; i < 40; ++i) {
    auto t = telemetry;
    t.utilization[0] = static_cast<float>(100.0 * rng.next_uniform());
    const std::uint32_t n = 1 + static_cast<std::uint32_t>(rng.next_below(100));
    x.push_back(extract_features(n, t, true));
    y.push_back(0.3 * n + 0.05 * t.utilization[0] + rng.next_gaussian());
  }
  const RegressionTree tree = fit_tree(x, y, {});
  const std::string path = temp_path("sardino_test_tree.json");
  save_tree_json(tree, path);
  const RegressionTree back = load_tree_json(path);
  CHECK(back.feature_count == 21);
  CHECK(back.nodes.size() == tree.nodes.size());
  CHECK(back.hyper.max_depth == tree.hyper.max_depth);
  CHECK(back.hyper.min_samples_leaf == tree.hyper.min_samples_leaf);
  for (const auto& row : x) {
    CHECK(predict_tree(back, row) == doctest::Approx(predict_tree(tree, row)));
  }
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_tree_json(path), FormatError);
}

TEST_CASE("profile CSV round trip") {
  std::vector<LatencySample> samples;
  Rng rng(51);
  for (int i = 0; i < 25; ++i) {
    LatencySample s;
    s.ensemble_size = 10 * (1 + static_cast<std::uint32_t>(rng.next_below(10)));
    s.telemetry = flat_telemetry(static_cast<float>(100.0 * rng.next_uniform()),
                                 static_cast<float>(4000 + 9000 * rng.next_uniform()));
    s.latency_ms = 40.0 * rng.next_uniform();
    samples.push_back(s);
  }
  const std::string path = temp_path("sardino_test_profile.csv");
  write_profile_csv(samples, path);
  const auto back = read_profile_csv(path);
  REQUIRE(back.size() == samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    CHECK(back[i].ensemble_size == samples[i].ensemble_size);
    for (int j = 0; j < 10; ++j) {
      CHECK(back[i].telemetry.utilization[j] ==
            doctest::Approx(samples[i].telemetry.utilization[j]).epsilon(1e-4));
      CHECK(back[i].telemetry.power_mw[j] ==
            doctest::Approx(samples[i].telemetry.power_mw[j]).epsilon(1e-4));
    }
    CHECK(back[i].latency_ms == doctest::Approx(samples[i].latency_ms).epsilon(1e-4));
  }
  std::filesystem::remove(path);
  CHECK_THROWS_AS(read_profile_csv(path), FormatError);
}

TEST_CASE("telemetry duty cycle counts saturated samples") {
  auto t = flat_telemetry(50.0f, 0.0f);
  CHECK(t.duty_cycle() == doctest::Approx(0.0));
  t.utilization[0] = 100.0f;
  t.utilization[3] = 99.0f;
  CHECK(t.duty_cycle() == doctest::Approx(0.2));
}
