#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "sardino/dataset.hpp"
#include "sardino/ensemble.hpp"
#include "sardino/errors.hpp"
#include "sardino/rng.hpp"

using namespace sardino;

namespace {

TargetNetSpec mini_spec() {
  TargetNetSpec s;
  s.in_h = 12;
  s.in_w = 12;
  s.in_c = 1;
  s.classes = 4;
  s.conv_filters = 2;
  s.kernel = 3;
  return s;
}

/// All-zero weights except a dense bias peak at `cls`: the member
/// outputs `cls` for every input.
TargetWeights constant_member(const TargetNetSpec& spec, std::uint32_t cls) {
  TargetWeights w = TargetWeights::zeros(spec);
  w.dense_b.data[cls] = 1.0f;
  return w;
}

std::string temp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("ensemble_classify preserves member order") {
  const TargetNetSpec spec = mini_spec();
  std::vector<TargetWeights> members;
  for (std::uint32_t c : {2u, 0u, 3u, 0u}) members.push_back(constant_member(spec, c));
  Tensor x({spec.in_c, spec.in_h, spec.in_w});
  const auto labels = ensemble_classify(spec, members, x);
  CHECK(labels == std::vector<std::uint32_t>{2, 0, 3, 0});
}

TEST_CASE("consistency is the majority vote share") {
  CHECK(consistency({1, 1, 1, 2}, 4) == doctest::Approx(0.75));
  CHECK(consistency({0, 1, 2, 3}, 4) == doctest::Approx(0.25));
  CHECK(consistency({5, 5}, 6) == doctest::Approx(1.0));
  CHECK_THROWS_AS(consistency({}, 4), BadArgument);
  CHECK_THROWS_AS(consistency({4}, 4), BadLabel);
}

TEST_CASE("decide accepts only above the threshold, strictly") {
  // 3/4 agreement
  auto v = decide({1, 1, 1, 2}, 4, 0.6);
  CHECK(v.accepted());
  CHECK(v.label == 1);
  CHECK(v.consistency == doctest::Approx(0.75));
  CHECK(v.histogram == std::vector<std::uint32_t>{0, 3, 1, 0});

  // exactly at the threshold -> flag (strict inequality)
  v = decide({1, 1, 1, 2}, 4, 0.75);
  CHECK_FALSE(v.accepted());
  CHECK(v.label == 1);  // would-be majority still recorded

  // unanimous passes any threshold below 1
  v = decide({3, 3, 3}, 4, 0.99);
  CHECK(v.accepted());
  CHECK(v.label == 3);

  // 2-2 tie at threshold 0.5: flagged, label breaks to the lowest class
  v = decide({2, 3, 3, 2}, 4, 0.5);
  CHECK_FALSE(v.accepted());
  CHECK(v.label == 2);
  CHECK(v.consistency == doctest::Approx(0.5));
}

TEST_CASE("higher consistency never flips accept to flag") {
  // with a fixed threshold, raising agreement keeps/earns acceptance
  const double t = 0.6;
  bool prev_accepted = false;
  for (int agree = 1; agree <= 10; ++agree) {
    std::vector<std::uint32_t> labels;
    for (int i = 0; i < agree; ++i) labels.push_back(0);
    for (int i = agree; i < 10; ++i) labels.push_back(1 + (i % 3));
    const bool acc = decide(labels, 4, t).accepted();
    if (prev_accepted) CHECK(acc);
    prev_accepted = acc;
  }
}

TEST_CASE("validate_ensemble scores majority-vote accuracy") {
  const TargetNetSpec spec = mini_spec();
  Dataset val;
  val.classes = spec.classes;
  for (std::uint32_t i = 0; i < 8; ++i) {
    val.images.push_back(Tensor({spec.in_c, spec.in_h, spec.in_w}));
    val.labels.push_back(i % 2);  // labels alternate 0,1
  }
  // 2-of-3 majority always says 0 -> accuracy 0.5
  std::vector<TargetWeights> members{constant_member(spec, 0),
                                     constant_member(spec, 0),
                                     constant_member(spec, 1)};
  const auto res = validate_ensemble(spec, members, val, 0.4);
  CHECK(res.accuracy == doctest::Approx(0.5));
  CHECK(res.passed);
  CHECK_FALSE(validate_ensemble(spec, members, val, 0.6).passed);
}

TEST_CASE("softmax baseline accepts confident predictions") {
  const TargetNetSpec spec = mini_spec();
  TargetWeights w = constant_member(spec, 1);
  w.dense_b.data[1] = 10.0f;  // near-certain softmax
  const Tensor x({spec.in_c, spec.in_h, spec.in_w});
  auto v = baseline_softmax_detect(spec, w, x, 0.9);
  CHECK(v.accepted());
  CHECK(v.label == 1);
  // uniform logits: max softmax = 0.25 < 0.9 -> flagged
  v = baseline_softmax_detect(spec, TargetWeights::zeros(spec), x, 0.9);
  CHECK_FALSE(v.accepted());
}

TEST_CASE("operator queue persists flagged inputs") {
  const std::string bin = temp_path("sardino_test_queue.bin");
  const std::string csv = temp_path("sardino_test_queue.csv");
  std::filesystem::remove(bin);
  std::filesystem::remove(csv);
  const TargetNetSpec spec = mini_spec();
  {
    OperatorQueue q(bin, csv);
    Tensor x({spec.in_c, spec.in_h, spec.in_w});
    x.data[0] = 0.5f;
    const auto v = decide({2, 3, 3, 2}, 4, 0.5);
    q.push(7, 1, v, x);
    q.push(8, 0, v, x);
    CHECK(q.size() == 2);
  }
  CHECK(std::filesystem::exists(bin));
  CHECK(std::filesystem::file_size(bin) > 0);
  std::ifstream in(csv);
  std::string line;
  std::getline(in, line);  // header
  int rows = 0;
  while (std::getline(in, line)) {
    if (!line.empty()) ++rows;
  }
  CHECK(rows == 2);
  std::filesystem::remove(bin);
  std::filesystem::remove(csv);
}
