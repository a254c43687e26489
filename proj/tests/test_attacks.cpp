#include <doctest.h>

#include <cmath>
#include <vector>

#include "sardino/attacks.hpp"
#include "sardino/dataset.hpp"
#include "sardino/ensemble.hpp"
#include "sardino/errors.hpp"
#include "sardino/hypernet.hpp"
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

Tensor random_image(const TargetNetSpec& spec, Rng& rng) {
  Tensor x({spec.in_c, spec.in_h, spec.in_w});
  for (auto& v : x.data) v = static_cast<float>(rng.next_uniform());
  return x;
}

Dataset random_dataset(const TargetNetSpec& spec, std::size_t n,
                       std::uint64_t seed) {
  Dataset ds;
  ds.classes = spec.classes;
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    ds.images.push_back(random_image(spec, rng));
    ds.labels.push_back(static_cast<std::uint32_t>(rng.next_below(spec.classes)));
  }
  return ds;
}

}  // namespace

TEST_CASE("fgsm respects the eps box and the pixel range") {
  const TargetNetSpec spec = mini_spec();
  const HyperNetParams hn = HyperNetParams::init(spec, 2);
  const TargetWeights w = generate_weights(hn, sample_latent_input(1));
  Rng rng(3);
  for (int it = 0; it < 20; ++it) {
    const Tensor x = random_image(spec, rng);
    const double eps = 0.05 + 0.3 * rng.next_uniform();
    const auto r = fgsm(spec, w, x, static_cast<std::uint32_t>(it % spec.classes), eps);
    REQUIRE(r.adversarial.numel() == x.numel());
    for (std::size_t i = 0; i < x.numel(); ++i) {
      CHECK(std::fabs(r.adversarial.data[i] - x.data[i]) <= eps + 1e-6);
      CHECK(r.adversarial.data[i] >= 0.0f);
      CHECK(r.adversarial.data[i] <= 1.0f);
    }
    CHECK(r.perturbation_norm >= 0.0);
  }
  CHECK_THROWS_AS(fgsm(spec, w, random_image(spec, rng), 0, -0.1), BadArgument);
}

TEST_CASE("iterative surrogate attack stays projected every run") {
  const TargetNetSpec spec = mini_spec();
  const HyperNetParams hn = HyperNetParams::init(spec, 5);
  const auto surrogates = generate_ensemble(hn, 17, 4);
  Rng rng(9);
  for (int it = 0; it < 10; ++it) {
    const Tensor x = random_image(spec, rng);
    const double eps = 0.3;
    const auto r = surrogate_ensemble_attack(spec, surrogates, x,
                                             static_cast<std::uint32_t>(it % 4),
                                             eps, 8, eps / 4);
    for (std::size_t i = 0; i < x.numel(); ++i) {
      CHECK(std::fabs(r.adversarial.data[i] - x.data[i]) <= eps + 1e-6);
      CHECK(r.adversarial.data[i] >= 0.0f);
      CHECK(r.adversarial.data[i] <= 1.0f);
    }
    // deterministic: same inputs give the same perturbation
    const auto r2 = surrogate_ensemble_attack(spec, surrogates, x,
                                              static_cast<std::uint32_t>(it % 4),
                                              eps, 8, eps / 4);
    CHECK(r.adversarial == r2.adversarial);
  }
  CHECK_THROWS_AS(
      surrogate_ensemble_attack(spec, {}, random_image(spec, rng), 0, 0.3, 4, 0.1),
      BadArgument);
}

TEST_CASE("roc auc matches a hand-computed trapezoid") {
  // anchored at (0,0) and (1,1):
  // (0,0)->(0,0.5): 0, (0,0.5)->(0.5,1): 0.375, (0.5,1)->(1,1): 0.5
  std::vector<RocPoint> pts{{0.9, 0.5, 0.0}, {0.8, 1.0, 0.5}};
  CHECK(roc_auc(pts) == doctest::Approx(0.875).epsilon(1e-12));
  // random detector diagonal
  std::vector<RocPoint> diag{{0.5, 0.25, 0.25}, {0.6, 0.75, 0.75}};
  CHECK(roc_auc(diag) == doctest::Approx(0.5).epsilon(1e-12));
  // empty sweep: just the anchors
  CHECK(roc_auc({}) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("defense sweep matches a hand-counted oracle") {
  const TargetNetSpec spec = mini_spec();
  const HyperNetParams hn = HyperNetParams::init(spec, 13);
  const Dataset clean = random_dataset(spec, 20, 31);

  DefenderConfig cfg;
  cfg.hypernet = &hn;
  cfg.ensemble_size = 8;
  cfg.renewal = RenewalMode::Static;
  cfg.base_seed = 55;
  cfg.thresholds = {0.5, 0.75, 1.0};

  const auto members = generate_ensemble(hn, cfg.base_seed, cfg.ensemble_size);
  const auto surrogate = generate_ensemble(hn, 999, 4);
  AttackFn attack = [&](const Tensor& x, std::uint32_t y) {
    return surrogate_ensemble_attack(spec, surrogate, x, y, 0.3, 5, 0.075);
  };

  const auto curve = evaluate_defense(cfg, clean, attack);
  REQUIRE(curve.size() == 3);

  // independent per-threshold recount from raw verdicts
  for (const auto& point : curve) {
    std::size_t defended = 0, flagged_clean = 0;
    for (std::size_t i = 0; i < clean.size(); ++i) {
      const auto atk = attack(clean.images[i], clean.labels[i]);
      const auto adv_v =
          decide(ensemble_classify(spec, members, atk.adversarial), spec.classes, 0.5);
      const bool adv_flagged = !(adv_v.consistency > point.threshold);
      if (adv_flagged || adv_v.label == clean.labels[i]) ++defended;
      const auto clean_v =
          decide(ensemble_classify(spec, members, clean.images[i]), spec.classes, 0.5);
      if (!(clean_v.consistency > point.threshold)) ++flagged_clean;
    }
    CHECK(point.sdr == doctest::Approx(defended / 20.0).epsilon(1e-12));
    CHECK(point.fpr == doctest::Approx(flagged_clean / 20.0).epsilon(1e-12));
  }

  // raising the threshold can only flag more, never less
  for (std::size_t i = 1; i < curve.size(); ++i) {
    CHECK(curve[i].sdr >= curve[i - 1].sdr - 1e-12);
    CHECK(curve[i].fpr >= curve[i - 1].fpr - 1e-12);
  }
}

TEST_CASE("ood sweep endpoints flag everything at threshold 1") {
  const TargetNetSpec spec = mini_spec();
  const HyperNetParams hn = HyperNetParams::init(spec, 19);
  const Dataset id_set = random_dataset(spec, 10, 41);
  const Dataset ood_set = random_dataset(spec, 10, 42);
  DefenderConfig cfg;
  cfg.hypernet = &hn;
  cfg.ensemble_size = 6;
  cfg.renewal = RenewalMode::PerInput;
  cfg.base_seed = 77;
  cfg.thresholds = {0.5, 1.0};
  const auto roc = evaluate_ood(cfg, id_set, ood_set);
  REQUIRE(roc.size() == 2);
  // consistency can never strictly exceed 1.0: everything is flagged
  CHECK(roc[1].tpr == doctest::Approx(1.0));
  CHECK(roc[1].fpr == doctest::Approx(1.0));
  for (const auto& p : roc) {
    CHECK(p.tpr >= 0.0);
    CHECK(p.tpr <= 1.0);
    CHECK(p.fpr >= 0.0);
    CHECK(p.fpr <= 1.0);
  }
  // deterministic across calls
  const auto roc2 = evaluate_ood(cfg, id_set, ood_set);
  for (std::size_t i = 0; i < roc.size(); ++i) {
    CHECK(roc[i].tpr == roc2[i].tpr);
    CHECK(roc[i].fpr == roc2[i].fpr);
  }
}

TEST_CASE("softmax baseline roc uses max probability") {
  const TargetNetSpec spec = mini_spec();
  // constant confident member: high max-prob on every input
  TargetWeights w = TargetWeights::zeros(spec);
  w.dense_b.data[2] = 10.0f;
  const Dataset id_set = random_dataset(spec, 6, 51);
  const Dataset ood_set = random_dataset(spec, 6, 52);
  const auto roc =
      evaluate_ood_softmax_baseline(spec, w, id_set, ood_set, {0.5, 0.999999});
  REQUIRE(roc.size() == 2);
  // max softmax ~ 1.0 everywhere: nothing flagged at 0.5
  CHECK(roc[0].tpr == doctest::Approx(0.0));
  CHECK(roc[0].fpr == doctest::Approx(0.0));
}
