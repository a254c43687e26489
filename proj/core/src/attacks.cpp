#include "sardino/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "sardino/ensemble.hpp"
#include "sardino/errors.hpp"
#include "sardino/rng.hpp"

namespace sardino {

namespace {

double l2_distance(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    const double d = static_cast<double>(a.data[i]) - b.data[i];
    s += d * d;
  }
  return std::sqrt(s);
}

bool fools_majority(const TargetNetSpec& spec,
                    const std::vector<TargetWeights>& members, const Tensor& x,
                    std::uint32_t y) {
  const auto labels = ensemble_classify(spec, members, x);
  return decide(labels, spec.classes, 0.5).label != y;
}

}  // namespace

AttackResult fgsm(const TargetNetSpec& spec, const TargetWeights& surrogate,
                  const Tensor& x, std::uint32_t y, double eps) {
  if (eps < 0.0) throw BadArgument("fgsm: eps must be >= 0");
  const Tensor g = grad_input(spec, surrogate, x, y);
  AttackResult r;
  r.adversarial = x;
  for (std::size_t i = 0; i < x.numel(); ++i) {
    const float s = g.data[i] > 0.0f ? 1.0f : (g.data[i] < 0.0f ? -1.0f : 0.0f);
    r.adversarial.data[i] =
        std::clamp(x.data[i] + static_cast<float>(eps) * s, 0.0f, 1.0f);
  }
  r.perturbation_norm = l2_distance(r.adversarial, x);
  r.surrogate_fooled = fools_majority(spec, {surrogate}, r.adversarial, y);
  return r;
}

AttackResult surrogate_ensemble_attack(const TargetNetSpec& spec,
                                       const std::vector<TargetWeights>& surrogates,
                                       const Tensor& x, std::uint32_t y,
                                       double eps, std::uint32_t steps,
                                       double step_size) {
  if (surrogates.empty()) {
    throw BadArgument("surrogate_ensemble_attack: need >= 1 surrogate member");
  }
  AttackResult r;
  r.adversarial = x;
  for (std::uint32_t s = 0; s < steps; ++s) {
    Tensor g(x.shape);
    for (const auto& m : surrogates) {
      const Tensor gm = grad_input(spec, m, r.adversarial, y);
      for (std::size_t i = 0; i < g.numel(); ++i) g.data[i] += gm.data[i];
    }
    for (std::size_t i = 0; i < x.numel(); ++i) {
      const float sg = g.data[i] > 0.0f ? 1.0f : (g.data[i] < 0.0f ? -1.0f : 0.0f);
      float v = r.adversarial.data[i] + static_cast<float>(step_size) * sg;
      v = std::clamp(v, x.data[i] - static_cast<float>(eps),
                     x.data[i] + static_cast<float>(eps));
      r.adversarial.data[i] = std::clamp(v, 0.0f, 1.0f);
    }
  }
  r.perturbation_norm = l2_distance(r.adversarial, x);
  r.surrogate_fooled = fools_majority(spec, surrogates, r.adversarial, y);
  return r;
}

std::vector<double> DefenderConfig::default_threshold_sweep() {
  std::vector<double> out;
  for (int i = 0; i <= 10; ++i) out.push_back(0.50 + 0.05 * i);
  return out;
}

std::vector<DefenseCurvePoint> evaluate_defense(const DefenderConfig& config,
                                                const Dataset& clean,
                                                const AttackFn& attack) {
  if (!config.hypernet) throw BadConfig("evaluate_defense: hypernet required");
  const auto thresholds = config.thresholds.empty()
                              ? DefenderConfig::default_threshold_sweep()
                              : config.thresholds;
  const TargetNetSpec& spec = config.hypernet->target;

  std::vector<TargetWeights> static_members;
  if (config.renewal == RenewalMode::Static) {
    static_members = generate_ensemble(*config.hypernet, config.base_seed,
                                       config.ensemble_size);
  }

  // Per-sample (consistency, majority correct?) for adversarial and
  // clean passes; the threshold sweep then reuses these.
  struct Outcome {
    double consistency;
    bool correct;
  };
  std::vector<Outcome> adv_outcomes, clean_outcomes;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    const Tensor& x = clean.images[i];
    const std::uint32_t y = clean.labels[i];
    const AttackResult atk = attack(x, y);

    std::vector<TargetWeights> fresh;
    const std::vector<TargetWeights>* members = &static_members;
    if (config.renewal == RenewalMode::PerInput) {
      fresh = generate_ensemble(*config.hypernet,
                                split_seed(config.base_seed, 1 + i), config.ensemble_size);
      members = &fresh;
    }
    const auto adv_verdict =
        decide(ensemble_classify(spec, *members, atk.adversarial), spec.classes, 0.5);
    adv_outcomes.push_back({adv_verdict.consistency, adv_verdict.label == y});

    std::vector<TargetWeights> fresh_clean;
    if (config.renewal == RenewalMode::PerInput) {
      fresh_clean = generate_ensemble(
          *config.hypernet, split_seed(config.base_seed ^ 0xC1EA11ULL, 1 + i),
          config.ensemble_size);
      members = &fresh_clean;
    }
    const auto clean_verdict =
        decide(ensemble_classify(spec, *members, x), spec.classes, 0.5);
    clean_outcomes.push_back({clean_verdict.consistency, clean_verdict.label == y});
  }

  std::vector<DefenseCurvePoint> out;
  for (double ts : thresholds) {
    std::size_t defended = 0, flagged_clean = 0;
    for (const auto& o : adv_outcomes) {
      const bool flagged = !(o.consistency > ts);
      if (flagged || o.correct) ++defended;
    }
    for (const auto& o : clean_outcomes) {
      if (!(o.consistency > ts)) ++flagged_clean;
    }
    out.push_back({ts,
                   static_cast<double>(defended) / adv_outcomes.size(),
                   static_cast<double>(flagged_clean) / clean_outcomes.size()});
  }
  return out;
}

std::vector<RocPoint> evaluate_ood(const DefenderConfig& config,
                                   const Dataset& in_distribution,
                                   const Dataset& ood) {
  if (!config.hypernet) throw BadConfig("evaluate_ood: hypernet required");
  if (in_distribution.size() == 0 || ood.size() == 0) {
    throw BadArgument("evaluate_ood: both sets must be non-empty");
  }
  const auto thresholds = config.thresholds.empty()
                              ? DefenderConfig::default_threshold_sweep()
                              : config.thresholds;
  const TargetNetSpec& spec = config.hypernet->target;

  std::vector<TargetWeights> static_members;
  if (config.renewal == RenewalMode::Static) {
    static_members = generate_ensemble(*config.hypernet, config.base_seed,
                                       config.ensemble_size);
  }
  auto consistencies = [&](const Dataset& ds, std::uint64_t salt) {
    std::vector<double> out;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      std::vector<TargetWeights> fresh;
      const std::vector<TargetWeights>* members = &static_members;
      if (config.renewal == RenewalMode::PerInput) {
        fresh = generate_ensemble(*config.hypernet,
                                  split_seed(config.base_seed ^ salt, 1 + i),
                                  config.ensemble_size);
        members = &fresh;
      }
      const auto labels = ensemble_classify(spec, *members, ds.images[i]);
      out.push_back(consistency(labels, spec.classes));
    }
    return out;
  };
  const auto id_cons = consistencies(in_distribution, 0x1D5E7ULL);
  const auto ood_cons = consistencies(ood, 0x00D5E7ULL);

  std::vector<RocPoint> out;
  for (double ts : thresholds) {
    std::size_t tp = 0, fp = 0;
    for (double c : ood_cons) {
      if (!(c > ts)) ++tp;
    }
    for (double c : id_cons) {
      if (!(c > ts)) ++fp;
    }
    out.push_back({ts, static_cast<double>(tp) / ood_cons.size(),
                   static_cast<double>(fp) / id_cons.size()});
  }
  return out;
}

std::vector<RocPoint> evaluate_ood_softmax_baseline(
    const TargetNetSpec& spec, const TargetWeights& w,
    const Dataset& in_distribution, const Dataset& ood,
    const std::vector<double>& thresholds) {
  auto max_probs = [&](const Dataset& ds) {
    std::vector<double> out;
    for (const auto& x : ds.images) {
      const auto p = softmax(target_forward(spec, w, x));
      out.push_back(*std::max_element(p.begin(), p.end()));
    }
    return out;
  };
  const auto id_p = max_probs(in_distribution);
  const auto ood_p = max_probs(ood);
  std::vector<RocPoint> out;
  for (double ts : thresholds) {
    std::size_t tp = 0, fp = 0;
    for (double p : ood_p) {
      if (p < ts) ++tp;
    }
    for (double p : id_p) {
      if (p < ts) ++fp;
    }
    out.push_back({ts, static_cast<double>(tp) / ood_p.size(),
                   static_cast<double>(fp) / id_p.size()});
  }
  return out;
}

double roc_auc(const std::vector<RocPoint>& points) {
  std::vector<std::pair<double, double>> pts;  // (fpr, tpr)
  pts.emplace_back(0.0, 0.0);
  for (const auto& p : points) pts.emplace_back(p.fpr, p.tpr);
  pts.emplace_back(1.0, 1.0);
  std::sort(pts.begin(), pts.end());
  double auc = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    auc += (pts[i].first - pts[i - 1].first) *
           (pts[i].second + pts[i - 1].second) * 0.5;
  }
  return auc;
}

void write_defense_csv(const std::vector<DefenseCurvePoint>& points,
                       const std::string& path) {
  std::ofstream out(path);
  out << "T_s,SDR,FPR\n";
  for (const auto& p : points) {
    out << p.threshold << ',' << p.sdr << ',' << p.fpr << '\n';
  }
}

void write_roc_csv(const std::vector<RocPoint>& points, const std::string& path) {
  std::ofstream out(path);
  out << "T_s,TPR,FPR\n";
  for (const auto& p : points) {
    out << p.threshold << ',' << p.tpr << ',' << p.fpr << '\n';
  }
}

}  // namespace sardino
