#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sardino/targetnet.hpp"

namespace sardino {

struct Dataset;  // dataset.hpp

/// Accept-with-label or flagged. The label is also recorded for
/// flagged inputs as the would-be majority.
struct EnsembleVerdict {
  enum class Kind { Accept, Flagged };
  Kind kind = Kind::Flagged;
  std::uint32_t label = 0;
  double consistency = 0.0;  // max vote count / N
  std::vector<std::uint32_t> histogram;

  bool accepted() const { return kind == Kind::Accept; }
};

/// One argmax label per member, member order preserved.
std::vector<std::uint32_t> ensemble_classify(
    const TargetNetSpec& spec, const std::vector<TargetWeights>& members,
    const Tensor& x);

/// Fraction of members voting for the majority label.
double consistency(const std::vector<std::uint32_t>& labels,
                   std::uint32_t classes);

/// Accept iff consistency strictly exceeds threshold. Majority-label
/// ties break to the lowest class index (recorded label only; a 0.5
/// tie always flags for thresholds >= 0.5).
EnsembleVerdict decide(const std::vector<std::uint32_t>& labels,
                       std::uint32_t classes, double threshold);

struct ValidationResult {
  bool passed = false;
  double accuracy = 0.0;
};

/// Majority-vote accuracy over a validation set vs. a floor; gates
/// whether a freshly generated ensemble is commissioned.
ValidationResult validate_ensemble(const TargetNetSpec& spec,
                                   const std::vector<TargetWeights>& members,
                                   const Dataset& val, double min_accuracy);

/// Single-DNN detector that accepts iff max softmax probability >= threshold.
EnsembleVerdict baseline_softmax_detect(const TargetNetSpec& spec,
                                        const TargetWeights& w, const Tensor& x,
                                        double threshold);

/// Append-only record store for flagged inputs awaiting operator
/// review: binary file with the raw tensors plus a CSV index.
class OperatorQueue {
 public:
  OperatorQueue(std::string bin_path, std::string csv_path);
  ~OperatorQueue();

  void push(std::uint64_t frame_id, std::uint32_t crop_index,
            const EnsembleVerdict& verdict, const Tensor& input);
  std::size_t size() const { return count_; }

 private:
  std::string bin_path_;
  std::string csv_path_;
  std::size_t count_ = 0;
};

}  // namespace sardino
