#include "sardino/ensemble.hpp"

#include <algorithm>
#include <fstream>

#include "sardino/dataset.hpp"
#include "sardino/errors.hpp"

namespace sardino {

std::vector<std::uint32_t> ensemble_classify(
    const TargetNetSpec& spec, const std::vector<TargetWeights>& members,
    const Tensor& x) {
  if (members.empty()) throw BadArgument("ensemble_classify: empty ensemble");
  std::vector<std::uint32_t> labels;
  labels.reserve(members.size());
  for (const auto& m : members) {
    labels.push_back(argmax(target_forward(spec, m, x)));
  }
  return labels;
}

double consistency(const std::vector<std::uint32_t>& labels,
                   std::uint32_t classes) {
  if (labels.empty()) throw BadArgument("consistency: empty label list");
  std::vector<std::uint32_t> hist(classes, 0);
  for (auto l : labels) {
    if (l >= classes) throw BadLabel("consistency: label out of range");
    ++hist[l];
  }
  const std::uint32_t mx = *std::max_element(hist.begin(), hist.end());
  return static_cast<double>(mx) / static_cast<double>(labels.size());
}

EnsembleVerdict decide(const std::vector<std::uint32_t>& labels,
                       std::uint32_t classes, double threshold) {
  if (labels.empty()) throw BadArgument("decide: empty label list");
  if (threshold < 0.5 || threshold > 1.0) {
    throw BadArgument("decide: threshold must be in [0.5, 1.0]");
  }
  EnsembleVerdict v;
  v.histogram.assign(classes, 0);
  for (auto l : labels) {
    if (l >= classes) throw BadLabel("decide: label out of range");
    ++v.histogram[l];
  }
  // lowest class index wins majority-label ties
  std::uint32_t best = 0;
  for (std::uint32_t c = 1; c < classes; ++c) {
    if (v.histogram[c] > v.histogram[best]) best = c;
  }
  v.label = best;
  v.consistency =
      static_cast<double>(v.histogram[best]) / static_cast<double>(labels.size());
  v.kind = v.consistency > threshold ? EnsembleVerdict::Kind::Accept
                                     : EnsembleVerdict::Kind::Flagged;
  return v;
}

ValidationResult validate_ensemble(const TargetNetSpec& spec,
                                   const std::vector<TargetWeights>& members,
                                   const Dataset& val, double min_accuracy) {
  if (val.size() == 0) throw BadArgument("validate_ensemble: empty validation set");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < val.size(); ++i) {
    const auto labels = ensemble_classify(spec, members, val.images[i]);
    const auto verdict = decide(labels, spec.classes, 0.5);
    if (verdict.label == val.labels[i]) ++correct;
  }
  ValidationResult r;
  r.accuracy = static_cast<double>(correct) / static_cast<double>(val.size());
  r.passed = r.accuracy >= min_accuracy;
  return r;
}

EnsembleVerdict baseline_softmax_detect(const TargetNetSpec& spec,
                                        const TargetWeights& w, const Tensor& x,
                                        double threshold) {
  if (threshold < 0.0 || threshold > 1.0) {
    throw BadArgument("baseline_softmax_detect: threshold must be in [0, 1]");
  }
  const Tensor logits = target_forward(spec, w, x);
  const auto probs = softmax(logits);
  EnsembleVerdict v;
  v.histogram.assign(spec.classes, 0);
  v.label = argmax(logits);
  v.histogram[v.label] = 1;
  v.consistency = *std::max_element(probs.begin(), probs.end());
  v.kind = v.consistency >= threshold ? EnsembleVerdict::Kind::Accept
                                      : EnsembleVerdict::Kind::Flagged;
  return v;
}

OperatorQueue::OperatorQueue(std::string bin_path, std::string csv_path)
    : bin_path_(std::move(bin_path)), csv_path_(std::move(csv_path)) {
  std::ofstream csv(csv_path_);
  csv << "frame_id,crop_index,consistency,majority_label,offset\n";
  std::ofstream(bin_path_, std::ios::binary).flush();
}

OperatorQueue::~OperatorQueue() = default;

void OperatorQueue::push(std::uint64_t frame_id, std::uint32_t crop_index,
                         const EnsembleVerdict& verdict, const Tensor& input) {
  std::ofstream bin(bin_path_, std::ios::binary | std::ios::app);
  const auto offset = static_cast<std::uint64_t>(bin.tellp());
  bin.write(reinterpret_cast<const char*>(&frame_id), 8);
  bin.write(reinterpret_cast<const char*>(&crop_index), 4);
  const float cons = static_cast<float>(verdict.consistency);
  bin.write(reinterpret_cast<const char*>(&cons), 4);
  const std::uint32_t hist_len = static_cast<std::uint32_t>(verdict.histogram.size());
  bin.write(reinterpret_cast<const char*>(&hist_len), 4);
  bin.write(reinterpret_cast<const char*>(verdict.histogram.data()),
            static_cast<std::streamsize>(hist_len * sizeof(std::uint32_t)));
  write_tensor_blob(bin, input);

  std::ofstream csv(csv_path_, std::ios::app);
  csv << frame_id << ',' << crop_index << ',' << verdict.consistency << ','
      << verdict.label << ',' << offset << '\n';
  ++count_;
}

}  // namespace sardino
