#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sardino/mlp.hpp"
#include "sardino/targetnet.hpp"

namespace sardino {

inline constexpr std::uint32_t kLatentInputWidth = 256;
inline constexpr std::uint32_t kLatentCodeWidth = 64;

/// Encoder + per-layer weight-generator parameters. The encoder maps a
/// 256-wide Gaussian draw to one 64-wide latent code per target layer;
/// generator i expands code i into layer i's weights-then-bias block.
struct HyperNetParams {
  TargetNetSpec target;
  MlpSpec encoder_spec;
  MlpParams encoder;
  std::vector<MlpSpec> generator_specs;   // one per target layer
  std::vector<MlpParams> generators;

  void validate() const;
  std::size_t param_count() const;

  /// Flat parameter buffers (encoder first, then generators in layer
  /// order, weights before biases per MLP layer). Order is part of the
  /// checkpoint contract.
  std::vector<std::vector<float>*> param_buffers();
  std::vector<const std::vector<float>*> param_buffers() const;

  /// Encoder: 256 -> 64 -> 64 -> 64*n. Generators: 64 -> 64 -> 64 -> layer size.
  static HyperNetParams init(const TargetNetSpec& target, std::uint64_t seed);
};

/// n latent codes, 64 values each.
struct LatentCode {
  std::vector<std::vector<float>> codes;
};

/// One audit-log entry; enough to rebuild the frame's ensemble bit-exactly.
struct SeedRecord {
  std::uint64_t frame_id = 0;
  std::uint64_t base_seed = 0;
  std::uint16_t ensemble_size = 0;
  std::uint64_t unix_ms = 0;
};

/// 256 N(0,1) values, deterministic per seed.
Tensor sample_latent_input(std::uint64_t seed);

LatentCode encode(const HyperNetParams& hn, const Tensor& z);

/// G(E(z)): full target weight set, deterministic per (params, z).
TargetWeights generate_weights(const HyperNetParams& hn, const Tensor& z);

/// Single-writer append-only seed audit log with CSV export.
class SeedLog {
 public:
  SeedLog() = default;
  explicit SeedLog(std::string path);  // empty path -> in-memory only

  void append(const SeedRecord& rec);
  const std::vector<SeedRecord>& records() const { return records_; }
  void export_csv(const std::string& path) const;

  static std::vector<SeedRecord> load(const std::string& path);

 private:
  std::string path_;
  std::vector<SeedRecord> records_;
};

/// Member j draws from split_seed(base_seed, j). Appends one record to
/// `log` when provided.
std::vector<TargetWeights> generate_ensemble(const HyperNetParams& hn,
                                             std::uint64_t base_seed,
                                             std::uint32_t n,
                                             std::uint64_t frame_id = 0,
                                             SeedLog* log = nullptr);

/// SRDN model checkpoint: magic, version, target spec, MLP specs, tensors.
void save_hypernet(const HyperNetParams& hn, const std::string& path);
HyperNetParams load_hypernet(const std::string& path);

}  // namespace sardino
