#include "sardino/hypernet.hpp"

#include <chrono>
#include <cstring>
#include <fstream>

#include "sardino/errors.hpp"

namespace sardino {

namespace {

constexpr char kMagic[4] = {'S', 'R', 'D', 'N'};
constexpr std::uint32_t kFormatVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint32_t read_u32(std::istream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!in) throw FormatError("truncated model file");
  return v;
}

std::uint64_t now_unix_ms() {
  using namespace std::chrono;
  return static_cast<std::uint64_t>(
      duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count());
}

}  // namespace

void HyperNetParams::validate() const {
  target.validate();
  encoder_spec.validate();
  if (encoder_spec.widths.front() != kLatentInputWidth) {
    throw SpecMismatch("encoder input width must be 256");
  }
  if (encoder_spec.widths.back() != kLatentCodeWidth * TargetNetSpec::layer_count) {
    throw SpecMismatch("encoder output width must be 64 * layer count");
  }
  if (generator_specs.size() != TargetNetSpec::layer_count ||
      generators.size() != TargetNetSpec::layer_count) {
    throw SpecMismatch("need one generator per target layer");
  }
  for (std::uint32_t i = 0; i < TargetNetSpec::layer_count; ++i) {
    generator_specs[i].validate();
    if (generator_specs[i].widths.front() != kLatentCodeWidth) {
      throw SpecMismatch("generator input width must be 64");
    }
    if (generator_specs[i].widths.back() != target.layer_param_count(i)) {
      throw SpecMismatch("generator output width != target layer param count");
    }
  }
}

std::size_t HyperNetParams::param_count() const {
  std::size_t n = encoder.param_count();
  for (const auto& g : generators) n += g.param_count();
  return n;
}

std::vector<std::vector<float>*> HyperNetParams::param_buffers() {
  std::vector<std::vector<float>*> out;
  for (std::size_t l = 0; l < encoder.weights.size(); ++l) {
    out.push_back(&encoder.weights[l].data);
    out.push_back(&encoder.biases[l].data);
  }
  for (auto& g : generators) {
    for (std::size_t l = 0; l < g.weights.size(); ++l) {
      out.push_back(&g.weights[l].data);
      out.push_back(&g.biases[l].data);
    }
  }
  return out;
}

std::vector<const std::vector<float>*> HyperNetParams::param_buffers() const {
  std::vector<const std::vector<float>*> out;
  for (std::size_t l = 0; l < encoder.weights.size(); ++l) {
    out.push_back(&encoder.weights[l].data);
    out.push_back(&encoder.biases[l].data);
  }
  for (const auto& g : generators) {
    for (std::size_t l = 0; l < g.weights.size(); ++l) {
      out.push_back(&g.weights[l].data);
      out.push_back(&g.biases[l].data);
    }
  }
  return out;
}

HyperNetParams HyperNetParams::init(const TargetNetSpec& target,
                                    std::uint64_t seed) {
  target.validate();
  HyperNetParams hn;
  hn.target = target;
  hn.encoder_spec.widths = {kLatentInputWidth, 64, 64,
                            kLatentCodeWidth * TargetNetSpec::layer_count};
  Rng rng(seed);
  hn.encoder = MlpParams::init(hn.encoder_spec, rng);
  for (std::uint32_t i = 0; i < TargetNetSpec::layer_count; ++i) {
    MlpSpec gs;
    gs.widths = {kLatentCodeWidth, 64, 64,
                 static_cast<std::uint32_t>(target.layer_param_count(i))};
    hn.generator_specs.push_back(gs);
    // Small output scale so generated weights start near typical
    // trained-CNN magnitudes rather than O(1).
    hn.generators.push_back(MlpParams::init(gs, rng, 0.05f));
  }
  return hn;
}

Tensor sample_latent_input(std::uint64_t seed) {
  Rng rng(seed);
  Tensor z({kLatentInputWidth});
  for (auto& v : z.data) v = static_cast<float>(rng.next_gaussian());
  return z;
}

LatentCode encode(const HyperNetParams& hn, const Tensor& z) {
  if (z.numel() != kLatentInputWidth) {
    throw SpecMismatch("encode: latent input must be 256-wide");
  }
  const Tensor raw = mlp_forward(hn.encoder_spec, hn.encoder, z);
  LatentCode code;
  for (std::uint32_t i = 0; i < TargetNetSpec::layer_count; ++i) {
    code.codes.emplace_back(raw.data.begin() + i * kLatentCodeWidth,
                            raw.data.begin() + (i + 1) * kLatentCodeWidth);
  }
  return code;
}

TargetWeights generate_weights(const HyperNetParams& hn, const Tensor& z) {
  hn.validate();
  const LatentCode code = encode(hn, z);
  TargetWeights w = TargetWeights::zeros(hn.target);
  auto blocks = w.blocks();
  for (std::uint32_t i = 0; i < TargetNetSpec::layer_count; ++i) {
    Tensor c({kLatentCodeWidth}, code.codes[i]);
    const Tensor flat = mlp_forward(hn.generator_specs[i], hn.generators[i], c);
    Tensor& wt = *blocks[2 * i];      // layer weights
    Tensor& bias = *blocks[2 * i + 1];
    if (flat.numel() != wt.numel() + bias.numel()) {
      throw SpecMismatch("generator output width mismatch");
    }
    std::memcpy(wt.data.data(), flat.data.data(), wt.numel() * sizeof(float));
    std::memcpy(bias.data.data(), flat.data.data() + wt.numel(),
                bias.numel() * sizeof(float));
  }
  return w;
}

SeedLog::SeedLog(std::string path) : path_(std::move(path)) {}

void SeedLog::append(const SeedRecord& rec) {
  records_.push_back(rec);
  if (!path_.empty()) {
    std::ofstream out(path_, std::ios::binary | std::ios::app);
    out.write(reinterpret_cast<const char*>(&rec.frame_id), 8);
    out.write(reinterpret_cast<const char*>(&rec.base_seed), 8);
    out.write(reinterpret_cast<const char*>(&rec.ensemble_size), 2);
    out.write(reinterpret_cast<const char*>(&rec.unix_ms), 8);
  }
}

void SeedLog::export_csv(const std::string& path) const {
  std::ofstream out(path);
  out << "frame_id,base_seed,ensemble_size,unix_ms\n";
  for (const auto& r : records_) {
    out << r.frame_id << ',' << r.base_seed << ','
        << r.ensemble_size << ',' << r.unix_ms << '\n';
  }
}

std::vector<SeedRecord> SeedLog::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("seed log not found: " + path);
  std::vector<SeedRecord> out;
  while (true) {
    SeedRecord r;
    in.read(reinterpret_cast<char*>(&r.frame_id), 8);
    if (in.gcount() == 0) break;
    in.read(reinterpret_cast<char*>(&r.base_seed), 8);
    in.read(reinterpret_cast<char*>(&r.ensemble_size), 2);
    in.read(reinterpret_cast<char*>(&r.unix_ms), 8);
    if (!in) throw FormatError("truncated seed log record");
    out.push_back(r);
  }
  return out;
}

std::vector<TargetWeights> generate_ensemble(const HyperNetParams& hn,
                                             std::uint64_t base_seed,
                                             std::uint32_t n,
                                             std::uint64_t frame_id,
                                             SeedLog* log) {
  if (n == 0) throw BadArgument("generate_ensemble: N must be >= 1");
  std::vector<TargetWeights> members;
  members.reserve(n);
  for (std::uint32_t j = 0; j < n; ++j) {
    members.push_back(
        generate_weights(hn, sample_latent_input(split_seed(base_seed, j))));
  }
  if (log) {
    log->append({frame_id, base_seed, static_cast<std::uint16_t>(n), now_unix_ms()});
  }
  return members;
}

void save_hypernet(const HyperNetParams& hn, const std::string& path) {
  hn.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open model file for writing: " + path);
  out.write(kMagic, 4);
  write_u32(out, kFormatVersion);
  write_u32(out, hn.target.in_h);
  write_u32(out, hn.target.in_w);
  write_u32(out, hn.target.in_c);
  write_u32(out, hn.target.classes);
  write_u32(out, hn.target.conv_filters);
  write_u32(out, hn.target.kernel);
  auto write_mlp = [&](const MlpSpec& spec, const MlpParams& p) {
    write_u32(out, static_cast<std::uint32_t>(spec.widths.size()));
    for (auto w : spec.widths) write_u32(out, w);
    for (std::size_t l = 0; l < p.weights.size(); ++l) {
      write_tensor_blob(out, p.weights[l]);
      write_tensor_blob(out, p.biases[l]);
    }
  };
  write_mlp(hn.encoder_spec, hn.encoder);
  for (std::uint32_t i = 0; i < TargetNetSpec::layer_count; ++i) {
    write_mlp(hn.generator_specs[i], hn.generators[i]);
  }
}

HyperNetParams load_hypernet(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open model file: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw FormatError("bad model magic");
  }
  const std::uint32_t version = read_u32(in);
  if (version != kFormatVersion) throw FormatError("unsupported model version");
  HyperNetParams hn;
  hn.target.in_h = read_u32(in);
  hn.target.in_w = read_u32(in);
  hn.target.in_c = read_u32(in);
  hn.target.classes = read_u32(in);
  hn.target.conv_filters = read_u32(in);
  hn.target.kernel = read_u32(in);
  auto read_mlp = [&](MlpSpec& spec, MlpParams& p) {
    const std::uint32_t nw = read_u32(in);
    if (nw < 3 || nw > 64) throw FormatError("bad MLP spec in model file");
    spec.widths.resize(nw);
    for (auto& w : spec.widths) w = read_u32(in);
    p.weights.clear();
    p.biases.clear();
    for (std::size_t l = 0; l + 1 < nw; ++l) {
      p.weights.push_back(read_tensor_blob(in));
      p.biases.push_back(read_tensor_blob(in));
    }
  };
  read_mlp(hn.encoder_spec, hn.encoder);
  hn.generator_specs.resize(TargetNetSpec::layer_count);
  hn.generators.resize(TargetNetSpec::layer_count);
  for (std::uint32_t i = 0; i < TargetNetSpec::layer_count; ++i) {
    read_mlp(hn.generator_specs[i], hn.generators[i]);
  }
  hn.validate();
  return hn;
}

}  // namespace sardino
