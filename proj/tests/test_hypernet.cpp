#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

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
  s.classes = 3;
  s.conv_filters = 2;
  s.kernel = 3;
  return s;
}

std::string temp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

bool weights_equal(const TargetWeights& a, const TargetWeights& b) {
  auto ba = a.blocks();
  auto bb = b.blocks();
  for (std::size_t i = 0; i < ba.size(); ++i) {
    if (!(*ba[i] == *bb[i])) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("latent input is 256-wide and deterministic per seed") {
  const Tensor a = sample_latent_input(99);
  const Tensor b = sample_latent_input(99);
  const Tensor c = sample_latent_input(100);
  CHECK(a.numel() == kLatentInputWidth);
  CHECK(a == b);
  CHECK_FALSE(a == c);
}

TEST_CASE("latent input pool is standard normal") {
  // 400 draws x 256 values = 102,400 samples pooled.
  double sum = 0.0, sum_sq = 0.0;
  const std::size_t draws = 400;
  for (std::size_t s = 0; s < draws; ++s) {
    const Tensor z = sample_latent_input(1000 + s);
    for (float v : z.data) {
      sum += v;
      sum_sq += static_cast<double>(v) * v;
    }
  }
  const double n = static_cast<double>(draws * kLatentInputWidth);
  const double mean = sum / n;
  const double var = sum_sq / n - mean * mean;
  CHECK(std::fabs(mean) < 0.02);
  CHECK(var > 0.97);
  CHECK(var < 1.03);
}

TEST_CASE("encoder emits one 64-wide code per target layer") {
  const HyperNetParams hn = HyperNetParams::init(mini_spec(), 5);
  const LatentCode code = encode(hn, sample_latent_input(1));
  CHECK(code.codes.size() == TargetNetSpec::layer_count);
  for (const auto& c : code.codes) CHECK(c.size() == kLatentCodeWidth);
}

TEST_CASE("generate_weights is deterministic and shape-correct") {
  const TargetNetSpec spec = mini_spec();
  const HyperNetParams hn = HyperNetParams::init(spec, 7);
  const Tensor z = sample_latent_input(3);
  const TargetWeights w1 = generate_weights(hn, z);
  const TargetWeights w2 = generate_weights(hn, z);
  CHECK(weights_equal(w1, w2));
  w1.validate(spec);
  CHECK(w1.param_count() == spec.total_param_count());

  // different z -> different weights
  const TargetWeights w3 = generate_weights(hn, sample_latent_input(4));
  CHECK_FALSE(weights_equal(w1, w3));
}

TEST_CASE("ensemble members replay from split seeds") {
  const HyperNetParams hn = HyperNetParams::init(mini_spec(), 11);
  const std::uint64_t base = 0xDEADBEEFULL;
  const auto members = generate_ensemble(hn, base, 5);
  REQUIRE(members.size() == 5);
  for (std::uint32_t j = 0; j < 5; ++j) {
    const TargetWeights replay =
        generate_weights(hn, sample_latent_input(split_seed(base, j)));
    CHECK(weights_equal(members[j], replay));
  }
  CHECK_THROWS_AS(generate_ensemble(hn, base, 0), BadArgument);
}

TEST_CASE("seed log binary records are 26 bytes and round trip") {
  const std::string path = temp_path("sardino_test_seedlog.bin");
  std::filesystem::remove(path);
  {
    SeedLog log(path);
    log.append({1, 42, 20, 1700000000000ULL});
    log.append({2, 43, 100, 1700000000040ULL});
    log.append({3, 44, 7, 1700000000080ULL});
    CHECK(log.records().size() == 3);
  }
  CHECK(std::filesystem::file_size(path) == 3 * 26);  // within the 32-byte cap
  const auto recs = SeedLog::load(path);
  REQUIRE(recs.size() == 3);
  CHECK(recs[1].frame_id == 2);
  CHECK(recs[1].base_seed == 43);
  CHECK(recs[1].ensemble_size == 100);
  CHECK(recs[1].unix_ms == 1700000000040ULL);
  std::filesystem::remove(path);
}

TEST_CASE("seed log csv export") {
  const std::string path = temp_path("sardino_test_seedlog.csv");
  SeedLog log;
  log.append({9, 1234, 50, 5});
  log.export_csv(path);
  std::ifstream in(path);
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  CHECK(header == "frame_id,base_seed,ensemble_size,unix_ms");
  CHECK(row == "9,1234,50,5");
  std::filesystem::remove(path);
}

TEST_CASE("hypernet checkpoint round trip preserves generated weights") {
  const std::string path = temp_path("sardino_test_model.srdn");
  const HyperNetParams hn = HyperNetParams::init(mini_spec(), 21);
  save_hypernet(hn, path);
  const HyperNetParams back = load_hypernet(path);
  CHECK(back.param_count() == hn.param_count());
  const Tensor z = sample_latent_input(77);
  CHECK(weights_equal(generate_weights(hn, z), generate_weights(back, z)));
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_hypernet(path), FormatError);
}

TEST_CASE("init is deterministic per seed and validates") {
  const HyperNetParams a = HyperNetParams::init(mini_spec(), 33);
  const HyperNetParams b = HyperNetParams::init(mini_spec(), 33);
  const HyperNetParams c = HyperNetParams::init(mini_spec(), 34);
  a.validate();
  const Tensor z = sample_latent_input(8);
  CHECK(weights_equal(generate_weights(a, z), generate_weights(b, z)));
  CHECK_FALSE(weights_equal(generate_weights(a, z), generate_weights(c, z)));
}
