#pragma once

#include <cstdint>
#include <iosfwd>
#include <numeric>
#include <vector>

namespace sardino {

/// Dense row-major f32 tensor. The workhorse value type for images,
/// perturbations, activations, and weight blocks.
struct Tensor {
  std::vector<std::uint32_t> shape;
  std::vector<float> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::uint32_t> s)
      : shape(std::move(s)), data(numel_of(shape), 0.0f) {}
  Tensor(std::vector<std::uint32_t> s, std::vector<float> d)
      : shape(std::move(s)), data(std::move(d)) {}

  std::size_t numel() const { return data.size(); }

  static std::size_t numel_of(const std::vector<std::uint32_t>& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
  }

  float* begin() { return data.data(); }
  float* end() { return data.data() + data.size(); }
  const float* begin() const { return data.data(); }
  const float* end() const { return data.data() + data.size(); }

  bool same_shape(const Tensor& other) const { return shape == other.shape; }

  /// True iff every element is finite.
  bool all_finite() const;
};

bool operator==(const Tensor& a, const Tensor& b);

/// Binary blob layout used inside model files:
/// rank (u32 LE), dims (u32 LE each), f32 LE payload.
void write_tensor_blob(std::ostream& out, const Tensor& t);
Tensor read_tensor_blob(std::istream& in);

}  // namespace sardino
