#include "sardino/tensor.hpp"

#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>

#include "sardino/errors.hpp"

namespace sardino {

namespace {

// All on-disk integers are little-endian; this codebase only targets
// little-endian hosts, so raw copies suffice.
void write_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint32_t read_u32(std::istream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!in) throw FormatError("truncated tensor blob");
  return v;
}

}  // namespace

bool Tensor::all_finite() const {
  for (float v : data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

bool operator==(const Tensor& a, const Tensor& b) {
  return a.shape == b.shape && a.data == b.data;
}

void write_tensor_blob(std::ostream& out, const Tensor& t) {
  write_u32(out, static_cast<std::uint32_t>(t.shape.size()));
  for (auto d : t.shape) write_u32(out, d);
  out.write(reinterpret_cast<const char*>(t.data.data()),
            static_cast<std::streamsize>(t.data.size() * sizeof(float)));
}

Tensor read_tensor_blob(std::istream& in) {
  const std::uint32_t rank = read_u32(in);
  if (rank > 8) throw FormatError("implausible tensor rank");
  std::vector<std::uint32_t> shape(rank);
  for (auto& d : shape) d = read_u32(in);
  Tensor t(std::move(shape));
  in.read(reinterpret_cast<char*>(t.data.data()),
          static_cast<std::streamsize>(t.data.size() * sizeof(float)));
  if (!in) throw FormatError("truncated tensor payload");
  return t;
}

}  // namespace sardino
