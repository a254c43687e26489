#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sardino/tensor.hpp"

namespace sardino {

/// Labeled image set; pixels already scaled to [0, 1].
struct Dataset {
  std::vector<Tensor> images;  // each [1][H][W]
  std::vector<std::uint32_t> labels;
  std::uint32_t classes = 10;

  std::size_t size() const { return images.size(); }
  Dataset subset(std::size_t offset, std::size_t count) const;
};

/// Standard IDX container pair (0x00000803 images / 0x00000801 labels),
/// big-endian header, u8 pixels scaled to [0, 1].
Dataset load_idx(const std::string& images_path, const std::string& labels_path);
void write_idx(const Dataset& ds, const std::string& images_path,
               const std::string& labels_path);

enum class GlyphKind {
  Digits,   // '0'..'9' — the in-distribution task
  Letters,  // 'A'..'J' — the out-of-distribution set
};

/// Deterministic 28x28 rendered-glyph dataset: a 5x7 bitmap font
/// scaled up with random placement, thickness, intensity, shear, and
/// pixel noise. Serves as the desk-scale stand-in where the real
/// handwritten corpora are unavailable offline.
Dataset make_glyph_dataset(GlyphKind kind, std::size_t count, std::uint64_t seed);

}  // namespace sardino
