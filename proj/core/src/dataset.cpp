#include "sardino/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>

#include "sardino/errors.hpp"
#include "sardino/rng.hpp"

namespace sardino {

namespace {

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;

std::uint32_t read_be_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw FormatError("truncated IDX header");
  return (static_cast<std::uint32_t>(b[0]) << 24) |
         (static_cast<std::uint32_t>(b[1]) << 16) |
         (static_cast<std::uint32_t>(b[2]) << 8) | b[3];
}

void write_be_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

// 5x7 bitmap font rows, MSB-left in the low 5 bits.
// Digits 0-9 followed by letters A-J.
constexpr std::array<std::array<std::uint8_t, 7>, 20> kFont = {{
    {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E},  // 0
    {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E},  // 1
    {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F},  // 2
    {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E},  // 3
    {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02},  // 4
    {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E},  // 5
    {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E},  // 6
    {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08},  // 7
    {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E},  // 8
    {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C},  // 9
    {0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11},  // A
    {0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E},  // B
    {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E},  // C
    {0x1C, 0x12, 0x11, 0x11, 0x11, 0x12, 0x1C},  // D
    {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F},  // E
    {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10},  // F
    {0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F},  // G
    {0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11},  // H
    {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E},  // I
    {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C},  // J
}};

}  // namespace

Dataset Dataset::subset(std::size_t offset, std::size_t count) const {
  Dataset out;
  out.classes = classes;
  const std::size_t end = std::min(offset + count, images.size());
  for (std::size_t i = offset; i < end; ++i) {
    out.images.push_back(images[i]);
    out.labels.push_back(labels[i]);
  }
  return out;
}

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw FormatError("cannot open IDX images file: " + images_path);
  if (read_be_u32(img) != kImagesMagic) throw FormatError("bad IDX images magic");
  const std::uint32_t n = read_be_u32(img);
  const std::uint32_t rows = read_be_u32(img);
  const std::uint32_t cols = read_be_u32(img);

  std::ifstream lbl(labels_path, std::ios::binary);
  if (!lbl) throw FormatError("cannot open IDX labels file: " + labels_path);
  if (read_be_u32(lbl) != kLabelsMagic) throw FormatError("bad IDX labels magic");
  const std::uint32_t nl = read_be_u32(lbl);
  if (nl != n) throw FormatError("IDX image/label count mismatch");

  Dataset ds;
  std::vector<unsigned char> buf(static_cast<std::size_t>(rows) * cols);
  std::uint32_t max_label = 0;
  for (std::uint32_t i = 0; i < n; ++i) {
    img.read(reinterpret_cast<char*>(buf.data()),
             static_cast<std::streamsize>(buf.size()));
    if (!img) throw FormatError("truncated IDX image payload");
    Tensor t({1, rows, cols});
    for (std::size_t p = 0; p < buf.size(); ++p) {
      t.data[p] = static_cast<float>(buf[p]) / 255.0f;
    }
    ds.images.push_back(std::move(t));
    unsigned char y = 0;
    lbl.read(reinterpret_cast<char*>(&y), 1);
    if (!lbl) throw FormatError("truncated IDX label payload");
    ds.labels.push_back(y);
    max_label = std::max<std::uint32_t>(max_label, y);
  }
  ds.classes = std::max<std::uint32_t>(10, max_label + 1);
  return ds;
}

void write_idx(const Dataset& ds, const std::string& images_path,
               const std::string& labels_path) {
  if (ds.images.empty()) throw BadArgument("write_idx: empty dataset");
  const std::uint32_t rows = ds.images[0].shape[1];
  const std::uint32_t cols = ds.images[0].shape[2];
  std::ofstream img(images_path, std::ios::binary);
  write_be_u32(img, kImagesMagic);
  write_be_u32(img, static_cast<std::uint32_t>(ds.images.size()));
  write_be_u32(img, rows);
  write_be_u32(img, cols);
  for (const auto& t : ds.images) {
    for (float v : t.data) {
      const float c = std::clamp(v, 0.0f, 1.0f);
      const unsigned char b = static_cast<unsigned char>(std::lround(c * 255.0f));
      img.write(reinterpret_cast<const char*>(&b), 1);
    }
  }
  std::ofstream lbl(labels_path, std::ios::binary);
  write_be_u32(lbl, kLabelsMagic);
  write_be_u32(lbl, static_cast<std::uint32_t>(ds.labels.size()));
  for (auto y : ds.labels) {
    const unsigned char b = static_cast<unsigned char>(y);
    lbl.write(reinterpret_cast<const char*>(&b), 1);
  }
}

Dataset make_glyph_dataset(GlyphKind kind, std::size_t count, std::uint64_t seed) {
  Dataset ds;
  ds.classes = 10;
  Rng rng(seed);
  const std::size_t base = kind == GlyphKind::Digits ? 0 : 10;
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint32_t label = static_cast<std::uint32_t>(rng.next_below(10));
    const auto& glyph = kFont[base + label];

    // Randomized rendering parameters
    const double scale_x = 3.2 + rng.next_uniform() * 1.2;  // px per font col
    const double scale_y = 2.4 + rng.next_uniform() * 0.8;  // px per font row
    const double off_x = 2.0 + rng.next_uniform() * (28.0 - 5.0 * scale_x - 4.0);
    const double off_y = 2.0 + rng.next_uniform() * (28.0 - 7.0 * scale_y - 4.0);
    const double shear = (rng.next_uniform() - 0.5) * 0.3;
    const double intensity = 0.65 + rng.next_uniform() * 0.35;
    const double noise = 0.04;

    Tensor t({1, 28, 28});
    for (std::uint32_t py = 0; py < 28; ++py) {
      for (std::uint32_t px = 0; px < 28; ++px) {
        // map pixel back into font space (inverse shear on x)
        const double fy = (py - off_y) / scale_y;
        const double fx = (px - off_x - shear * (py - off_y)) / scale_x;
        double v = 0.0;
        const int iy = static_cast<int>(std::floor(fy));
        const int ix = static_cast<int>(std::floor(fx));
        if (iy >= 0 && iy < 7 && ix >= 0 && ix < 5) {
          if ((glyph[static_cast<std::size_t>(iy)] >> (4 - ix)) & 1) {
            v = intensity;
          }
        }
        v += rng.next_gaussian() * noise;
        t.data[static_cast<std::size_t>(py) * 28 + px] =
            static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
    // one-pass 3x3 box blur softens the hard glyph edges
    Tensor blurred = t;
    for (int py = 0; py < 28; ++py) {
      for (int px = 0; px < 28; ++px) {
        double acc = 0.0;
        int cnt = 0;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int y = py + dy, x = px + dx;
            if (y >= 0 && y < 28 && x >= 0 && x < 28) {
              acc += t.data[static_cast<std::size_t>(y) * 28 + x];
              ++cnt;
            }
          }
        }
        blurred.data[static_cast<std::size_t>(py) * 28 + px] =
            static_cast<float>(acc / cnt);
      }
    }
    ds.images.push_back(std::move(blurred));
    ds.labels.push_back(label);
  }
  return ds;
}

}  // namespace sardino
