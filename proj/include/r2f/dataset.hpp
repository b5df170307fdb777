#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "r2f/tensor.hpp"

namespace r2f {

/// Labeled image set. Pixels are stored centered: q = raw_u8 - 128, so the
/// quantized value q * 2^-7 spans [-1, 0.9922].
struct Dataset {
  TensorQ images;  // (N, C, H, W)
  std::vector<uint16_t> labels;
  int classes = 10;

  size_t size() const { return labels.size(); }
};

/// IDX binary pair: images file magic 0x00000803 (u8, dims n/rows/cols),
/// labels file magic 0x00000801. Multi-byte fields big-endian, single
/// channel. Raw pixels are u8; the loader centers them by subtracting 128.
Dataset load_idx(const std::string& images_path,
                 const std::string& labels_path);
void save_idx(const Dataset& d, const std::string& images_path,
              const std::string& labels_path);

/// Seeded synthetic grayscale set: each class paints a horizontal and a
/// vertical bright band at class-dependent positions, with +-1 pixel jitter
/// and per-pixel noise. Balanced classes, deterministic for a fixed seed.
Dataset synth_dataset(size_t n, uint64_t seed, int classes = 10, int hw = 28);

Dataset slice(const Dataset& d, size_t start, size_t count);

/// Gathers the given rows into one batch tensor.
TensorQ batch_images(const Dataset& d, size_t start, size_t count);
std::vector<uint16_t> batch_labels(const Dataset& d, size_t start,
                                   size_t count);

}  // namespace r2f
