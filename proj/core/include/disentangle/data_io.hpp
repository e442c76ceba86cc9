#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Core>

#include "disentangle/generative.hpp"

namespace disent {

// Raw IDX image container (the MNIST distribution format): big-endian
// header, magic 0x00000803, then count/rows/cols and the pixel bytes.
struct IdxImages {
  std::uint32_t count = 0;
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::vector<std::uint8_t> pixels;  // count * rows * cols, row-major

  const std::uint8_t* image(std::size_t i) const {
    return pixels.data() + i * static_cast<std::size_t>(rows) * cols;
  }
};

// Parses an IDX image file. Rejects label files (magic 0x00000801) with a
// distinct message, and enforces the exact byte count.
IdxImages load_idx_images(const std::filesystem::path& path);

// Inverse of load_idx_images; the round trip is byte-identical.
void save_idx_images(const IdxImages& imgs, const std::filesystem::path& path);

// Bundled stand-in for MNIST so everything runs offline: 64 deterministic
// 28x28 seven-segment glyphs (digit i % 10 with per-image jitter).
IdxImages synthetic_digits();

// One 28x28 digit pasted onto a 40x40 zero canvas per example. The paste
// corner comes from a continuous position p = A s + eta through
// paste_offset, and (s, p) are kept for inference-error evaluation.
struct CanvasDataset {
  Eigen::MatrixXd images;     // n x 1600, rows are 40x40 row-major
  Eigen::MatrixXd sources;    // n x 2
  Eigen::MatrixXd positions;  // n x 2
  Eigen::Matrix<int, Eigen::Dynamic, 2> offsets;  // paste corner (col, row)
  std::vector<std::uint32_t> digit_index;
  MixingModel mixing;
};

// The localization mixing matrix, entries 2*delta_ij + 0.73.
MixingModel localization_mixing();

// Continuous position -> integer paste offset: clamp(round(6 + p), 0, 12).
// The bound 12 = 40 - 28 keeps the glyph inside the canvas.
int paste_offset(double p);

CanvasDataset make_localization_dataset(const IdxImages& digits, int n,
                                        std::uint64_t seed);

struct Standardized {
  Eigen::MatrixXd data;
  double mean = 0.0;
  double std_dev = 1.0;
};

// Dataset-global affine rescale to mean 0, standard deviation 1. A single
// scalar mean/std over all entries (per-pixel statistics blow up on the
// always-zero border). Degenerate inputs come back as zeros with std 1.
Standardized standardize(const Eigen::MatrixXd& data);

// Persists as dir/dataset.csv (sources, positions, offsets, digit index)
// plus dir/images.bin (row-major float64, little-endian).
void save_canvas_dataset(const CanvasDataset& ds,
                         const std::filesystem::path& dir);
CanvasDataset load_canvas_dataset(const std::filesystem::path& dir);

}  // namespace disent
