#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "gccn/rng.hpp"
#include "gccn/tensor.hpp"

namespace gccn {

// Images of uniform shape (height, width, channels) with dense class labels.
struct Dataset {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 1;
  std::vector<Tensor> images;
  std::vector<int> labels;
  std::vector<std::string> class_names;

  std::size_t size() const { return images.size(); }
  std::size_t num_classes() const;
  Shape image_shape() const { return {height, width, channels}; }

  // Throws DataError unless images and labels agree, shapes are uniform and
  // labels cover 0..C-1 densely.
  void validate() const;

  // Stacks the selected images into [n, h, w, c].
  Tensor batch(std::span<const std::size_t> indices) const;

  // Sample indices of every class, in dataset order.
  std::vector<std::vector<std::size_t>> indices_by_class() const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

// ---- IDX container ---------------------------------------------------------

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

// Reads an IDX image file (u8 pixels scaled to [0,1]) and its label file.
Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path);

// Writes single-channel images as round(255 * v) bytes. Pixels must lie in
// [0,1] and labels in 0..255.
void write_idx(const Dataset& dataset, const std::filesystem::path& images_path,
               const std::filesystem::path& labels_path);

// <prefix>-images-idx3-ubyte / <prefix>-labels-idx1-ubyte
// Reads a tree of raw grayscale images: every subdirectory of `root` is one
// class (sorted by name) and every regular file in it holds exactly
// height * width unsigned bytes. Pixels are scaled to [0,1].
Dataset load_raw_directory(const std::filesystem::path& root, std::size_t height, std::size_t width);

std::filesystem::path idx_images_path(const std::string& prefix);
std::filesystem::path idx_labels_path(const std::string& prefix);

// ---- synthetic glyphs ------------------------------------------------------

struct GlyphOptions {
  std::size_t num_classes = 25;
  std::size_t samples_per_class = 40;
  std::size_t size = 32;
  std::uint64_t seed = 1;
  // Standard deviation of additive Gaussian pixel noise.
  double noise = 0.05;
  // Maximum per-sample displacement of the glyph and of each stroke vertex, in pixels.
  double jitter = 1.0;
};

// Every class is a random polyline skeleton drawn at one of four right-angle
// rotations. Samples of a class differ only by jitter and noise. Pixel values
// are quantised to multiples of 1/255 so the IDX round trip is exact.
Dataset gen_synthetic_glyphs(const GlyphOptions& options);

struct Separability {
  double inter_class = 0.0;  // mean L2 distance between samples of different classes
  double intra_class = 0.0;  // mean L2 distance between distinct samples of one class
};

Separability class_separability(const Dataset& dataset);

// ---- splits ----------------------------------------------------------------

// Partitions classes into two disjoint sets. round(train_fraction * C) classes
// go to the first set; each side is relabelled densely in original class order
// and keeps the original names.
std::pair<Dataset, Dataset> split_classes(const Dataset& dataset, double train_fraction, Rng& rng);

// Per-class split of samples: round(holdout_fraction * n_k) samples of every
// class go to the second set. Labels are unchanged.
std::pair<Dataset, Dataset> split_holdout(const Dataset& dataset, double holdout_fraction, Rng& rng);

}  // namespace gccn
