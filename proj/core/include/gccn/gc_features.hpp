#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "gccn/autodiff.hpp"

namespace gccn {

enum class ChannelCollapse { max, mean };

// How the global-context vector is combined with the flat CNN vector.
//   plain   -> cnn                      (GC disabled)
//   aug     -> cnn ++ gc
//   norm    -> cnn / ||gc||_F
//   augnorm -> (cnn ++ gc) / ||gc||_F
enum class FusionMode { plain, aug, norm, augnorm };

struct GcConfig {
  std::size_t grid_rows = 3;
  std::size_t grid_cols = 3;
  ChannelCollapse collapse = ChannelCollapse::max;
  // Number of encoder maps feeding the GC vector, taken from the deepest.
  std::size_t layers = 1;
  FusionMode mode = FusionMode::augnorm;

  friend bool operator==(const GcConfig&, const GcConfig&) = default;
};

// Norms below this value are replaced by it before dividing.
inline constexpr double kGcNormFloor = 1e-12;

std::string to_string(FusionMode mode);
std::string to_string(ChannelCollapse collapse);
FusionMode parse_fusion_mode(const std::string& text);
ChannelCollapse parse_collapse(const std::string& text);

struct PatchBox {
  std::size_t row, col, height, width;

  friend bool operator==(const PatchBox&, const PatchBox&) = default;
};

// Splits a height x width map into rows x cols disjoint patches in row-major
// patch order. Patches have floor(height/rows) rows; the last patch row takes
// the remainder, and likewise for columns.
std::vector<PatchBox> partition(std::size_t height, std::size_t width, std::size_t rows, std::size_t cols);

// Length of the GC vector and of the fused vector for a config.
std::size_t gc_size(const GcConfig& config);
std::size_t fused_size(std::size_t cnn_size, const GcConfig& config);

// Throws ConfigError unless the grid fits inside every selected map.
// `map_shapes` are the encoder's post-pool shapes (h, w, c) in depth order.
void validate(const GcConfig& config, std::span<const Shape> map_shapes);

// ---- single-sample form ----------------------------------------------------

// Where one GC element came from.
struct GcSource {
  std::size_t layer;  // index into the encoder's maps
  PatchBox patch;
};

struct GcVector {
  Tensor values;  // [layers * rows * cols]
  std::vector<GcSource> sources;
};

// [h, w, c] -> [h, w]
Tensor collapse_channels(const Tensor& map, ChannelCollapse method);

// `maps` holds every encoder map of one sample ([h, w, c]) in depth order; the
// deepest config.layers of them are used, shallowest first.
GcVector extract_gc(std::span<const Tensor> maps, const GcConfig& config);

double frobenius_norm(std::span<const double> values);

// 1-D cnn and gc vectors.
Tensor fuse(const Tensor& cnn, const Tensor& gc, FusionMode mode);

// ---- batched, differentiable form ----------------------------------------

// [n, h, w, c] -> [n, h, w]. Max routes the gradient to the first maximal channel.
Var collapse_channels(Var maps, ChannelCollapse method);

// [n, h, w] -> [n, rows * cols]; each output is the max of one patch and its
// gradient flows to the first maximal cell in row-major order.
Var patch_max(Var map, std::size_t rows, std::size_t cols);

// Encoder maps [n, h, w, c] in depth order -> [n, layers * rows * cols],
// concatenated layer-major then patch-major.
Var extract_gc(std::span<const Var> maps, const GcConfig& config);

// cnn [n, d], gc [n, g] -> fused rows per `mode`.
Var fuse(Var cnn, Var gc, FusionMode mode);

}  // namespace gccn
