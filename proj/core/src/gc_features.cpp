#include "gccn/gc_features.hpp"

#include <cmath>

#include "gccn/error.hpp"
#include "gccn/ops.hpp"

namespace gccn {

std::string to_string(FusionMode mode) {
  switch (mode) {
    case FusionMode::plain: return "plain";
    case FusionMode::aug: return "aug";
    case FusionMode::norm: return "norm";
    case FusionMode::augnorm: return "augnorm";
  }
  return "?";
}

std::string to_string(ChannelCollapse collapse) { return collapse == ChannelCollapse::max ? "max" : "mean"; }

FusionMode parse_fusion_mode(const std::string& text) {
  if (text == "plain") return FusionMode::plain;
  if (text == "aug") return FusionMode::aug;
  if (text == "norm") return FusionMode::norm;
  if (text == "augnorm") return FusionMode::augnorm;
  throw ConfigError("unknown fusion mode '" + text + "' (plain|aug|norm|augnorm)");
}

ChannelCollapse parse_collapse(const std::string& text) {
  if (text == "max") return ChannelCollapse::max;
  if (text == "mean") return ChannelCollapse::mean;
  throw ConfigError("unknown channel collapse '" + text + "' (max|mean)");
}

std::vector<PatchBox> partition(std::size_t height, std::size_t width, std::size_t rows, std::size_t cols) {
  if (rows == 0 || cols == 0) throw ConfigError("partition: grid must be at least 1x1");
  if (rows > height || cols > width) {
    throw DimensionError("partition: grid " + std::to_string(rows) + "x" + std::to_string(cols) +
                         " is larger than map " + std::to_string(height) + "x" + std::to_string(width));
  }
  const std::size_t ph = height / rows, pw = width / cols;
  std::vector<PatchBox> out;
  out.reserve(rows * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      out.push_back({r * ph, c * pw, r + 1 == rows ? height - r * ph : ph, c + 1 == cols ? width - c * pw : pw});
    }
  }
  return out;
}

std::size_t gc_size(const GcConfig& config) {
  return config.mode == FusionMode::plain ? 0 : config.layers * config.grid_rows * config.grid_cols;
}

std::size_t fused_size(std::size_t cnn_size, const GcConfig& config) {
  switch (config.mode) {
    case FusionMode::plain:
    case FusionMode::norm: return cnn_size;
    case FusionMode::aug:
    case FusionMode::augnorm: return cnn_size + gc_size(config);
  }
  return cnn_size;
}

void validate(const GcConfig& config, std::span<const Shape> map_shapes) {
  if (config.grid_rows < 1 || config.grid_cols < 1) throw ConfigError("gc: grid must be at least 1x1");
  if (config.layers < 1 || config.layers > 3) throw ConfigError("gc: layers must be 1, 2 or 3");
  if (config.mode == FusionMode::plain) return;
  if (config.layers > map_shapes.size()) {
    throw ConfigError("gc: " + std::to_string(config.layers) + " layers requested but the encoder has " +
                      std::to_string(map_shapes.size()) + " blocks");
  }
  for (std::size_t l = map_shapes.size() - config.layers; l < map_shapes.size(); ++l) {
    const Shape& s = map_shapes[l];
    if (s[0] < config.grid_rows || s[1] < config.grid_cols) {
      throw ConfigError("gc: grid " + std::to_string(config.grid_rows) + "x" + std::to_string(config.grid_cols) +
                        " does not fit the " + std::to_string(s[0]) + "x" + std::to_string(s[1]) + " map of block " +
                        std::to_string(l + 1));
    }
  }
}

// ---- batched -----------------------------------------------------------------

Var collapse_channels(Var maps, ChannelCollapse method) {
  const Tensor& x = maps.value();
  if (x.rank() != 4) throw DimensionError("collapse_channels: expected [n,h,w,c], got " + shape_string(x.shape()));
  const std::size_t n = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
  const std::size_t cells = n * h * w;
  Tensor out(Shape{n, h, w});
  std::vector<std::size_t> winner;
  if (method == ChannelCollapse::max) {
    winner.resize(cells);
    for (std::size_t p = 0; p < cells; ++p) {
      std::size_t best = 0;
      for (std::size_t ch = 1; ch < c; ++ch) {
        if (x[p * c + ch] > x[p * c + best]) best = ch;
      }
      winner[p] = p * c + best;
      out[p] = x[winner[p]];
    }
  } else {
    for (std::size_t p = 0; p < cells; ++p) {
      double s = 0.0;
      for (std::size_t ch = 0; ch < c; ++ch) s += x[p * c + ch];
      out[p] = s / static_cast<double>(c);
    }
  }
  return maps.graph().record(std::move(out), {maps},
                             [maps, method, c, cells, winner = std::move(winner)](Graph& g, const Tensor& go) {
                               Tensor& gx = g.grad_buffer(maps);
                               if (method == ChannelCollapse::max) {
                                 for (std::size_t p = 0; p < cells; ++p) gx[winner[p]] += go[p];
                               } else {
                                 const double inv = 1.0 / static_cast<double>(c);
                                 for (std::size_t p = 0; p < cells; ++p) {
                                   for (std::size_t ch = 0; ch < c; ++ch) gx[p * c + ch] += go[p] * inv;
                                 }
                               }
                             });
}

Var patch_max(Var map, std::size_t rows, std::size_t cols) {
  const Tensor& x = map.value();
  if (x.rank() != 3) throw DimensionError("patch_max: expected [n,h,w], got " + shape_string(x.shape()));
  const std::size_t n = x.dim(0), h = x.dim(1), w = x.dim(2);
  const auto patches = partition(h, w, rows, cols);
  const std::size_t k = patches.size();
  Tensor out(Shape{n, k});
  std::vector<std::size_t> winner(n * k);
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t p = 0; p < k; ++p) {
      const PatchBox& box = patches[p];
      std::size_t best = (b * h + box.row) * w + box.col;
      for (std::size_t i = box.row; i < box.row + box.height; ++i) {
        for (std::size_t j = box.col; j < box.col + box.width; ++j) {
          const std::size_t idx = (b * h + i) * w + j;
          if (x[idx] > x[best]) best = idx;
        }
      }
      winner[b * k + p] = best;
      out[b * k + p] = x[best];
    }
  }
  return map.graph().record(std::move(out), {map}, [map, winner = std::move(winner)](Graph& g, const Tensor& go) {
    Tensor& gx = g.grad_buffer(map);
    for (std::size_t o = 0; o < winner.size(); ++o) gx[winner[o]] += go[o];
  });
}

Var extract_gc(std::span<const Var> maps, const GcConfig& config) {
  if (config.layers < 1 || config.layers > maps.size()) {
    throw ConfigError("extract_gc: " + std::to_string(config.layers) + " layers requested from " +
                      std::to_string(maps.size()) + " maps");
  }
  Var out;
  for (std::size_t l = maps.size() - config.layers; l < maps.size(); ++l) {
    Var part = patch_max(collapse_channels(maps[l], config.collapse), config.grid_rows, config.grid_cols);
    out = out.valid() ? concat_cols(out, part) : part;
  }
  return out;
}

Var fuse(Var cnn, Var gc, FusionMode mode) {
  if (cnn.value().rank() != 2) throw DimensionError("fuse: cnn must be [n,d], got " + shape_string(cnn.shape()));
  switch (mode) {
    case FusionMode::plain: return cnn;
    case FusionMode::aug: return concat_cols(cnn, gc);
    case FusionMode::norm: return div_rows(cnn, clamp_min(row_norm(gc), kGcNormFloor));
    case FusionMode::augnorm: return div_rows(concat_cols(cnn, gc), clamp_min(row_norm(gc), kGcNormFloor));
  }
  return cnn;
}

// ---- single sample -----------------------------------------------------------

Tensor collapse_channels(const Tensor& map, ChannelCollapse method) {
  if (map.rank() != 3) throw DimensionError("collapse_channels: expected [h,w,c], got " + shape_string(map.shape()));
  Graph g;
  Shape batched{1, map.dim(0), map.dim(1), map.dim(2)};
  Var out = collapse_channels(g.constant(map.reshaped(batched)), method);
  return out.value().reshaped({map.dim(0), map.dim(1)});
}

GcVector extract_gc(std::span<const Tensor> maps, const GcConfig& config) {
  Graph g;
  std::vector<Var> vars;
  for (const auto& m : maps) {
    if (m.rank() != 3) throw DimensionError("extract_gc: maps must be [h,w,c], got " + shape_string(m.shape()));
    vars.push_back(g.constant(m.reshaped({1, m.dim(0), m.dim(1), m.dim(2)})));
  }
  Var v = extract_gc(std::span<const Var>(vars), config);
  GcVector out;
  out.values = v.value().reshaped({v.value().size()});
  for (std::size_t l = maps.size() - config.layers; l < maps.size(); ++l) {
    for (const auto& box : partition(maps[l].dim(0), maps[l].dim(1), config.grid_rows, config.grid_cols)) {
      out.sources.push_back({l, box});
    }
  }
  return out;
}

double frobenius_norm(std::span<const double> values) {
  double s = 0.0;
  for (double v : values) s += std::abs(v) * std::abs(v);
  return std::sqrt(s);
}

Tensor fuse(const Tensor& cnn, const Tensor& gc, FusionMode mode) {
  if (cnn.rank() != 1 || gc.rank() != 1) throw DimensionError("fuse: expected 1-D vectors");
  Graph g;
  Var c = g.constant(cnn.reshaped({1, cnn.size()}));
  Var s = g.constant(gc.reshaped({1, gc.size()}));
  const Tensor& out = fuse(c, s, mode).value();
  return out.reshaped({out.size()});
}

}  // namespace gccn
