#pragma once

#include <cstddef>
#include <functional>
#include <vector>

// Direct loop transcriptions of the reference definitions, written
// independently of the library kernels. Maps are row-major (h, w, c).
namespace gccn::oracle {

struct Map {
  std::size_t h = 0, w = 0, c = 0;
  std::vector<double> v;

  double at(std::size_t y, std::size_t x, std::size_t ch) const { return v[(y * w + x) * c + ch]; }
};

// Valid convolution; kernel is (kh, kw, cin, cout). Each output sums over
// kernel rows, then kernel columns, then input channels, starting from zero.
Map conv2d(const Map& input, const std::vector<double>& kernel, std::size_t kh, std::size_t kw, std::size_t cout,
           std::size_t stride);

struct Pooled {
  Map out;
  std::vector<std::size_t> argmax;  // flat input index of each output cell
};

// 2x2 max-pool, first maximal cell in row-major window order wins.
Pooled maxpool2x2(const Map& input);

// (h, w, c) -> (h, w, 1)
Map collapse_max(const Map& input);
Map collapse_mean(const Map& input);

struct Box {
  std::size_t row, col, height, width;
};

// Patch boxes for a rows x cols grid, remainder rows/cols in the last patch.
std::vector<Box> patches(std::size_t h, std::size_t w, std::size_t rows, std::size_t cols);

// Scans every cell of every collapsed map and keeps the max of the cells that
// fall in each patch. Uses the deepest `layers` maps, shallowest first.
std::vector<double> extract_gc(const std::vector<Map>& maps, std::size_t rows, std::size_t cols, std::size_t layers,
                               bool channel_max);

// Scaled two-pass Frobenius norm.
double frobenius(const std::vector<double>& values);

// Central finite-difference gradient of f at x.
std::vector<double> numeric_gradient(const std::function<double(const std::vector<double>&)>& f,
                                     std::vector<double> x, double step);

}  // namespace gccn::oracle
