#include "gccn/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace gccn::oracle {

Map conv2d(const Map& in, const std::vector<double>& k, std::size_t kh, std::size_t kw, std::size_t cout,
           std::size_t stride) {
  Map out;
  out.h = (in.h - kh) / stride + 1;
  out.w = (in.w - kw) / stride + 1;
  out.c = cout;
  out.v.assign(out.h * out.w * cout, 0.0);
  for (std::size_t y = 0; y < out.h; ++y) {
    for (std::size_t x = 0; x < out.w; ++x) {
      for (std::size_t o = 0; o < cout; ++o) {
        double s = 0.0;
        for (std::size_t i = 0; i < kh; ++i) {
          for (std::size_t j = 0; j < kw; ++j) {
            for (std::size_t c = 0; c < in.c; ++c) {
              s += in.at(y * stride + i, x * stride + j, c) * k[((i * kw + j) * in.c + c) * cout + o];
            }
          }
        }
        out.v[(y * out.w + x) * cout + o] = s;
      }
    }
  }
  return out;
}

Pooled maxpool2x2(const Map& in) {
  Pooled p;
  p.out.h = in.h / 2;
  p.out.w = in.w / 2;
  p.out.c = in.c;
  p.out.v.resize(p.out.h * p.out.w * in.c);
  p.argmax.resize(p.out.v.size());
  for (std::size_t y = 0; y < p.out.h; ++y) {
    for (std::size_t x = 0; x < p.out.w; ++x) {
      for (std::size_t c = 0; c < in.c; ++c) {
        double best = -std::numeric_limits<double>::infinity();
        std::size_t where = 0;
        for (std::size_t dy = 0; dy < 2; ++dy) {
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const std::size_t idx = ((2 * y + dy) * in.w + 2 * x + dx) * in.c + c;
            if (in.v[idx] > best) {
              best = in.v[idx];
              where = idx;
            }
          }
        }
        const std::size_t o = (y * p.out.w + x) * in.c + c;
        p.out.v[o] = best;
        p.argmax[o] = where;
      }
    }
  }
  return p;
}

Map collapse_max(const Map& in) {
  Map out{in.h, in.w, 1, std::vector<double>(in.h * in.w)};
  for (std::size_t y = 0; y < in.h; ++y) {
    for (std::size_t x = 0; x < in.w; ++x) {
      double m = in.at(y, x, 0);
      for (std::size_t c = 1; c < in.c; ++c) m = std::max(m, in.at(y, x, c));
      out.v[y * in.w + x] = m;
    }
  }
  return out;
}

Map collapse_mean(const Map& in) {
  Map out{in.h, in.w, 1, std::vector<double>(in.h * in.w)};
  for (std::size_t y = 0; y < in.h; ++y) {
    for (std::size_t x = 0; x < in.w; ++x) {
      double s = 0.0;
      for (std::size_t c = 0; c < in.c; ++c) s += in.at(y, x, c);
      out.v[y * in.w + x] = s / static_cast<double>(in.c);
    }
  }
  return out;
}

std::vector<Box> patches(std::size_t h, std::size_t w, std::size_t rows, std::size_t cols) {
  std::vector<Box> out;
  const std::size_t ph = h / rows, pw = w / cols;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const std::size_t height = r + 1 == rows ? h - r * ph : ph;
      const std::size_t width = c + 1 == cols ? w - c * pw : pw;
      out.push_back({r * ph, c * pw, height, width});
    }
  }
  return out;
}

std::vector<double> extract_gc(const std::vector<Map>& maps, std::size_t rows, std::size_t cols, std::size_t layers,
                               bool channel_max) {
  std::vector<double> out;
  for (std::size_t l = maps.size() - layers; l < maps.size(); ++l) {
    const Map flat = channel_max ? collapse_max(maps[l]) : collapse_mean(maps[l]);
    for (const Box& b : patches(flat.h, flat.w, rows, cols)) {
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t y = 0; y < flat.h; ++y) {
        for (std::size_t x = 0; x < flat.w; ++x) {
          const bool inside = y >= b.row && y < b.row + b.height && x >= b.col && x < b.col + b.width;
          if (inside) best = std::max(best, flat.v[y * flat.w + x]);
        }
      }
      out.push_back(best);
    }
  }
  return out;
}

double frobenius(const std::vector<double>& values) {
  double scale = 0.0;
  for (double v : values) scale = std::max(scale, std::fabs(v));
  if (scale == 0.0) return 0.0;
  double s = 0.0;
  for (double v : values) s += (v / scale) * (v / scale);
  return scale * std::sqrt(s);
}

std::vector<double> numeric_gradient(const std::function<double(const std::vector<double>&)>& f,
                                     std::vector<double> x, double step) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + step;
    const double up = f(x);
    x[i] = keep - step;
    const double down = f(x);
    x[i] = keep;
    g[i] = (up - down) / (2.0 * step);
  }
  return g;
}

}  // namespace gccn::oracle
