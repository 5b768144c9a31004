#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "gccn/encoder.hpp"
#include "gccn/error.hpp"
#include "gccn/gc_features.hpp"
#include "gccn/gccn_net.hpp"
#include "gccn/ops.hpp"
#include "gccn/rng.hpp"

namespace gccn {
namespace {

Tensor random_map(std::size_t h, std::size_t w, std::size_t c, Rng& rng) {
  Tensor t(Shape{h, w, c});
  for (auto& v : t.data()) v = rng.uniform(-1.0, 1.0);
  return t;
}

TEST(Collapse, SingleChannelUnchanged) {
  Rng rng(1);
  const Tensor m = random_map(4, 5, 1, rng);
  EXPECT_EQ(collapse_channels(m, ChannelCollapse::max).values(), m.values());
  EXPECT_EQ(collapse_channels(m, ChannelCollapse::mean).values(), m.values());
}

TEST(Collapse, TwoChannelsMax) {
  Tensor m(Shape{3, 3, 2});
  for (std::size_t i = 0; i < 9; ++i) {
    m[2 * i] = 1.0;
    m[2 * i + 1] = 3.0;
  }
  const Tensor out = collapse_channels(m, ChannelCollapse::max);
  for (double v : out.data()) EXPECT_EQ(v, 3.0);
}

TEST(Collapse, MatchesPerCellLoop) {
  Rng rng(2);
  const Tensor m = random_map(6, 6, 4, rng);
  const Tensor mx = collapse_channels(m, ChannelCollapse::max);
  const Tensor mn = collapse_channels(m, ChannelCollapse::mean);
  for (std::size_t y = 0; y < 6; ++y) {
    for (std::size_t x = 0; x < 6; ++x) {
      double best = m.at({y, x, 0}), total = 0.0;
      for (std::size_t c = 0; c < 4; ++c) {
        best = std::max(best, m.at({y, x, c}));
        total += m.at({y, x, c});
      }
      EXPECT_EQ(mx.at({y, x}), best);
      EXPECT_NEAR(mn.at({y, x}), total / 4.0, 1e-15);
    }
  }
}

TEST(Partition, FourByFourIntoQuarters) {
  const auto boxes = partition(4, 4, 2, 2);
  const std::vector<PatchBox> expected{{0, 0, 2, 2}, {0, 2, 2, 2}, {2, 0, 2, 2}, {2, 2, 2, 2}};
  EXPECT_EQ(boxes, expected);
}

TEST(Partition, RemainderGoesLast) {
  const auto boxes = partition(5, 5, 2, 2);
  const std::vector<PatchBox> expected{{0, 0, 2, 2}, {0, 2, 2, 3}, {2, 0, 3, 2}, {2, 2, 3, 3}};
  EXPECT_EQ(boxes, expected);
}

TEST(Partition, SinglePatch) {
  const std::vector<PatchBox> expected{{0, 0, 3, 3}};
  EXPECT_EQ(partition(3, 3, 1, 1), expected);
}

TEST(Partition, CoversEveryCellOnce) {
  for (std::size_t h = 1; h <= 9; ++h) {
    for (std::size_t w = 1; w <= 9; ++w) {
      for (std::size_t r = 1; r <= std::min<std::size_t>(h, 4); ++r) {
        for (std::size_t c = 1; c <= std::min<std::size_t>(w, 4); ++c) {
          std::vector<int> hits(h * w, 0);
          for (const auto& b : partition(h, w, r, c)) {
            EXPECT_GT(b.height * b.width, 0u);
            for (std::size_t y = b.row; y < b.row + b.height; ++y) {
              for (std::size_t x = b.col; x < b.col + b.width; ++x) ++hits[y * w + x];
            }
          }
          EXPECT_TRUE(std::all_of(hits.begin(), hits.end(), [](int n) { return n == 1; }));
        }
      }
    }
  }
}

TEST(Partition, GridLargerThanMap) {
  EXPECT_THROW(partition(2, 3, 3, 1), DimensionError);
  EXPECT_THROW(partition(3, 3, 0, 1), ConfigError);
}

TEST(ExtractGc, ConstantMap) {
  const std::vector<Tensor> maps{Tensor(Shape{4, 4, 1}, 0.25)};
  GcConfig c;
  c.grid_rows = c.grid_cols = 2;
  EXPECT_EQ(extract_gc(maps, c).values.values(), (std::vector<double>{0.25, 0.25, 0.25, 0.25}));
}

TEST(ExtractGc, SingleSpike) {
  Tensor m(Shape{4, 4, 1}, 0.0);
  m.at({0, 0, 0}) = 2.5;
  const std::vector<Tensor> maps{m};
  GcConfig c;
  c.grid_rows = c.grid_cols = 2;
  const GcVector gc = extract_gc(maps, c);
  EXPECT_EQ(gc.values.values(), (std::vector<double>{2.5, 0, 0, 0}));
  EXPECT_EQ(gc.sources[0].patch, (PatchBox{0, 0, 2, 2}));
}

TEST(ExtractGc, ThreeLayerBruteForce) {
  Rng rng(3);
  const std::vector<Tensor> maps{random_map(12, 12, 3, rng), random_map(9, 8, 2, rng), random_map(6, 7, 5, rng),
                                 random_map(3, 4, 4, rng)};
  GcConfig c;
  c.grid_rows = c.grid_cols = 3;
  c.layers = 3;
  const GcVector gc = extract_gc(maps, c);
  ASSERT_EQ(gc.values.size(), 27u);
  std::size_t k = 0;
  for (std::size_t l = 1; l < 4; ++l) {
    const Tensor& m = maps[l];
    const std::size_t h = m.dim(0), w = m.dim(1);
    const std::size_t ph = h / 3, pw = w / 3;
    for (std::size_t pr = 0; pr < 3; ++pr) {
      for (std::size_t pc = 0; pc < 3; ++pc, ++k) {
        double best = -INFINITY;
        for (std::size_t y = 0; y < h; ++y) {
          for (std::size_t x = 0; x < w; ++x) {
            const std::size_t r = std::min<std::size_t>(y / ph, 2), q = std::min<std::size_t>(x / pw, 2);
            if (r != pr || q != pc) continue;
            for (std::size_t ch = 0; ch < m.dim(2); ++ch) best = std::max(best, m.at({y, x, ch}));
          }
        }
        EXPECT_EQ(gc.values[k], best) << k;
        EXPECT_EQ(gc.sources[k].layer, l);
      }
    }
  }
}

TEST(ExtractGc, LayersBeyondMapsRejected) {
  Rng rng(4);
  const std::vector<Tensor> maps{random_map(4, 4, 1, rng)};
  GcConfig c;
  c.grid_rows = c.grid_cols = 2;
  c.layers = 2;
  EXPECT_THROW(extract_gc(maps, c), ConfigError);
}

TEST(Fuse, AugNormExample) {
  const Tensor out = fuse(Tensor::vector({1, 0}), Tensor::vector({3, 4}), FusionMode::augnorm);
  EXPECT_EQ(out.values(), (std::vector<double>{0.2, 0.0, 0.6, 0.8}));
}

TEST(Fuse, AugKeepsPrefix) {
  Rng rng(5);
  const Tensor v = random_map(1, 1, 7, rng).reshaped({7});
  const Tensor g = random_map(1, 1, 4, rng).reshaped({4});
  const Tensor out = fuse(v, g, FusionMode::aug);
  ASSERT_EQ(out.size(), 11u);
  for (std::size_t i = 0; i < 7; ++i) EXPECT_EQ(out[i], v[i]);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(out[7 + i], g[i]);
}

TEST(Fuse, NormDividesByGcNorm) {
  const Tensor out = fuse(Tensor::vector({10, -5}), Tensor::vector({0, 5}), FusionMode::norm);
  EXPECT_EQ(out.values(), (std::vector<double>{2, -1}));
  EXPECT_EQ(fuse(Tensor::vector({1, 2}), Tensor::vector({7}), FusionMode::plain).values(),
            (std::vector<double>{1, 2}));
}

TEST(Fuse, ZeroGcStaysFinite) {
  const Tensor out = fuse(Tensor::vector({1e-13, 0}), Tensor::vector({0, 0}), FusionMode::augnorm);
  EXPECT_TRUE(out.all_finite());
}

TEST(Fuse, AugNormPositiveScaleInvariance) {
  Rng rng(6);
  for (int t = 0; t < 50; ++t) {
    const Tensor v = random_map(1, 1, 9, rng).reshaped({9});
    const Tensor g = random_map(1, 1, 4, rng).reshaped({4});
    const Tensor base = fuse(v, g, FusionMode::augnorm);
    for (double c : {0.5, 2.0, 10.0}) {
      Tensor cv = v, cg = g;
      for (auto& x : cv.data()) x *= c;
      for (auto& x : cg.data()) x *= c;
      const Tensor scaled = fuse(cv, cg, FusionMode::augnorm);
      for (std::size_t i = 0; i < base.size(); ++i) EXPECT_NEAR(scaled[i], base[i], 1e-9);
    }
  }
}

TEST(Frobenius, Examples) {
  EXPECT_EQ(frobenius_norm(std::vector<double>{3, 4}), 5.0);
  EXPECT_EQ(frobenius_norm(std::vector<double>(6, 0.0)), 0.0);
}

TEST(Frobenius, TwoPassOracle) {
  Rng rng(7);
  std::vector<double> v(100);
  for (auto& x : v) x = rng.normal(0.0, 3.0);
  double scale = 0.0;
  for (double x : v) scale = std::max(scale, std::fabs(x));
  double s = 0.0;
  for (double x : v) s += (x / scale) * (x / scale);
  const double ref = scale * std::sqrt(s);
  EXPECT_LE(std::fabs(frobenius_norm(v) - ref) / ref, 1e-12);
}

TEST(Dimensions, ModesTimesLayers) {
  EncoderConfig e;
  e.input_height = e.input_width = 84;
  e.num_blocks = 4;
  e.filters_per_block = 8;
  for (auto mode : {FusionMode::aug, FusionMode::norm, FusionMode::augnorm}) {
    for (std::size_t layers = 1; layers <= 3; ++layers) {
      GcConfig c;
      c.grid_rows = 2;
      c.grid_cols = 3;
      c.layers = layers;
      c.mode = mode;
      const GccnNet net(e, c);
      const std::size_t expected = mode == FusionMode::norm ? net.cnn_size() : net.cnn_size() + layers * 6;
      EXPECT_EQ(net.feature_size(), expected);
    }
  }
}

TEST(Dimensions, GridTooLargeForMapIsConfigError) {
  EncoderConfig e;
  e.input_height = e.input_width = 32;
  e.num_blocks = 3;
  e.filters_per_block = 4;
  GcConfig c;
  c.grid_rows = c.grid_cols = 3;
  EXPECT_THROW(GccnNet(e, c), ConfigError);
}

TEST(Parse, ModesAndCollapse) {
  for (auto m : {FusionMode::plain, FusionMode::aug, FusionMode::norm, FusionMode::augnorm}) {
    EXPECT_EQ(parse_fusion_mode(to_string(m)), m);
  }
  EXPECT_EQ(parse_collapse("mean"), ChannelCollapse::mean);
  EXPECT_THROW(parse_fusion_mode("both"), ConfigError);
}

}  // namespace
}  // namespace gccn
