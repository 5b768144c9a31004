#include <gtest/gtest.h>

#include <cmath>

#include "gccn/encoder.hpp"
#include "gccn/error.hpp"
#include "gccn/ops.hpp"

namespace gccn {
namespace {

EncoderConfig config(std::size_t size, std::size_t blocks, std::size_t filters = 64) {
  EncoderConfig c;
  c.input_height = size;
  c.input_width = size;
  c.num_blocks = blocks;
  c.filters_per_block = filters;
  return c;
}

// conv shrinks by k-1, odd sides lose one row/column, pool halves; 0 when a
// block has nothing left.
std::size_t walk(std::size_t side, std::size_t blocks) {
  for (std::size_t b = 0; b < blocks; ++b) {
    if (side < 4) return 0;
    side -= 2;
    side -= side % 2;
    side /= 2;
  }
  return side;
}

TEST(Encoder, FourBlocksOn28IsConfigError) { EXPECT_THROW(Encoder(config(28, 4)), ConfigError); }

TEST(Encoder, ThreeBlocksOn28) {
  const Encoder e(config(28, 3));
  EXPECT_EQ(e.map_shape(2), (Shape{1, 1, 64}));
  EXPECT_EQ(e.embedding_size(), 64u);
}

TEST(Encoder, SixtyFourByFourBlocks) {
  const Encoder e(config(64, 4));
  ASSERT_EQ(e.blocks().size(), 4u);
  const std::vector<std::size_t> pooled{31, 14, 6, 2};
  for (std::size_t b = 0; b < 4; ++b) EXPECT_EQ(e.blocks()[b].pooled_height, pooled[b]);
  EXPECT_TRUE(e.blocks()[1].cropped);
  EXPECT_EQ(e.map_shape(3), (Shape{2, 2, 64}));
  EXPECT_EQ(e.embedding_size(), 256u);
}

TEST(Encoder, ShapeWalkMatchesArithmetic) {
  for (std::size_t side : {16u, 21u, 32u, 45u, 84u}) {
    for (std::size_t blocks = 1; blocks <= 3; ++blocks) {
      const std::size_t s = walk(side, blocks);
      if (s == 0) {
        EXPECT_THROW(Encoder(config(side, blocks, 4)), ConfigError) << side << " " << blocks;
        continue;
      }
      const Encoder e(config(side, blocks, 4));
      EXPECT_EQ(e.map_shape(blocks - 1), (Shape{s, s, 4})) << side << " " << blocks;
      EXPECT_EQ(e.embedding_size(), s * s * 4);
    }
  }
}

TEST(Encoder, ZeroImageGivesZeroEmbedding) {
  const Encoder e(config(16, 2, 8));
  ParameterSet p;
  e.init_params(p, 11);
  Graph g;
  const auto out = e.encode(g.constant(Tensor(Shape{3, 16, 16, 1}, 0.0)), p, Mode::train);
  EXPECT_EQ(out.embedding.shape(), (Shape{3, e.embedding_size()}));
  for (double v : out.embedding.value().data()) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(out.maps.size(), 2u);
}

TEST(Encoder, WrongImageShapeIsDimensionError) {
  const Encoder e(config(16, 2, 4));
  ParameterSet p;
  e.init_params(p, 1);
  Graph g;
  EXPECT_THROW(e.encode(g.constant(Tensor(Shape{1, 15, 16, 1})), p, Mode::train), DimensionError);
}

TEST(Encoder, SeededInitialisation) {
  const auto c = config(16, 2, 4);
  EXPECT_TRUE(init_params(c, 5) == init_params(c, 5));
  EXPECT_FALSE(init_params(c, 5) == init_params(c, 6));
}

TEST(Encoder, InitialisationIsKaimingUniform) {
  const auto c = config(16, 1, 64);
  const ParameterSet p = init_params(c, 9);
  const Tensor& w = p.get(Encoder::conv_name(0)).value;
  const double bound = std::sqrt(6.0 / 9.0);
  double sq = 0.0;
  for (double v : w.data()) {
    EXPECT_LE(std::fabs(v), bound);
    sq += v * v;
  }
  EXPECT_NEAR(sq / static_cast<double>(w.size()), 2.0 / 9.0, 0.03);
}

}  // namespace
}  // namespace gccn
