#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "gccn/autodiff.hpp"
#include "gccn/ops.hpp"

namespace gccn {

struct EncoderConfig {
  std::size_t num_blocks = 4;
  std::size_t filters_per_block = 64;
  std::size_t kernel_size = 3;
  std::size_t input_height = 0;
  std::size_t input_width = 0;
  std::size_t input_channels = 1;

  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

// Spatial sizes through one block: conv output, after crop-to-even, after pool.
struct BlockShape {
  std::size_t conv_height, conv_width;
  std::size_t pooled_height, pooled_width;
  bool cropped;
};

// Walks conv -> crop-to-even -> 2x2 pool for every block. Throws ConfigError
// naming the first block whose input is smaller than the kernel or whose
// output would vanish.
std::vector<BlockShape> shape_walk(const EncoderConfig& config);

struct EncoderOutput {
  Var embedding;          // [n, h*w*c] of the last block, row-major (h, w, c)
  std::vector<Var> maps;  // post-pool map of every block, [n, h, w, filters]
};

// Stack of conv3x3 -> batchnorm -> relu -> 2x2 max-pool blocks without
// padding. Construction validates the whole shape walk.
class Encoder {
 public:
  explicit Encoder(EncoderConfig config);

  const EncoderConfig& config() const { return config_; }
  const std::vector<BlockShape>& blocks() const { return blocks_; }
  // Post-pool map shape of block b, without the batch axis.
  Shape map_shape(std::size_t block) const;
  std::size_t embedding_size() const;

  // Kaiming-uniform conv weights (variance 2 / fan_in), gamma 1, beta 0, and
  // batchnorm buffers that are not yet marked ready.
  void init_params(ParameterSet& params, std::uint64_t seed) const;

  // images: [n, h, w, c] or a single [h, w, c].
  EncoderOutput encode(Var images, ParameterSet& params, Mode mode) const;

  static std::string conv_name(std::size_t block);
  static BatchNormBuffers buffers(ParameterSet& params, std::size_t block);

 private:
  EncoderConfig config_;
  std::vector<BlockShape> blocks_;
};

ParameterSet init_params(const EncoderConfig& config, std::uint64_t seed);

}  // namespace gccn
