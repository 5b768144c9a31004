#include "gccn/encoder.hpp"

#include <cmath>

#include "gccn/error.hpp"
#include "gccn/rng.hpp"

namespace gccn {

namespace {

std::string prefix(std::size_t block) { return "block" + std::to_string(block); }

}  // namespace

std::vector<BlockShape> shape_walk(const EncoderConfig& config) {
  if (config.num_blocks < 1) throw ConfigError("encoder: num_blocks must be at least 1");
  if (config.filters_per_block < 1) throw ConfigError("encoder: filters_per_block must be at least 1");
  if (config.kernel_size < 1) throw ConfigError("encoder: kernel size must be at least 1");
  if (config.input_channels < 1) throw ConfigError("encoder: input must have at least one channel");
  std::vector<BlockShape> out;
  std::size_t h = config.input_height, w = config.input_width;
  for (std::size_t b = 0; b < config.num_blocks; ++b) {
    const std::string where = "encoder block " + std::to_string(b + 1) + " of " + std::to_string(config.num_blocks);
    if (h < config.kernel_size || w < config.kernel_size) {
      throw ConfigError(where + ": input " + std::to_string(h) + "x" + std::to_string(w) + " is smaller than the " +
                        std::to_string(config.kernel_size) + "x" + std::to_string(config.kernel_size) + " kernel");
    }
    BlockShape s{};
    s.conv_height = h - config.kernel_size + 1;
    s.conv_width = w - config.kernel_size + 1;
    const std::size_t eh = s.conv_height - s.conv_height % 2;
    const std::size_t ew = s.conv_width - s.conv_width % 2;
    s.cropped = eh != s.conv_height || ew != s.conv_width;
    if (eh == 0 || ew == 0) {
      throw ConfigError(where + ": conv output " + std::to_string(s.conv_height) + "x" +
                        std::to_string(s.conv_width) + " is too small to pool");
    }
    s.pooled_height = eh / 2;
    s.pooled_width = ew / 2;
    out.push_back(s);
    h = s.pooled_height;
    w = s.pooled_width;
  }
  return out;
}

Encoder::Encoder(EncoderConfig config) : config_(config), blocks_(shape_walk(config)) {}

Shape Encoder::map_shape(std::size_t block) const {
  const auto& s = blocks_.at(block);
  return {s.pooled_height, s.pooled_width, config_.filters_per_block};
}

std::size_t Encoder::embedding_size() const { return shape_size(map_shape(blocks_.size() - 1)); }

std::string Encoder::conv_name(std::size_t block) { return prefix(block) + ".conv.weight"; }

BatchNormBuffers Encoder::buffers(ParameterSet& params, std::size_t block) {
  const std::string p = prefix(block) + ".bn.";
  return {&params.get(p + "running_mean"), &params.get(p + "running_var"), &params.get(p + "ready")};
}

void Encoder::init_params(ParameterSet& params, std::uint64_t seed) const {
  Rng rng(seed);
  const std::size_t k = config_.kernel_size;
  const std::size_t f = config_.filters_per_block;
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    const std::size_t cin = b == 0 ? config_.input_channels : f;
    const double fan_in = static_cast<double>(k * k * cin);
    const double bound = std::sqrt(6.0 / fan_in);
    Tensor w(Shape{k, k, cin, f});
    for (double& v : w.data()) v = rng.uniform(-bound, bound);
    params.add(conv_name(b), std::move(w));
    const std::string p = prefix(b) + ".bn.";
    params.add(p + "gamma", Tensor(Shape{f}, 1.0));
    params.add(p + "beta", Tensor(Shape{f}, 0.0));
    params.add(p + "running_mean", Tensor(Shape{f}, 0.0), false);
    params.add(p + "running_var", Tensor(Shape{f}, 1.0), false);
    params.add(p + "ready", Tensor::scalar(0.0), false);
  }
}

EncoderOutput Encoder::encode(Var images, ParameterSet& params, Mode mode) const {
  Graph& g = images.graph();
  Var x = images;
  if (x.value().rank() == 3) {
    Shape s = x.shape();
    s.insert(s.begin(), 1);
    x = reshape(x, s);
  }
  const Shape& in = x.shape();
  if (in.size() != 4 || in[1] != config_.input_height || in[2] != config_.input_width ||
      in[3] != config_.input_channels) {
    throw DimensionError("encoder expects images (" + std::to_string(config_.input_height) + "x" +
                         std::to_string(config_.input_width) + "x" + std::to_string(config_.input_channels) +
                         "), got " + shape_string(in));
  }

  EncoderOutput out;
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    const std::string p = prefix(b) + ".bn.";
    x = conv2d(x, g.param(params.get(conv_name(b))));
    x = batchnorm(x, g.param(params.get(p + "gamma")), g.param(params.get(p + "beta")), buffers(params, b), mode);
    x = relu(x);
    x = crop_to_even(x);
    x = maxpool2d(x);
    out.maps.push_back(x);
  }
  out.embedding = flatten(x);
  return out;
}

ParameterSet init_params(const EncoderConfig& config, std::uint64_t seed) {
  ParameterSet params;
  Encoder(config).init_params(params, seed);
  return params;
}

}  // namespace gccn
