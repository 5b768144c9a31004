#pragma once

#include <cstdint>

#include "gccn/encoder.hpp"
#include "gccn/gc_features.hpp"

namespace gccn {

// Encoder followed by global-context extraction and fusion: the embedding
// function shared by the classifier and the few-shot heads.
class GccnNet {
 public:
  GccnNet(EncoderConfig encoder, GcConfig gc);

  const Encoder& encoder() const { return encoder_; }
  const GcConfig& gc() const { return gc_; }
  std::size_t cnn_size() const { return encoder_.embedding_size(); }
  std::size_t feature_size() const { return fused_size(cnn_size(), gc_); }

  void init_params(ParameterSet& params, std::uint64_t seed) const { encoder_.init_params(params, seed); }
  void reset_running_stats(ParameterSet& params) const;

  // images [n, h, w, c] -> fused features [n, feature_size()]
  Var embed(Var images, ParameterSet& params, Mode mode) const;

 private:
  Encoder encoder_;
  GcConfig gc_;
};

}  // namespace gccn
