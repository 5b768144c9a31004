#include "gccn/gccn_net.hpp"

namespace gccn {

GccnNet::GccnNet(EncoderConfig encoder, GcConfig gc) : encoder_(encoder), gc_(gc) {
  std::vector<Shape> shapes;
  for (std::size_t b = 0; b < encoder_.blocks().size(); ++b) shapes.push_back(encoder_.map_shape(b));
  validate(gc_, shapes);
}

void GccnNet::reset_running_stats(ParameterSet& params) const {
  for (std::size_t b = 0; b < encoder_.blocks().size(); ++b) gccn::reset_running_stats(Encoder::buffers(params, b));
}

Var GccnNet::embed(Var images, ParameterSet& params, Mode mode) const {
  EncoderOutput enc = encoder_.encode(images, params, mode);
  if (gc_.mode == FusionMode::plain) return enc.embedding;
  Var gc = extract_gc(std::span<const Var>(enc.maps), gc_);
  return fuse(enc.embedding, gc, gc_.mode);
}

}  // namespace gccn
