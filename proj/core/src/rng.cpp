#include "gccn/rng.hpp"

#include <sstream>

#include "gccn/error.hpp"

namespace gccn {

std::string Rng::state() const {
  std::ostringstream os;
  os << seed_ << ' ' << engine_;
  return os.str();
}

void Rng::restore(const std::string& state) {
  std::istringstream is(state);
  std::uint64_t seed = 0;
  std::mt19937_64 engine;
  if (!(is >> seed >> engine)) throw FormatError("malformed random generator state");
  seed_ = seed;
  engine_ = engine;
}

}  // namespace gccn
