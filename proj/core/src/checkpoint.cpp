#include "gccn/checkpoint.hpp"

#include <cstdio>
#include <optional>

#include "binary_io.hpp"
#include "gccn/error.hpp"

namespace gccn {

namespace {

std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

Precision precision_of(std::string_view fingerprint) {
  if (fingerprint.starts_with("f64:")) return Precision::f64;
  if (fingerprint.starts_with("f32:")) return Precision::f32;
  throw FormatError("checkpoint fingerprint '" + std::string(fingerprint) + "' has no precision prefix");
}

Checkpoint read(const std::filesystem::path& path, std::optional<std::string_view> expected) {
  detail::LeReader in(path);
  const char* magic = in.take(kCheckpointMagic.size(), "magic");
  if (std::string_view(magic, kCheckpointMagic.size()) != kCheckpointMagic) {
    throw FormatError(path.string() + ": not a checkpoint (bad magic)");
  }
  const std::uint32_t version = in.u32("version");
  if (version != kCheckpointVersion) {
    throw FormatError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ck;
  ck.fingerprint = in.str("fingerprint");
  if (expected && ck.fingerprint != *expected) {
    throw FormatError(path.string() + ": config fingerprint mismatch (file " + ck.fingerprint + ", expected " +
                      std::string(*expected) + ")");
  }
  const Precision precision = precision_of(ck.fingerprint);
  const std::uint32_t count = in.u32("tensor count");
  std::vector<std::pair<std::string, Tensor>> tensors;
  for (std::uint32_t t = 0; t < count; ++t) {
    std::string name = in.str("tensor name");
    const std::uint32_t rank = in.u32("tensor rank");
    Shape shape;
    for (std::uint32_t r = 0; r < rank; ++r) shape.push_back(static_cast<std::size_t>(in.u64("tensor dim")));
    std::vector<double> values(shape_size(shape));
    for (auto& v : values) v = precision == Precision::f64 ? in.f64("tensor value") : static_cast<double>(in.f32("tensor value"));
    tensors.emplace_back(std::move(name), Tensor(std::move(shape), std::move(values)));
  }
  ck.config_text = in.str("config");
  ck.rng_state = in.str("rng state");
  const std::uint32_t flags = in.u32("flag count");
  if (flags != count) throw FormatError(path.string() + ": trainable flags do not match tensor count");
  const char* f = in.take(flags, "trainable flags");
  for (std::uint32_t t = 0; t < count; ++t) {
    ck.params.add(std::move(tensors[t].first), std::move(tensors[t].second), f[t] != 0);
  }
  if (in.offset() != in.size()) {
    throw FormatError(path.string() + ": " + std::to_string(in.size() - in.offset()) + " trailing bytes");
  }
  return ck;
}

}  // namespace

Precision Checkpoint::precision() const { return precision_of(fingerprint); }

std::string make_fingerprint(Precision precision, std::string_view canonical_config) {
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(fnv1a64(canonical_config)));
  return std::string(precision == Precision::f64 ? "f64:" : "f32:") + hex;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  const Precision precision = checkpoint.precision();
  detail::LeWriter out;
  out.bytes(kCheckpointMagic.data(), kCheckpointMagic.size());
  out.u32(kCheckpointVersion);
  out.str(checkpoint.fingerprint);
  out.u32(static_cast<std::uint32_t>(checkpoint.params.size()));
  for (const auto& p : checkpoint.params) {
    out.str(p.name);
    out.u32(static_cast<std::uint32_t>(p.value.rank()));
    for (auto d : p.value.shape()) out.u64(d);
    for (double v : p.value.data()) {
      if (precision == Precision::f64) {
        out.f64(v);
      } else {
        out.f32(static_cast<float>(v));
      }
    }
  }
  out.str(checkpoint.config_text);
  out.str(checkpoint.rng_state);
  out.u32(static_cast<std::uint32_t>(checkpoint.params.size()));
  for (const auto& p : checkpoint.params) {
    const char flag = p.trainable ? 1 : 0;
    out.bytes(&flag, 1);
  }
  out.save(path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return read(path, std::nullopt); }

Checkpoint load_checkpoint(const std::filesystem::path& path, std::string_view expected_fingerprint) {
  return read(path, expected_fingerprint);
}

}  // namespace gccn
