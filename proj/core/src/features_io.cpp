#include "gccn/features_io.hpp"

#include "binary_io.hpp"

namespace gccn {

std::uint64_t feature_file_size(std::uint32_t length, std::uint32_t count) {
  return kFeatureMagic.size() + 8ULL + 4ULL * length * count;
}

void write_features(const Tensor& rows, const std::filesystem::path& path) {
  if (rows.rank() != 2) throw DimensionError("write_features: expected [count, length], got " + shape_string(rows.shape()));
  detail::LeWriter out;
  out.bytes(kFeatureMagic.data(), kFeatureMagic.size());
  out.u32(static_cast<std::uint32_t>(rows.dim(1)));
  out.u32(static_cast<std::uint32_t>(rows.dim(0)));
  for (double v : rows.data()) out.f32(static_cast<float>(v));
  out.save(path);
}

Tensor read_features(const std::filesystem::path& path) {
  detail::LeReader in(path);
  const char* magic = in.take(kFeatureMagic.size(), "magic");
  if (std::string_view(magic, kFeatureMagic.size()) != kFeatureMagic) {
    throw FormatError(path.string() + ": not a feature file (bad magic)");
  }
  const std::uint32_t length = in.u32("vector length");
  const std::uint32_t count = in.u32("count");
  if (in.size() != feature_file_size(length, count)) {
    throw FormatError(path.string() + ": size " + std::to_string(in.size()) + " does not match header");
  }
  if (length == 0 || count == 0) throw FormatError(path.string() + ": empty feature file");
  std::vector<double> values(static_cast<std::size_t>(length) * count);
  for (auto& v : values) v = static_cast<double>(in.f32("value"));
  return Tensor(Shape{count, length}, std::move(values));
}

}  // namespace gccn
