#pragma once

#include <cstdint>
#include <filesystem>
#include <string_view>

#include "gccn/tensor.hpp"

namespace gccn {

inline constexpr std::string_view kFeatureMagic = "GCFV0001";

// Writes [count, length] rows as: 8-byte magic "GCFV0001", u32 vector length,
// u32 count, then count * length little-endian binary32 values.
void write_features(const Tensor& rows, const std::filesystem::path& path);

Tensor read_features(const std::filesystem::path& path);

// Byte size implied by a GCFV0001 header.
std::uint64_t feature_file_size(std::uint32_t length, std::uint32_t count);

}  // namespace gccn
