#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "gccn/autodiff.hpp"

namespace gccn {

enum class Precision { f64, f32 };

inline constexpr std::string_view kCheckpointMagic = "GCCN0001";
inline constexpr std::uint32_t kCheckpointVersion = 1;

// Binary layout, little-endian:
//   8-byte magic "GCCN0001", u32 version,
//   u32 fingerprint length + bytes, u32 tensor count,
//   per tensor: u32 name length + bytes, u32 rank, u64 dims[rank], values,
//   trailer: u32 config length + bytes, u32 rng-state length + bytes,
//            u32 flag count + one trainable byte per tensor.
// Values are f64 or f32 as named by the fingerprint's "f64:" / "f32:" prefix.
struct Checkpoint {
  std::string fingerprint;
  ParameterSet params;
  std::string config_text;
  std::string rng_state;

  Precision precision() const;
};

// "<precision>:<16 hex digits of FNV-1a 64 over canonical_config>"
std::string make_fingerprint(Precision precision, std::string_view canonical_config);

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);

Checkpoint load_checkpoint(const std::filesystem::path& path);

// Rejects the file with FormatError before reading any tensor if its
// fingerprint differs from `expected_fingerprint`.
Checkpoint load_checkpoint(const std::filesystem::path& path, std::string_view expected_fingerprint);

}  // namespace gccn
