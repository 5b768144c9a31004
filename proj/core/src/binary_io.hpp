#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "gccn/error.hpp"

namespace gccn::detail {

// Little-endian encoder into a byte buffer.
class LeWriter {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* c = static_cast<const char*>(p);
    buf_.insert(buf_.end(), c, c + n);
  }
  void u32(std::uint32_t v) { uint_le(v, 4); }
  void u64(std::uint64_t v) { uint_le(v, 8); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }

  void save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(buf_.data(), static_cast<std::streamsize>(buf_.size()));
    if (!out) throw IoError("write failed: " + path.string());
  }

 private:
  void uint_le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }

  std::vector<char> buf_;
};

// Little-endian decoder over a whole file; truncation reports the byte offset.
class LeReader {
 public:
  explicit LeReader(const std::filesystem::path& path) : path_(path.string()) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path_);
    buf_.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }

  const char* take(std::size_t n, const char* what) {
    if (offset_ + n > buf_.size()) {
      throw IoError(path_ + ": truncated while reading " + what + " at byte offset " + std::to_string(offset_));
    }
    const char* p = buf_.data() + offset_;
    offset_ += n;
    return p;
  }
  std::uint32_t u32(const char* what) { return static_cast<std::uint32_t>(uint_le(4, what)); }
  std::uint64_t u64(const char* what) { return uint_le(8, what); }
  double f64(const char* what) { return std::bit_cast<double>(u64(what)); }
  float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
  std::string str(const char* what) {
    const std::uint32_t n = u32(what);
    const char* p = take(n, what);
    return std::string(p, n);
  }

  std::size_t offset() const { return offset_; }
  std::size_t size() const { return buf_.size(); }
  const std::string& path() const { return path_; }

 private:
  std::uint64_t uint_le(int n, const char* what) {
    const char* p = take(static_cast<std::size_t>(n), what);
    std::uint64_t v = 0;
    for (int i = n - 1; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(p[i]);
    return v;
  }

  std::string path_;
  std::vector<char> buf_;
  std::size_t offset_ = 0;
};

}  // namespace gccn::detail
