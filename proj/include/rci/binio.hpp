#pragma once
// Little-endian binary helpers shared by the checkpoint and index formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rci/errors.hpp"

namespace rci::binio {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

inline void put_bytes(std::vector<std::uint8_t>& out, const void* p, std::size_t n) {
  const auto* b = static_cast<const std::uint8_t*>(p);
  out.insert(out.end(), b, b + n);
}
inline void put_u8(std::vector<std::uint8_t>& out, std::uint8_t v) { out.push_back(v); }
inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) { put_bytes(out, &v, 4); }
inline void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) { put_bytes(out, &v, 8); }
inline void put_f32(std::vector<std::uint8_t>& out, float v) { put_bytes(out, &v, 4); }
inline void put_str(std::vector<std::uint8_t>& out, std::string_view s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  put_bytes(out, s.data(), s.size());
}

class Reader {
 public:
  Reader(std::span<const std::uint8_t> bytes, std::size_t& pos, std::string what)
      : bytes_(bytes), pos_(pos), what_(std::move(what)) {}

  void get_bytes(void* dst, std::size_t n) {
    if (pos_ + n > bytes_.size()) throw FormatError(what_ + ": truncated file");
    std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }
  std::uint8_t u8() {
    std::uint8_t v;
    get_bytes(&v, 1);
    return v;
  }
  std::uint32_t u32() {
    std::uint32_t v;
    get_bytes(&v, 4);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v;
    get_bytes(&v, 8);
    return v;
  }
  float f32() {
    float v;
    get_bytes(&v, 4);
    return v;
  }
  std::string str() {
    const std::uint32_t n = u32();
    if (pos_ + n > bytes_.size()) throw FormatError(what_ + ": truncated file");
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  void expect_magic(std::string_view magic) {
    std::string got(magic.size(), '\0');
    get_bytes(got.data(), got.size());
    if (got != magic) {
      throw FormatError(what_ + ": bad magic header (expected '" + std::string(magic) + "')");
    }
  }
  std::size_t pos() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t& pos_;
  std::string what_;
};

std::vector<std::uint8_t> read_file(const std::string& path);
// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::string& path, std::span<const std::uint8_t> bytes);

}  // namespace rci::binio
