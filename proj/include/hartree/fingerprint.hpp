#pragma once

// Run fingerprints: FNV-1a 64 over a canonical "key=value;" text.

#include <array>
#include <charconv>
#include <cstdint>
#include <string>
#include <string_view>

namespace hartree {

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

/// Shortest text that parses back to the same double.
inline std::string format_double(double x) {
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), x);
  return std::string(buf.data(), res.ptr);
}

inline std::string hex64(std::uint64_t h) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) s[static_cast<std::size_t>(i)] = digits[h & 0xf];
  return s;
}

class Fingerprint {
 public:
  Fingerprint& add(std::string_view key, std::string_view value) {
    text_.append(key).append("=").append(value).append(";");
    return *this;
  }
  Fingerprint& add(std::string_view key, double value) { return add(key, format_double(value)); }
  Fingerprint& add(std::string_view key, std::uint64_t value) { return add(key, std::to_string(value)); }
  Fingerprint& add(std::string_view key, int value) { return add(key, std::to_string(value)); }

  const std::string& text() const { return text_; }
  std::string hex() const { return hex64(fnv1a64(text_)); }

 private:
  std::string text_;
};

}  // namespace hartree
