#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <vector>

namespace quadassist {

using Sha256 = std::array<std::uint8_t, 32>;

Sha256 sha256(std::string_view bytes);
std::string to_hex(const Sha256& digest);
/// Throws std::invalid_argument on anything but 64 hex characters.
Sha256 sha256_from_hex(std::string_view hex);

/// Little byte sink for hashing simulation state bit-exactly.
class ByteWriter {
 public:
  void put(double v) { append(&v, sizeof v); }
  void put(std::int64_t v) { append(&v, sizeof v); }
  void put(bool v) { buf_.push_back(v ? '\1' : '\0'); }
  void put(std::string_view s) {
    put(static_cast<std::int64_t>(s.size()));
    buf_.append(s);
  }
  const std::string& bytes() const noexcept { return buf_; }

 private:
  void append(const void* p, std::size_t n) {
    buf_.append(static_cast<const char*>(p), n);
  }
  std::string buf_;
};

/// digest_n = SHA-256(digest_{n-1} || payload_n), starting from all zeros.
class DigestChain {
 public:
  const Sha256& advance(std::string_view payload);
  const Sha256& current() const noexcept { return current_; }
  std::string hex() const { return to_hex(current_); }

 private:
  Sha256 current_{};
};

}  // namespace quadassist
