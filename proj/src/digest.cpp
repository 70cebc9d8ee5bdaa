#include "quadassist/digest.hpp"

#include <stdexcept>

#include <openssl/evp.h>

namespace quadassist {

namespace {

void hash_parts(std::initializer_list<std::string_view> parts, Sha256& out) {
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (ctx == nullptr) throw std::runtime_error("sha256: out of memory");
  bool ok = EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) == 1;
  for (auto p : parts) ok = ok && EVP_DigestUpdate(ctx, p.data(), p.size()) == 1;
  unsigned int len = 0;
  ok = ok && EVP_DigestFinal_ex(ctx, out.data(), &len) == 1 && len == out.size();
  EVP_MD_CTX_free(ctx);
  if (!ok) throw std::runtime_error("sha256: digest failed");
}

}  // namespace

Sha256 sha256(std::string_view bytes) {
  Sha256 out;
  hash_parts({bytes}, out);
  return out;
}

std::string to_hex(const Sha256& digest) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string s;
  s.reserve(64);
  for (auto b : digest) {
    s.push_back(kHex[b >> 4]);
    s.push_back(kHex[b & 0xf]);
  }
  return s;
}

Sha256 sha256_from_hex(std::string_view hex) {
  if (hex.size() != 64) throw std::invalid_argument("digest: expected 64 hex characters");
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    throw std::invalid_argument("digest: not a hex character");
  };
  Sha256 out;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<std::uint8_t>(nibble(hex[2 * i]) << 4 | nibble(hex[2 * i + 1]));
  }
  return out;
}

const Sha256& DigestChain::advance(std::string_view payload) {
  const Sha256 prev = current_;
  hash_parts({std::string_view(reinterpret_cast<const char*>(prev.data()), prev.size()), payload},
             current_);
  return current_;
}

}  // namespace quadassist
