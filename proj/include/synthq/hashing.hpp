#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace synthq {

/// Lowercase hex SHA-256 digest of `bytes`.
std::string sha256_hex(std::string_view bytes);

/// 64-bit FNV-1a. Pinned for feature hashing so embeddings are identical
/// across platforms and standard library implementations.
constexpr std::uint64_t fnv1a64(std::string_view bytes,
                                std::uint64_t seed = 0xcbf29ce484222325ULL) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// splitmix64 finalizer, used to decorrelate bucket and sign bits.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace synthq
