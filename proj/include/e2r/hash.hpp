#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace e2r {

// 64-bit FNV-1a; stable across platforms and runs, unlike std::hash.
constexpr std::uint64_t fnv1a(std::string_view data, std::uint64_t h = 14695981039346656037ull) {
  for (char c : data) {
    h ^= static_cast<std::uint8_t>(c);
    h *= 1099511628211ull;
  }
  return h;
}

// Lowercase hex SHA-256.
std::string sha256_hex(std::span<const std::uint8_t> data);
std::string sha256_hex(std::string_view data);

std::string base64_encode(std::span<const std::uint8_t> data);

}  // namespace e2r
