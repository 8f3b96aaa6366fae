#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace cbma {

/// 64-bit FNV-1a, used for content fingerprints (not for security).
class Fnv1a {
public:
  Fnv1a& bytes(const void* data, std::size_t size);
  Fnv1a& text(std::string_view s);
  template <typename T>
  Fnv1a& value(const T& v) {
    return bytes(&v, sizeof(T));
  }
  std::uint64_t digest() const { return state_; }
  std::string hex() const;

private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

std::string to_hex(std::uint64_t value);

}  // namespace cbma
