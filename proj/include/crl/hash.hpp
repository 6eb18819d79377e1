#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

namespace crl {

// FNV-1a, the project's one hash for datasets, configs, and checkpoints.
// Byte-order independent inputs (explicit little-endian serialization or
// text) keep the digests portable across platforms.
inline uint64_t fnv1a(const void* data, size_t len, uint64_t h = 1469598103934665603ULL) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

inline uint64_t fnv1a(const std::string& s, uint64_t h = 1469598103934665603ULL) {
  return fnv1a(s.data(), s.size(), h);
}

}  // namespace crl
