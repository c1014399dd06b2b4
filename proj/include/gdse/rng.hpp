#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace gdse {

// Deterministic stream keying: every (experiment seed, replication, purpose)
// triple owns a disjoint generator, so replications can run in any order and
// still reproduce byte-identically.
inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline uint64_t fnv1a(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::mt19937_64 make_stream(uint64_t seed, uint64_t rep,
                                   std::string_view purpose) {
  uint64_t k = splitmix64(seed);
  k = splitmix64(k ^ splitmix64(rep + 0x517cc1b727220a95ULL));
  k = splitmix64(k ^ fnv1a(purpose));
  return std::mt19937_64(k);
}

}  // namespace gdse
