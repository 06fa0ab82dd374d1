#pragma once

#include <cstdint>
#include <random>

namespace qmm {

using Engine = std::mt19937_64;

/// Stream purposes. Distinct purposes under the same (seed, call id) give
/// independent streams.
enum class Stream : std::uint64_t {
  instance = 1,
  sampling = 2,
  failure = 3,
  amplification = 4,
  guessing = 5,
  trial = 6,
  outer = 7,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derive a 64-bit key from (seed, call id, purpose). Counter-style: the key
/// depends only on its inputs, never on how many draws other streams made.
inline std::uint64_t stream_key(std::uint64_t seed, std::uint64_t call_id, Stream purpose) {
  std::uint64_t k = splitmix64(seed);
  k = splitmix64(k ^ splitmix64(call_id + 0x632be59bd9b4e019ULL));
  k = splitmix64(k ^ static_cast<std::uint64_t>(purpose));
  return k;
}

inline Engine make_stream(std::uint64_t seed, std::uint64_t call_id, Stream purpose) {
  std::seed_seq seq{static_cast<std::uint32_t>(stream_key(seed, call_id, purpose)),
                    static_cast<std::uint32_t>(stream_key(seed, call_id, purpose) >> 32)};
  return Engine(seq);
}

}  // namespace qmm
