#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

namespace condet {

// 64-bit FNV-1a. Stable across platforms; used for token ids, split keys and
// per-document seeds.
constexpr std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (char c : bytes) {
    hash ^= static_cast<std::uint8_t>(c);
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  return splitmix64(a ^ splitmix64(b));
}

constexpr std::uint64_t mix_seed(std::uint64_t a, std::string_view tag) {
  return mix_seed(a, fnv1a64(tag));
}

// Seeded generator with a fixed, documented draw protocol:
//   index(n)  : one or more raw 64-bit draws, rejection-sampled, then x % n
//   uniform() : one raw draw, top 53 bits scaled to [0, 1)
// Everything downstream (shuffles, transforms, init) goes through these two
// calls so that results are reproducible bit for bit.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  std::size_t index(std::size_t n) {
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    // 2^64 mod n, computed without overflow.
    const std::uint64_t rem = (UINT64_MAX % bound + 1) % bound;
    const std::uint64_t limit = UINT64_MAX - rem;  // accept x <= limit
    std::uint64_t x = engine_();
    while (rem != 0 && x > limit) x = engine_();
    return static_cast<std::size_t>(x % bound);
  }

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  template <class T>
  void shuffle(std::vector<T>& items) {
    // Fisher-Yates from the back.
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = index(i);
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace condet
