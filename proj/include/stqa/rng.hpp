#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <utility>

namespace stqa {

// Platform-stable hashing and seeding. Everything random in the toolchain is
// derived from one master seed through these functions.
std::uint64_t splitmix64(std::uint64_t x);

// FNV-1a over the bytes of `text`, finalized with splitmix64.
std::uint64_t stable_hash(std::string_view text, std::uint64_t seed = 0);

// Child seed for a named sub-stream (clip id, candidate key, ...).
std::uint64_t derive_seed(std::uint64_t parent, std::string_view tag);

// mt19937_64 output is fixed by the standard; the distributions are not, so
// bounded draws and shuffles are done here rather than through <random>.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform in [0, n). n must be positive.
  std::size_t index(std::size_t n);

  // Uniform in [0, 1).
  double uniform();

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[index(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace stqa
