#pragma once

#include <cstdint>
#include <limits>
#include <utility>

namespace monolab {

// Splittable counter-based generator: the i-th output of (seed, stream_id) is
// a pure function of (seed, stream_id, i), built only from 64-bit integer
// arithmetic, so sequences are identical on every platform. Doubles are
// produced by explicit bit manipulation rather than <random> distributions,
// whose algorithms are implementation-defined.
class RngStream {
 public:
  using result_type = std::uint64_t;

  RngStream(std::uint64_t seed, std::uint32_t stream_id);

  std::uint64_t seed() const { return seed_; }
  std::uint32_t stream_id() const { return stream_id_; }
  std::uint64_t position() const { return counter_; }

  std::uint64_t next_u64();
  std::uint64_t operator()() { return next_u64(); }
  static constexpr std::uint64_t min() { return 0; }
  static constexpr std::uint64_t max() { return std::numeric_limits<std::uint64_t>::max(); }

  // Uniform on the open interval (-1, 1); values are odd multiples of 2^-53.
  double uniform_pm1();
  // Uniform on [0, 1) with 53 random bits.
  double uniform01();
  // Uniform on (0, 1).
  double uniform_open01();
  // Uniform integer in [0, bound), bound > 0, unbiased.
  std::uint64_t below(std::uint64_t bound);
  // Standard normal via Box-Muller (no cached second value).
  double normal();

 private:
  std::uint64_t seed_;
  std::uint32_t stream_id_;
  std::uint64_t key_;
  std::uint64_t gamma_;
  std::uint64_t counter_ = 0;
};

std::uint64_t mix64(std::uint64_t z);

// In-place Fisher-Yates shuffle driven by RngStream::below.
template <typename RandomIt>
void shuffle(RandomIt first, RandomIt last, RngStream& rng) {
  const auto n = static_cast<std::uint64_t>(last - first);
  for (std::uint64_t i = n; i > 1; --i) {
    const auto j = rng.below(i);
    using std::swap;
    swap(first[i - 1], first[j]);
  }
}

}  // namespace monolab
