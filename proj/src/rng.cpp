#include "monolab/rng.hpp"

#include <bit>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace monolab {

std::uint64_t mix64(std::uint64_t z) {
  // SplitMix64 finalizer
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace {

std::uint64_t mix_gamma(std::uint64_t z) {
  z = (z ^ (z >> 33)) * 0xff51afd7ed558ccdULL;
  z = (z ^ (z >> 33)) * 0xc4ceb9fe1a85ec53ULL;
  z = (z ^ (z >> 33)) | 1ULL;
  // weak gammas (too few bit transitions) are flipped, as in SplittableRandom
  const int n = std::popcount(z ^ (z >> 1));
  return (n < 24) ? z ^ 0xaaaaaaaaaaaaaaaaULL : z;
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint32_t stream_id)
    : seed_(seed),
      stream_id_(stream_id),
      key_(mix64(seed ^ mix64(0x9e3779b97f4a7c15ULL * (std::uint64_t{stream_id} + 1)))),
      gamma_(mix_gamma(mix64(seed + 0x632be59bd9b4e019ULL) ^ (std::uint64_t{stream_id} << 1))) {}

std::uint64_t RngStream::next_u64() {
  const std::uint64_t x = key_ + gamma_ * (++counter_);
  return mix64(x);
}

double RngStream::uniform_pm1() {
  // (2k + 1 - 2^53) / 2^53 for k in [0, 2^53): symmetric, never +-1
  const auto k = static_cast<std::int64_t>(next_u64() >> 11);
  const std::int64_t odd = 2 * k + 1 - (std::int64_t{1} << 53);
  return static_cast<double>(odd) * 0x1.0p-53;
}

double RngStream::uniform01() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::uniform_open01() {
  return (static_cast<double>(next_u64() >> 12) + 0.5) * 0x1.0p-52;
}

std::uint64_t RngStream::below(std::uint64_t bound) {
  if (bound == 0) throw std::invalid_argument("RngStream::below: bound must be positive");
  // rejection on the top of the range keeps the draw unbiased
  const std::uint64_t limit = max() - (max() % bound + 1) % bound;
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x > limit);
  return x % bound;
}

double RngStream::normal() {
  const double u1 = uniform_open01();
  const double u2 = uniform01();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace monolab
