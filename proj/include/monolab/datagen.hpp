#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "monolab/linalg.hpp"
#include "monolab/rng.hpp"

namespace monolab {

// n*n i.i.d. draws from U(-1,1), row-major fill order.
SquareMatrix sample_uniform_matrix(std::size_t n, RngStream& rng);

// A^{-1} exists (LU nonsingular under pivot_tol) and every entry of A^{-1}
// is >= -neg_tol.
bool is_monotone(const SquareMatrix& a, double neg_tol = 0.0,
                 double pivot_tol = kDefaultPivotTol);

// s I - B with s = rho(B) * (1 + margin); rho is the Perron root of B >= 0.
SquareMatrix m_matrix_from(const SquareMatrix& b, double margin);

// Random M-matrix with B entrywise in [0, 1).
SquareMatrix make_m_matrix(std::size_t n, RngStream& rng, double margin);

struct LabeledSample {
  SquareMatrix matrix;
  bool monotone = false;
  std::uint64_t sample_id = 0;
};

inline constexpr std::uint8_t kDatasetVersion = 1;

struct DatasetMeta {
  std::uint64_t seed = 0;
  std::uint64_t attempts = 0;
  double neg_tol = 0.0;
  std::uint64_t monotone_count = 0;
  std::uint64_t non_monotone_count = 0;
  std::uint8_t generator_version = kDatasetVersion;
  bool balanced = false;
};

struct Dataset {
  std::size_t n = 0;
  std::vector<LabeledSample> samples;
  DatasetMeta meta;
};

struct GenerateOptions {
  std::size_t n = 7;
  std::uint64_t per_class = 1000;
  std::uint64_t seed = 0;
  int workers = 1;
  std::uint64_t attempt_cap = 1'000'000'000ULL;
  double neg_tol = 0.0;
};

// Draws per attempt block. Block b is drawn from RngStream(seed, b), so the
// dataset depends only on (seed, n, per_class), never on the worker count.
inline constexpr std::uint64_t kAttemptBlock = 4096;

// Balanced rejection sampling. Samples are ordered by attempt index and the
// first per_class of each class are kept. Throws AttemptCapExceeded when the
// classes cannot be filled within attempt_cap draws.
Dataset generate_balanced(const GenerateOptions& opts);

// Recomputes per-class counts and the balanced flag from the samples.
void refresh_counts(Dataset& d);

// Binary format (little-endian): "MONO", u8 version, u32 n, u64 count,
// u64 seed, u64 attempts, f64 neg_tol, then per sample u8 label followed by
// n*n f64 entries row-major.
void save_dataset(const Dataset& d, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

// Header `id,label,a_1_1,...,a_n_n`; doubles written round-trippable.
void export_dataset_csv(const Dataset& d, std::ostream& out);

namespace reference {

// Single-threaded generate_balanced; walks the same attempt blocks in order.
Dataset generate_balanced(const GenerateOptions& opts);

}  // namespace reference

}  // namespace monolab
