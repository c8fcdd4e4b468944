#include "monolab/datagen.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>

#include <omp.h>

#include "monolab/errors.hpp"
#include "monolab/io.hpp"

namespace monolab {

SquareMatrix sample_uniform_matrix(std::size_t n, RngStream& rng) {
  if (n < 2) throw std::invalid_argument("sample_uniform_matrix: n must be >= 2");
  std::vector<double> e(n * n);
  for (double& v : e) v = rng.uniform_pm1();
  return SquareMatrix(n, std::move(e));
}

bool is_monotone(const SquareMatrix& a, double neg_tol, double pivot_tol) {
  if (neg_tol < 0.0) throw std::invalid_argument("is_monotone: neg_tol must be >= 0");
  const LUFactorization f = lu_decompose(a, pivot_tol);
  if (f.singular) return false;
  // same substitution as invert(), column by column with early exit
  const std::size_t n = a.size();
  const SquareMatrix& lu = f.lu;
  std::vector<double> col(n);
  for (std::size_t c = 0; c < n; ++c) {
    for (std::size_t i = 0; i < n; ++i) col[i] = (f.perm[i] == c) ? 1.0 : 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double s = col[i];
      for (std::size_t j = 0; j < i; ++j) s -= lu(i, j) * col[j];
      col[i] = s;
    }
    for (std::size_t ii = n; ii-- > 0;) {
      double s = col[ii];
      for (std::size_t j = ii + 1; j < n; ++j) s -= lu(ii, j) * col[j];
      col[ii] = s / lu(ii, ii);
      if (col[ii] < -neg_tol) return false;
    }
  }
  return true;
}

SquareMatrix m_matrix_from(const SquareMatrix& b, double margin) {
  if (!(margin > 0.0)) throw std::invalid_argument("m_matrix_from: margin must be > 0");
  double rho = 0.0;
  for (const auto& ev : eigenvalues(b).eigenvalues) rho = std::max(rho, std::abs(ev));
  const double s = rho * (1.0 + margin);
  const std::size_t n = b.size();
  SquareMatrix a(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (b(i, j) < 0.0) throw std::invalid_argument("m_matrix_from: B must be nonnegative");
      a(i, j) = (i == j ? s : 0.0) - b(i, j);
    }
  }
  return a;
}

SquareMatrix make_m_matrix(std::size_t n, RngStream& rng, double margin) {
  if (n < 2) throw std::invalid_argument("make_m_matrix: n must be >= 2");
  std::vector<double> e(n * n);
  for (double& v : e) v = rng.uniform01();
  return m_matrix_from(SquareMatrix(n, std::move(e)), margin);
}

void refresh_counts(Dataset& d) {
  d.meta.monotone_count = 0;
  d.meta.non_monotone_count = 0;
  for (const auto& s : d.samples) {
    if (s.matrix.size() != d.n) throw DimensionMismatch("dataset: sample dimension differs from n");
    (s.monotone ? d.meta.monotone_count : d.meta.non_monotone_count)++;
  }
  d.meta.balanced = d.meta.monotone_count == d.meta.non_monotone_count;
}

namespace {

struct Draw {
  std::uint64_t attempt;
  SquareMatrix matrix;
  bool monotone;
};

struct BlockResult {
  std::vector<Draw> monotone;
  std::vector<Draw> non_monotone;
  std::uint64_t evaluated = 0;
};

// Evaluates attempts [b*block, min((b+1)*block, cap)). At most keep_non
// non-monotone draws are retained.
BlockResult evaluate_block(const GenerateOptions& o, std::uint64_t b, std::uint64_t keep_mono,
                           std::uint64_t keep_non) {
  BlockResult r;
  RngStream rng(o.seed, static_cast<std::uint32_t>(b));
  const std::uint64_t begin = b * kAttemptBlock;
  const std::uint64_t end = std::min(begin + kAttemptBlock, o.attempt_cap);
  for (std::uint64_t a = begin; a < end; ++a) {
    SquareMatrix m = sample_uniform_matrix(o.n, rng);
    ++r.evaluated;
    if (is_monotone(m, o.neg_tol)) {
      if (r.monotone.size() < keep_mono) r.monotone.push_back({a, std::move(m), true});
    } else if (r.non_monotone.size() < keep_non) {
      r.non_monotone.push_back({a, std::move(m), false});
    }
  }
  return r;
}

Dataset generate_impl(const GenerateOptions& o, int workers) {
  if (o.n < 2) throw std::invalid_argument("generate_balanced: n must be >= 2");
  if (o.per_class < 1) throw std::invalid_argument("generate_balanced: per_class must be >= 1");
  if (workers < 1) throw std::invalid_argument("generate_balanced: workers must be >= 1");
  if (o.attempt_cap / kAttemptBlock >= std::numeric_limits<std::uint32_t>::max()) {
    throw std::invalid_argument("generate_balanced: attempt_cap exceeds the stream id range");
  }

  std::vector<Draw> mono;
  std::vector<Draw> non;
  std::uint64_t next_block = 0;
  const std::uint64_t n_blocks = (o.attempt_cap + kAttemptBlock - 1) / kAttemptBlock;

  while ((mono.size() < o.per_class || non.size() < o.per_class) && next_block < n_blocks) {
    const std::uint64_t need_mono = o.per_class - std::min<std::uint64_t>(o.per_class, mono.size());
    const std::uint64_t need_non = o.per_class - std::min<std::uint64_t>(o.per_class, non.size());
    const std::uint64_t round = std::min<std::uint64_t>(workers, n_blocks - next_block);
    std::vector<BlockResult> results(round);

#pragma omp parallel for schedule(static, 1) num_threads(workers) if (workers > 1)
    for (std::int64_t k = 0; k < static_cast<std::int64_t>(round); ++k) {
      results[k] = evaluate_block(o, next_block + k, need_mono, need_non);
    }

    for (auto& r : results) {
      for (auto& d : r.monotone)
        if (mono.size() < o.per_class) mono.push_back(std::move(d));
      for (auto& d : r.non_monotone)
        if (non.size() < o.per_class) non.push_back(std::move(d));
    }
    next_block += round;
  }

  if (mono.size() < o.per_class || non.size() < o.per_class) {
    throw AttemptCapExceeded("generate_balanced: attempt cap of " + std::to_string(o.attempt_cap) +
                                 " reached with " + std::to_string(mono.size()) + " monotone and " +
                                 std::to_string(non.size()) + " non-monotone samples",
                             mono.size(), non.size(), o.attempt_cap);
  }

  Dataset d;
  d.n = o.n;
  d.meta.seed = o.seed;
  d.meta.neg_tol = o.neg_tol;
  d.meta.attempts = std::max(mono.back().attempt, non.back().attempt) + 1;
  std::vector<Draw*> order;
  order.reserve(2 * o.per_class);
  for (auto& x : mono) order.push_back(&x);
  for (auto& x : non) order.push_back(&x);
  std::sort(order.begin(), order.end(),
            [](const Draw* a, const Draw* b) { return a->attempt < b->attempt; });
  d.samples.reserve(order.size());
  for (Draw* x : order) d.samples.push_back({std::move(x->matrix), x->monotone, d.samples.size()});
  refresh_counts(d);
  return d;
}

constexpr char kMagic[4] = {'M', 'O', 'N', 'O'};

}  // namespace

Dataset generate_balanced(const GenerateOptions& opts) { return generate_impl(opts, opts.workers); }

namespace reference {

Dataset generate_balanced(const GenerateOptions& opts) { return generate_impl(opts, 1); }

}  // namespace reference

void save_dataset(const Dataset& d, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  BinaryWriter w(out);
  w.bytes(kMagic, 4);
  w.u8(kDatasetVersion);
  w.u32(static_cast<std::uint32_t>(d.n));
  w.u64(d.samples.size());
  w.u64(d.meta.seed);
  w.u64(d.meta.attempts);
  w.f64(d.meta.neg_tol);
  for (const auto& s : d.samples) {
    if (s.matrix.size() != d.n) throw DimensionMismatch("save_dataset: sample dimension differs from n");
    w.u8(s.monotone ? 1 : 0);
    for (double v : s.matrix.entries()) w.f64(v);
  }
  if (!out) throw IoError("write failed: " + path.string());
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileNotFound("cannot open dataset: " + path.string());
  BinaryReader r(in, path.string());
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) throw FormatError("bad magic in " + path.string());
  const std::uint8_t version = r.u8();
  if (version != kDatasetVersion) {
    throw FormatError("unsupported dataset version " + std::to_string(version));
  }
  Dataset d;
  d.n = r.u32();
  const std::uint64_t count = r.u64();
  d.meta.seed = r.u64();
  d.meta.attempts = r.u64();
  d.meta.neg_tol = r.f64();
  d.meta.generator_version = version;
  if (d.n < 1 || d.n > kMaxDimension) {
    throw DimensionMismatch("dataset dimension out of range: " + std::to_string(d.n));
  }
  const std::uint64_t record = 1 + 8 * d.n * d.n;
  const std::uint64_t remaining = r.remaining();
  if (remaining < count * record) throw FormatError("truncated dataset: " + path.string());
  if (remaining > count * record) {
    throw DimensionMismatch("dataset payload larger than " + std::to_string(count) + " records");
  }
  d.samples.reserve(count);
  std::vector<double> e(d.n * d.n);
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::uint8_t label = r.u8();
    if (label > 1) throw FormatError("invalid label byte in record " + std::to_string(i));
    for (double& v : e) v = r.f64();
    try {
      d.samples.push_back({SquareMatrix(d.n, e), label == 1, i});
    } catch (const std::invalid_argument&) {
      throw FormatError("non-finite entry in record " + std::to_string(i));
    }
  }
  refresh_counts(d);
  return d;
}

void export_dataset_csv(const Dataset& d, std::ostream& out) {
  out << "id,label";
  for (std::size_t i = 1; i <= d.n; ++i)
    for (std::size_t j = 1; j <= d.n; ++j) out << ",a_" << i << '_' << j;
  out << '\n';
  for (const auto& s : d.samples) {
    out << s.sample_id << ',' << (s.monotone ? 1 : 0);
    for (double v : s.matrix.entries()) out << ',' << format_double(v);
    out << '\n';
  }
}

}  // namespace monolab
