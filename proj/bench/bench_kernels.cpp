// Serial reference kernels against the OpenMP versions, plus the two
// row-parallel pipelines (featurization and dataset generation).
#include <benchmark/benchmark.h>
#include <omp.h>

#include <vector>

#include "monolab/datagen.hpp"
#include "monolab/features.hpp"
#include "monolab/kernels.hpp"
#include "monolab/rng.hpp"

namespace {

struct Dense {
  std::size_t rows, in, out;
  std::vector<double> x, w, wt, b, y, dy, dx, dw, db;

  Dense(std::size_t r, std::size_t i, std::size_t o) : rows(r), in(i), out(o) {
    monolab::RngStream rng(1, 0);
    auto fill = [&](std::vector<double>& v, std::size_t n) {
      v.resize(n);
      for (double& e : v) e = rng.uniform_pm1();
    };
    fill(x, rows * in);
    fill(w, in * out);
    fill(b, out);
    fill(dy, rows * out);
    wt.resize(in * out);
    monolab::kernels::transpose(w.data(), in, out, wt.data());
    y.resize(rows * out);
    dx.resize(rows * in);
    dw.resize(in * out);
    db.resize(out);
  }
};

void BM_forward_parallel(benchmark::State& st) {
  Dense d(256, st.range(0), st.range(1));
  for (auto _ : st) {
    monolab::kernels::dense_forward(d.x.data(), d.rows, d.in, d.w.data(), d.b.data(), d.out, d.y.data());
    benchmark::DoNotOptimize(d.y.data());
  }
  st.counters["threads"] = omp_get_max_threads();
}

void BM_forward_reference(benchmark::State& st) {
  Dense d(256, st.range(0), st.range(1));
  for (auto _ : st) {
    monolab::kernels::reference::dense_forward(d.x.data(), d.rows, d.in, d.w.data(), d.b.data(), d.out, d.y.data());
    benchmark::DoNotOptimize(d.y.data());
  }
}

void BM_backward_parallel(benchmark::State& st) {
  Dense d(256, st.range(0), st.range(1));
  for (auto _ : st) {
    monolab::kernels::dense_backward_input(d.dy.data(), d.rows, d.out, d.wt.data(), d.in, d.dx.data());
    monolab::kernels::dense_backward_weights(d.x.data(), d.dy.data(), d.rows, d.in, d.out, d.dw.data(), d.db.data());
    benchmark::DoNotOptimize(d.dw.data());
  }
}

void BM_backward_reference(benchmark::State& st) {
  Dense d(256, st.range(0), st.range(1));
  for (auto _ : st) {
    monolab::kernels::reference::dense_backward_input(d.dy.data(), d.rows, d.out, d.w.data(), d.in, d.dx.data());
    monolab::kernels::reference::dense_backward_weights(d.x.data(), d.dy.data(), d.rows, d.in, d.out, d.dw.data(),
                                                        d.db.data());
    benchmark::DoNotOptimize(d.dw.data());
  }
}

const monolab::Dataset& sample_dataset() {
  static const monolab::Dataset d = [] {
    monolab::GenerateOptions o;
    o.n = 5;
    o.per_class = 200;
    o.seed = 3;
    return monolab::generate_balanced(o);
  }();
  return d;
}

void BM_featurize_parallel(benchmark::State& st) {
  const auto& d = sample_dataset();
  for (auto _ : st) benchmark::DoNotOptimize(monolab::featurize_dataset(d));
}

void BM_featurize_reference(benchmark::State& st) {
  const auto& d = sample_dataset();
  for (auto _ : st) benchmark::DoNotOptimize(monolab::reference::featurize_dataset(d));
}

void BM_generate(benchmark::State& st) {
  monolab::GenerateOptions o;
  o.n = 4;
  o.per_class = 100;
  o.seed = 9;
  o.workers = static_cast<int>(st.range(0));
  for (auto _ : st) benchmark::DoNotOptimize(monolab::generate_balanced(o));
}

}  // namespace

BENCHMARK(BM_forward_parallel)->Args({73, 2056})->Args({1024, 512})->Args({64, 32});
BENCHMARK(BM_forward_reference)->Args({73, 2056})->Args({1024, 512})->Args({64, 32});
BENCHMARK(BM_backward_parallel)->Args({73, 2056})->Args({1024, 512});
BENCHMARK(BM_backward_reference)->Args({73, 2056})->Args({1024, 512});
BENCHMARK(BM_featurize_parallel);
BENCHMARK(BM_featurize_reference);
BENCHMARK(BM_generate)->Arg(1)->Arg(4);

BENCHMARK_MAIN();
