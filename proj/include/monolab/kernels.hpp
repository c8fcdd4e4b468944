#pragma once

#include <cstddef>

// Dense-layer kernels shared by training, inference and attribution.
// Weights are stored input-major: w[i * out + o]. Every kernel accumulates in
// a fixed order that does not depend on the thread count, so the OpenMP
// versions match the serial references bit for bit.
namespace monolab::kernels {

// y[r][o] = b[o] + sum_i x[r][i] * w[i][o]; parallel over rows.
void dense_forward(const double* x, std::size_t rows, std::size_t in, const double* w,
                   const double* b, std::size_t out, double* y);

// dx[r][i] = sum_o dy[r][o] * w[i][o]; `wt` is w transposed (out x in).
// Parallel over rows.
void dense_backward_input(const double* dy, std::size_t rows, std::size_t out, const double* wt,
                          std::size_t in, double* dx);

// dw[i][o] = sum_r x[r][i] * dy[r][o]; db[o] = sum_r dy[r][o]. Overwrites dw
// and db. Parallel over input features.
void dense_backward_weights(const double* x, const double* dy, std::size_t rows, std::size_t in,
                            std::size_t out, double* dw, double* db);

// wt[o][i] = w[i][o].
void transpose(const double* w, std::size_t in, std::size_t out, double* wt);

namespace reference {

void dense_forward(const double* x, std::size_t rows, std::size_t in, const double* w,
                   const double* b, std::size_t out, double* y);
void dense_backward_input(const double* dy, std::size_t rows, std::size_t out, const double* w,
                          std::size_t in, double* dx);
void dense_backward_weights(const double* x, const double* dy, std::size_t rows, std::size_t in,
                            std::size_t out, double* dw, double* db);

}  // namespace reference

}  // namespace monolab::kernels
