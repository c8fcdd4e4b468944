#include "monolab/kernels.hpp"

#include <cstdint>

namespace monolab::kernels {

void dense_forward(const double* x, std::size_t rows, std::size_t in, const double* w,
                   const double* b, std::size_t out, double* y) {
  const auto n = static_cast<std::int64_t>(rows);
#pragma omp parallel for schedule(static) if (rows * in * out > 100000)
  for (std::int64_t r = 0; r < n; ++r) {
    const double* xr = x + r * in;
    double* yr = y + r * out;
    for (std::size_t o = 0; o < out; ++o) yr[o] = b[o];
    for (std::size_t i = 0; i < in; ++i) {
      const double xi = xr[i];
      if (xi == 0.0) continue;  // ReLU zeros; adding 0*w leaves every finite sum unchanged
      const double* wi = w + i * out;
      for (std::size_t o = 0; o < out; ++o) yr[o] += xi * wi[o];
    }
  }
}

void dense_backward_input(const double* dy, std::size_t rows, std::size_t out, const double* wt,
                          std::size_t in, double* dx) {
  const auto n = static_cast<std::int64_t>(rows);
#pragma omp parallel for schedule(static) if (rows * in * out > 100000)
  for (std::int64_t r = 0; r < n; ++r) {
    const double* dyr = dy + r * out;
    double* dxr = dx + r * in;
    for (std::size_t i = 0; i < in; ++i) dxr[i] = 0.0;
    for (std::size_t o = 0; o < out; ++o) {
      const double g = dyr[o];
      if (g == 0.0) continue;
      const double* wo = wt + o * in;
      for (std::size_t i = 0; i < in; ++i) dxr[i] += g * wo[i];
    }
  }
}

void dense_backward_weights(const double* x, const double* dy, std::size_t rows, std::size_t in,
                            std::size_t out, double* dw, double* db) {
  const auto n_in = static_cast<std::int64_t>(in);
#pragma omp parallel for schedule(static) if (rows * in * out > 100000)
  for (std::int64_t i = 0; i < n_in; ++i) {
    double* dwi = dw + i * out;
    for (std::size_t o = 0; o < out; ++o) dwi[o] = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
      const double xi = x[r * in + i];
      if (xi == 0.0) continue;
      const double* dyr = dy + r * out;
      for (std::size_t o = 0; o < out; ++o) dwi[o] += xi * dyr[o];
    }
  }
  for (std::size_t o = 0; o < out; ++o) db[o] = 0.0;
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t o = 0; o < out; ++o) db[o] += dy[r * out + o];
}

void transpose(const double* w, std::size_t in, std::size_t out, double* wt) {
  for (std::size_t i = 0; i < in; ++i)
    for (std::size_t o = 0; o < out; ++o) wt[o * in + i] = w[i * out + o];
}

namespace reference {

void dense_forward(const double* x, std::size_t rows, std::size_t in, const double* w,
                   const double* b, std::size_t out, double* y) {
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t o = 0; o < out; ++o) {
      double acc = b[o];
      for (std::size_t i = 0; i < in; ++i) {
        if (x[r * in + i] != 0.0) acc += x[r * in + i] * w[i * out + o];
      }
      y[r * out + o] = acc;
    }
  }
}

void dense_backward_input(const double* dy, std::size_t rows, std::size_t out, const double* w,
                          std::size_t in, double* dx) {
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t i = 0; i < in; ++i) {
      double acc = 0.0;
      for (std::size_t o = 0; o < out; ++o) {
        if (dy[r * out + o] != 0.0) acc += dy[r * out + o] * w[i * out + o];
      }
      dx[r * in + i] = acc;
    }
  }
}

void dense_backward_weights(const double* x, const double* dy, std::size_t rows, std::size_t in,
                            std::size_t out, double* dw, double* db) {
  for (std::size_t i = 0; i < in; ++i) {
    for (std::size_t o = 0; o < out; ++o) {
      double acc = 0.0;
      for (std::size_t r = 0; r < rows; ++r) {
        if (x[r * in + i] != 0.0) acc += x[r * in + i] * dy[r * out + o];
      }
      dw[i * out + o] = acc;
    }
  }
  for (std::size_t o = 0; o < out; ++o) {
    double acc = 0.0;
    for (std::size_t r = 0; r < rows; ++r) acc += dy[r * out + o];
    db[o] = acc;
  }
}

}  // namespace reference

}  // namespace monolab::kernels
