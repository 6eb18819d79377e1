#pragma once

#include <cmath>

#include "crl/mat.hpp"

// Per-element workers shared by the serial and OpenMP kernel backends. Both
// backends must run exactly this arithmetic so their outputs stay bit-equal.

namespace crl::kernels::detail {

constexpr double kNormFloor = 1e-12;

inline double dot(const double* a, const double* b, int n) {
  double acc = 0.0;
  for (int i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

inline void linear_forward_row(const double* x, const Mat& w, const Vec& b, double* y) {
  for (int o = 0; o < w.rows; ++o) y[o] = dot(x, w.row(o), w.cols) + b[o];
}

// dx = dy * w for one batch row.
inline void linear_grad_input_row(const double* dy, const Mat& w, double* dx) {
  for (int c = 0; c < w.cols; ++c) dx[c] = 0.0;
  for (int o = 0; o < w.rows; ++o) {
    const double g = dy[o];
    const double* wr = w.row(o);
    for (int c = 0; c < w.cols; ++c) dx[c] += g * wr[c];
  }
}

// One output row of dw = dy^T x, plus its bias slot. Row-parallel over the
// "out" dimension keeps each accumulation order fixed.
inline void linear_grad_params_row(int o, const Mat& dy, const Mat& x, Mat& dw, Vec& db) {
  double* dwr = dw.row(o);
  for (int c = 0; c < x.cols; ++c) dwr[c] = 0.0;
  double acc_b = 0.0;
  for (int r = 0; r < x.rows; ++r) {
    const double g = dy(r, o);
    acc_b += g;
    const double* xr = x.row(r);
    for (int c = 0; c < x.cols; ++c) dwr[c] += g * xr[c];
  }
  db[o] = acc_b;
}

inline void softmax_row(const double* z, int n, double* p) {
  double m = z[0];
  for (int i = 1; i < n; ++i) m = z[i] > m ? z[i] : m;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    p[i] = std::exp(z[i] - m);
    sum += p[i];
  }
  const double inv = 1.0 / sum;
  for (int i = 0; i < n; ++i) p[i] *= inv;
}

// Zero-norm rows normalize to zero (ReLU can produce all-zero features).
inline double l2_normalize_row(const double* x, int n, double* y) {
  double norm = std::sqrt(dot(x, x, n));
  if (norm < kNormFloor) {
    for (int i = 0; i < n; ++i) y[i] = 0.0;
  } else {
    const double inv = 1.0 / norm;
    for (int i = 0; i < n; ++i) y[i] = x[i] * inv;
  }
  return norm;
}

// dx += J^T dy through y = x/|x|; zero-norm rows get no gradient.
inline void l2_normalize_backward_row(const double* y, double norm, const double* dy, int n,
                                      double* dx) {
  if (norm < kNormFloor) return;
  const double proj = dot(y, dy, n);
  const double inv = 1.0 / norm;
  for (int i = 0; i < n; ++i) dx[i] += (dy[i] - y[i] * proj) * inv;
}

inline double sq_dist(const double* a, const double* b, int n) {
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

inline int argmax_row(const double* p, int n) {
  int best = 0;
  for (int i = 1; i < n; ++i) {
    if (p[i] > p[best]) best = i;  // ties keep the lower index
  }
  return best;
}

inline void sgd_update_span(double* w, const double* g, double* v, size_t lo, size_t hi, double lr,
                            double momentum, double weight_decay) {
  for (size_t i = lo; i < hi; ++i) {
    v[i] = momentum * v[i] - lr * (g[i] + weight_decay * w[i]);
    w[i] += v[i];
  }
}

}  // namespace crl::kernels::detail
