#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace crl {

using Vec = std::vector<double>;

// Dense row-major matrix of doubles. Plain storage; all heavy math lives in
// kernels.hpp.
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<double> a;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {}

  double& operator()(int i, int j) { return a[static_cast<size_t>(i) * cols + j]; }
  double operator()(int i, int j) const { return a[static_cast<size_t>(i) * cols + j]; }

  double* row(int i) { return a.data() + static_cast<size_t>(i) * cols; }
  const double* row(int i) const { return a.data() + static_cast<size_t>(i) * cols; }

  size_t size() const { return a.size(); }
  bool empty() const { return a.empty(); }
  bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }
  void zero() { std::fill(a.begin(), a.end(), 0.0); }
};

// Row-major matrix of 32-bit ints (labels, predictions).
struct IntMat {
  int rows = 0;
  int cols = 0;
  std::vector<int32_t> a;

  IntMat() = default;
  IntMat(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0) {}

  int32_t& operator()(int i, int j) { return a[static_cast<size_t>(i) * cols + j]; }
  int32_t operator()(int i, int j) const { return a[static_cast<size_t>(i) * cols + j]; }

  const int32_t* row(int i) const { return a.data() + static_cast<size_t>(i) * cols; }

  bool operator==(const IntMat& o) const { return rows == o.rows && cols == o.cols && a == o.a; }
};

inline bool all_finite(const double* p, size_t n) {
  for (size_t i = 0; i < n; ++i) {
    if (!std::isfinite(p[i])) return false;
  }
  return true;
}

inline bool all_finite(const Mat& m) { return all_finite(m.a.data(), m.a.size()); }
inline bool all_finite(const Vec& v) { return all_finite(v.data(), v.size()); }

}  // namespace crl
