#include "crl/kernels.hpp"

#include "crl/errors.hpp"
#include "kernel_rows.hpp"

namespace crl::kernels::serial {

using namespace detail;

void linear_forward(const Mat& x, const Mat& w, const Vec& b, Mat& y) {
  for (int r = 0; r < x.rows; ++r) linear_forward_row(x.row(r), w, b, y.row(r));
}

void linear_grad_input(const Mat& dy, const Mat& w, Mat& dx) {
  for (int r = 0; r < dy.rows; ++r) linear_grad_input_row(dy.row(r), w, dx.row(r));
}

void linear_grad_params(const Mat& dy, const Mat& x, Mat& dw, Vec& db) {
  for (int o = 0; o < dw.rows; ++o) linear_grad_params_row(o, dy, x, dw, db);
}

void relu_forward(const Mat& x, Mat& y) {
  for (size_t i = 0; i < x.size(); ++i) y.a[i] = x.a[i] > 0.0 ? x.a[i] : 0.0;
}

void relu_backward(const Mat& pre, const Mat& dy, Mat& dx) {
  for (size_t i = 0; i < pre.size(); ++i) dx.a[i] = pre.a[i] > 0.0 ? dy.a[i] : 0.0;
}

void softmax_rows(const Mat& logits, Mat& p) {
  for (int r = 0; r < logits.rows; ++r) softmax_row(logits.row(r), logits.cols, p.row(r));
}

void l2_normalize_rows(const Mat& x, Mat& y, Vec& norms) {
  if (!y.same_shape(x)) y = Mat(x.rows, x.cols);
  norms.resize(static_cast<size_t>(x.rows));
  for (int r = 0; r < x.rows; ++r) norms[r] = l2_normalize_row(x.row(r), x.cols, y.row(r));
}

void l2_normalize_backward_add(const Mat& y, const Vec& norms, const Mat& dy, Mat& dx) {
  for (int r = 0; r < y.rows; ++r)
    l2_normalize_backward_row(y.row(r), norms[r], dy.row(r), y.cols, dx.row(r));
}

void add_inplace(Mat& y, const Mat& x) {
  for (size_t i = 0; i < y.size(); ++i) y.a[i] += x.a[i];
}

void sq_dists_to_row(const Mat& x, int row, Vec& out) {
  out.resize(static_cast<size_t>(x.rows));
  const double* anchor = x.row(row);
  for (int r = 0; r < x.rows; ++r) out[r] = sq_dist(x.row(r), anchor, x.cols);
}

void argmax_rows(const Mat& p, std::vector<int32_t>& out) {
  out.resize(static_cast<size_t>(p.rows));
  for (int r = 0; r < p.rows; ++r) out[r] = argmax_row(p.row(r), p.cols);
}

void sgd_update(Vec& w, const Vec& g, Vec& v, double lr, double momentum, double weight_decay) {
  sgd_update_span(w.data(), g.data(), v.data(), 0, w.size(), lr, momentum, weight_decay);
}

}  // namespace crl::kernels::serial
