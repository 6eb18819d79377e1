#pragma once

#include <cstdint>

#include "crl/mat.hpp"

namespace crl::kernels {

// Batch-level numeric kernels. Every kernel exists twice: a serial reference
// in kernels::serial and an OpenMP variant in kernels::par. Both compute each
// output element with the same inner loop, so their results are bit-identical
// at any thread count; the serial versions stay around as the oracle for the
// parallel ones and as the 1-thread fast path. The unqualified functions
// below dispatch on the global thread count.
//
// Shared conventions:
//   linear layers use y = x * w^T + b with w laid out [out x in];
//   gradient kernels overwrite their outputs unless the name says _add.

void set_threads(int n);  // clamped to >= 1
int threads();
// Reads CRL_THREADS (default 1) and installs it.
int init_threads_from_env();

namespace serial {
void linear_forward(const Mat& x, const Mat& w, const Vec& b, Mat& y);
void linear_grad_input(const Mat& dy, const Mat& w, Mat& dx);
void linear_grad_params(const Mat& dy, const Mat& x, Mat& dw, Vec& db);
void relu_forward(const Mat& x, Mat& y);
void relu_backward(const Mat& pre, const Mat& dy, Mat& dx);
void softmax_rows(const Mat& logits, Mat& p);
void l2_normalize_rows(const Mat& x, Mat& y, Vec& norms);
void l2_normalize_backward_add(const Mat& y, const Vec& norms, const Mat& dy, Mat& dx);
void add_inplace(Mat& y, const Mat& x);
void sq_dists_to_row(const Mat& x, int row, Vec& out);
void argmax_rows(const Mat& p, std::vector<int32_t>& out);
void sgd_update(Vec& w, const Vec& g, Vec& v, double lr, double momentum, double weight_decay);
}  // namespace serial

namespace par {
void linear_forward(const Mat& x, const Mat& w, const Vec& b, Mat& y);
void linear_grad_input(const Mat& dy, const Mat& w, Mat& dx);
void linear_grad_params(const Mat& dy, const Mat& x, Mat& dw, Vec& db);
void relu_forward(const Mat& x, Mat& y);
void relu_backward(const Mat& pre, const Mat& dy, Mat& dx);
void softmax_rows(const Mat& logits, Mat& p);
void l2_normalize_rows(const Mat& x, Mat& y, Vec& norms);
void l2_normalize_backward_add(const Mat& y, const Vec& norms, const Mat& dy, Mat& dx);
void add_inplace(Mat& y, const Mat& x);
void sq_dists_to_row(const Mat& x, int row, Vec& out);
void argmax_rows(const Mat& p, std::vector<int32_t>& out);
void sgd_update(Vec& w, const Vec& g, Vec& v, double lr, double momentum, double weight_decay);
}  // namespace par

void linear_forward(const Mat& x, const Mat& w, const Vec& b, Mat& y);
void linear_grad_input(const Mat& dy, const Mat& w, Mat& dx);
void linear_grad_params(const Mat& dy, const Mat& x, Mat& dw, Vec& db);
void relu_forward(const Mat& x, Mat& y);
void relu_backward(const Mat& pre, const Mat& dy, Mat& dx);
void softmax_rows(const Mat& logits, Mat& p);
void l2_normalize_rows(const Mat& x, Mat& y, Vec& norms);
void l2_normalize_backward_add(const Mat& y, const Vec& norms, const Mat& dy, Mat& dx);
void add_inplace(Mat& y, const Mat& x);
void sq_dists_to_row(const Mat& x, int row, Vec& out);
void argmax_rows(const Mat& p, std::vector<int32_t>& out);
void sgd_update(Vec& w, const Vec& g, Vec& v, double lr, double momentum, double weight_decay);

}  // namespace crl::kernels
