#include "crl/kernels.hpp"

#include <atomic>
#include <cstdlib>

#include "crl/errors.hpp"

namespace crl::kernels {

namespace {
std::atomic<int> g_threads{1};
}

void set_threads(int n) { g_threads.store(n < 1 ? 1 : n); }

int threads() { return g_threads.load(); }

int init_threads_from_env() {
  int n = 1;
  if (const char* env = std::getenv("CRL_THREADS")) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1 || v > 4096)
      throw ConfigError("CRL_THREADS must be an integer in [1, 4096]");
    n = static_cast<int>(v);
  }
  set_threads(n);
  return n;
}

// Dispatch: the parallel backend only pays off past one thread.
#define CRL_DISPATCH(fn, ...) \
  do {                        \
    if (threads() > 1)        \
      par::fn(__VA_ARGS__);   \
    else                      \
      serial::fn(__VA_ARGS__); \
  } while (0)

void linear_forward(const Mat& x, const Mat& w, const Vec& b, Mat& y) {
  CRL_DISPATCH(linear_forward, x, w, b, y);
}
void linear_grad_input(const Mat& dy, const Mat& w, Mat& dx) {
  CRL_DISPATCH(linear_grad_input, dy, w, dx);
}
void linear_grad_params(const Mat& dy, const Mat& x, Mat& dw, Vec& db) {
  CRL_DISPATCH(linear_grad_params, dy, x, dw, db);
}
void relu_forward(const Mat& x, Mat& y) { CRL_DISPATCH(relu_forward, x, y); }
void relu_backward(const Mat& pre, const Mat& dy, Mat& dx) {
  CRL_DISPATCH(relu_backward, pre, dy, dx);
}
void softmax_rows(const Mat& logits, Mat& p) { CRL_DISPATCH(softmax_rows, logits, p); }
void l2_normalize_rows(const Mat& x, Mat& y, Vec& norms) {
  CRL_DISPATCH(l2_normalize_rows, x, y, norms);
}
void l2_normalize_backward_add(const Mat& y, const Vec& norms, const Mat& dy, Mat& dx) {
  CRL_DISPATCH(l2_normalize_backward_add, y, norms, dy, dx);
}
void add_inplace(Mat& y, const Mat& x) { CRL_DISPATCH(add_inplace, y, x); }
void sq_dists_to_row(const Mat& x, int row, Vec& out) { CRL_DISPATCH(sq_dists_to_row, x, row, out); }
void argmax_rows(const Mat& p, std::vector<int32_t>& out) { CRL_DISPATCH(argmax_rows, p, out); }
void sgd_update(Vec& w, const Vec& g, Vec& v, double lr, double momentum, double weight_decay) {
  CRL_DISPATCH(sgd_update, w, g, v, lr, momentum, weight_decay);
}

#undef CRL_DISPATCH

}  // namespace crl::kernels
