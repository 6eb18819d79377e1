// Timing comparison of the serial reference kernels against the OpenMP
// variants, plus a bit-identity spot check at the benchmarked sizes. Run with
// CRL_THREADS set to the core count to see the parallel side.
#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <string>
#include <vector>

#include "crl/kernels.hpp"
#include "crl/rng.hpp"

using crl::Mat;
using crl::Rng;
using crl::Vec;

namespace {

Mat random_mat(int r, int c, Rng& rng) {
  Mat m(r, c);
  for (double& v : m.a) v = rng.normal();
  return m;
}

double time_ms(const std::function<void()>& fn, int reps) {
  fn();  // warm-up, and first-touch allocation
  auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) fn();
  auto dt = std::chrono::steady_clock::now() - t0;
  return std::chrono::duration<double, std::milli>(dt).count() / reps;
}

struct Row {
  std::string name;
  double serial_ms;
  double par_ms;
  bool identical;
};

}  // namespace

int main(int argc, char** argv) {
  int n = 2048, d = 256, out = 256, reps = 20;
  for (int i = 1; i < argc; ++i) {
    if (!std::strcmp(argv[i], "--n") && i + 1 < argc) n = std::atoi(argv[++i]);
    else if (!std::strcmp(argv[i], "--dim") && i + 1 < argc) d = std::atoi(argv[++i]);
    else if (!std::strcmp(argv[i], "--out") && i + 1 < argc) out = std::atoi(argv[++i]);
    else if (!std::strcmp(argv[i], "--reps") && i + 1 < argc) reps = std::atoi(argv[++i]);
    else {
      std::printf("usage: bench_kernels [--n rows] [--dim cols] [--out width] [--reps k]\n");
      return 2;
    }
  }
  const int threads = crl::kernels::init_threads_from_env();
  std::printf("rows %d, in %d, out %d, %d reps, %d thread(s)\n\n", n, d, out, reps, threads);

  Rng rng(1);
  Mat x = random_mat(n, d, rng);
  Mat w = random_mat(out, d, rng);
  Vec b(static_cast<size_t>(out), 0.1);
  Mat dy = random_mat(n, out, rng);

  std::vector<Row> rows;
  auto bench = [&](const std::string& name, const std::function<void(Mat&)>& serial_fn,
                   const std::function<void(Mat&)>& par_fn) {
    Mat ys, yp;
    Row row;
    row.name = name;
    row.serial_ms = time_ms([&] { serial_fn(ys); }, reps);
    row.par_ms = time_ms([&] { par_fn(yp); }, reps);
    row.identical = ys.same_shape(yp) && ys.a == yp.a;
    rows.push_back(row);
  };

  namespace ks = crl::kernels::serial;
  namespace kp = crl::kernels::par;

  bench(
      "linear_forward", [&](Mat& y) { ks::linear_forward(x, w, b, y); },
      [&](Mat& y) { kp::linear_forward(x, w, b, y); });
  bench(
      "linear_grad_input", [&](Mat& y) { ks::linear_grad_input(dy, w, y); },
      [&](Mat& y) { kp::linear_grad_input(dy, w, y); });
  bench(
      "linear_grad_params",
      [&](Mat& dw) {
        Vec db;
        ks::linear_grad_params(dy, x, dw, db);
      },
      [&](Mat& dw) {
        Vec db;
        kp::linear_grad_params(dy, x, dw, db);
      });
  bench(
      "relu_forward", [&](Mat& y) { ks::relu_forward(x, y); },
      [&](Mat& y) { kp::relu_forward(x, y); });
  bench(
      "softmax_rows", [&](Mat& p) { ks::softmax_rows(dy, p); },
      [&](Mat& p) { kp::softmax_rows(dy, p); });
  bench(
      "l2_normalize_rows",
      [&](Mat& y) {
        Vec norms;
        ks::l2_normalize_rows(x, y, norms);
      },
      [&](Mat& y) {
        Vec norms;
        kp::l2_normalize_rows(x, y, norms);
      });

  // sq_dists_to_row writes a Vec; wrap it in a 1-row Mat for the comparison.
  bench(
      "sq_dists_to_row",
      [&](Mat& y) {
        Vec d2;
        ks::sq_dists_to_row(x, 0, d2);
        y = Mat(1, n);
        std::copy(d2.begin(), d2.end(), y.row(0));
      },
      [&](Mat& y) {
        Vec d2;
        kp::sq_dists_to_row(x, 0, d2);
        y = Mat(1, n);
        std::copy(d2.begin(), d2.end(), y.row(0));
      });

  std::printf("%-20s %12s %12s %9s %s\n", "kernel", "serial ms", "openmp ms", "speedup",
              "bit-identical");
  for (const Row& row : rows)
    std::printf("%-20s %12.3f %12.3f %8.2fx %s\n", row.name.c_str(), row.serial_ms, row.par_ms,
                row.serial_ms / row.par_ms, row.identical ? "yes" : "NO");

  bool all_same = true;
  for (const Row& row : rows) all_same = all_same && row.identical;
  if (!all_same) {
    std::printf("\nbackends disagree; the parallel kernels are broken\n");
    return 1;
  }
  return 0;
}
