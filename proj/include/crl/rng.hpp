#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "crl/errors.hpp"

namespace crl {

// Deterministic random source. The engine (mt19937_64) is fully specified by
// the standard; the distributions are hand-rolled because the std ones are
// implementation-defined and would break the bit-reproducibility contract.
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  uint64_t next_u64() { return eng_(); }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller. Two engine draws per variate; no cached
  // spare, so the draw count per call is fixed.
  double normal() {
    double u1 = 1.0 - uniform();  // (0, 1]
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    return r * std::cos(6.283185307179586476925286766559 * u2);
  }

  // Uniform integer in [0, n). Rejection sampling, no modulo bias.
  uint64_t bounded(uint64_t n) {
    if (n == 0) throw ContractError("Rng::bounded requires n > 0");
    uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x;
    do {
      x = eng_();
    } while (x >= limit);
    return x % n;
  }

  // Index draw from a cumulative distribution (cdf ascending, last entry 1).
  int categorical(const std::vector<double>& cdf) {
    double u = uniform();
    int n = static_cast<int>(cdf.size());
    for (int i = 0; i < n; ++i) {
      if (u < cdf[i]) return i;
    }
    return n - 1;
  }

  // Fisher-Yates.
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(bounded(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // Derives an independent stream seed (splitmix64 finalizer over seed^stream).
  static uint64_t mix(uint64_t seed, uint64_t stream) {
    uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::mt19937_64 eng_;
};

inline std::vector<double> prior_to_cdf(const std::vector<double>& prior) {
  std::vector<double> cdf(prior.size());
  double acc = 0.0;
  for (size_t i = 0; i < prior.size(); ++i) {
    acc += prior[i];
    cdf[i] = acc;
  }
  if (!cdf.empty()) cdf.back() = 1.0;
  return cdf;
}

}  // namespace crl
