#pragma once

#include <cstdint>
#include <vector>

#include "crl/data.hpp"
#include "crl/mat.hpp"
#include "crl/mining.hpp"
#include "crl/network.hpp"

namespace crl {

// Soft histogram layout: tau uniformly spaced bin centers b_t spanning
// [lo, hi], step delta. A distance spreads its unit mass linearly over the
// two bins bracketing it (triangular kernel), which keeps the histogram a
// partition of unity and makes binning piecewise-differentiable.
struct HistogramSpec {
  int tau = 51;
  double lo = 0.0;
  double hi = 2.0;  // diameter of the unit sphere under L2

  double delta() const { return (hi - lo) / (tau - 1); }
  void validate() const;  // tau >= 2, hi > lo
};

// Rectification margins: the per-attribute triplet margin is 2*pi/|Z_j|
// (classes as equally spaced directions); m_apc bounds negative-pair
// distances in the absolute variant.
struct MarginSpec {
  std::vector<double> m;  // [attr]
  double m_apc = 1.0;
};

double margin(const AttributeSchema& schema, int j);
MarginSpec margins_for(const AttributeSchema& schema, double m_apc = 1.0);

// Where a distance lands in the soft histogram: segment index s (between bin
// centers b_s and b_{s+1}) and the fraction u of its mass given to b_{s+1}.
// Out-of-range distances clamp to the end bins and are flagged.
struct BinCoord {
  int seg = 0;
  double u = 0.0;
  bool clamped = false;
};
BinCoord bin_coord(double d, const HistogramSpec& hist);

// Unit mass per distance through the triangular kernel, normalized by count;
// sums to 1 for non-empty input.
Vec soft_histogram(const std::vector<double>& dists, const HistogramSpec& hist);

// Scalar loss plus analytic gradients. grad_logits feeds the softmax heads
// (cross-entropy); grad_feat feeds the distance features (rectification
// losses). Either may be empty meaning identically zero. Counters describe
// what the batch offered the loss to work with.
struct LossBundle {
  double value = 0.0;
  std::vector<Mat> grad_logits;
  std::vector<Mat> grad_feat;

  int64_t n_anchors = 0;
  int64_t n_triplets = 0;
  int64_t n_pos_pairs = 0;
  int64_t n_neg_pairs = 0;
  int64_t out_of_range = 0;    // distribution distances clamped into range
  bool empty_side = false;     // a pair set was missing positives or negatives
  double ce_component = 0.0;   // combined loss only
  double crl_component = 0.0;  // combined loss only
};

// Mean over samples of the summed per-attribute negative log-likelihood;
// probabilities are clamped at 1e-12 before the log.
LossBundle cross_entropy(const ForwardCache& cache, const IntMat& labels);

// Mean triplet hinge max(0, m_j + d(a,p) - d(a,n)) over the given set.
LossBundle crl_relative(const TripletSet& triplets, const ForwardCache& cache,
                        const MarginSpec& margins);

// 0.5 * (mean positive d^2 + mean negative max(m_apc - d, 0)^2).
LossBundle crl_absolute(const PairSet& pairs, const ForwardCache& cache, double m_apc);

// Probability that a random negative-pair distance falls below (or ties) a
// random positive-pair distance, computed on soft histograms of the two
// distance sets.
LossBundle crl_distribution(const PairSet& pairs, const ForwardCache& cache,
                            const HistogramSpec& hist);

enum class CrlVariant { kNone, kRelative, kAbsolute, kDistribution };

struct CrlOptions {
  CrlVariant variant = CrlVariant::kRelative;
  MiningMode mode = MiningMode::kInstanceLevel;
  int K = 5;
  double m_apc = 1.0;
  HistogramSpec hist;
  double crl_weight = 1.0;  // unit blending per the loss definition
};

// Full batch loss: cross-entropy plus the selected rectification variant,
// mined on this batch. Per-attribute rectification terms are averaged over
// the attributes that produced work; variant none reduces to cross-entropy
// exactly.
LossBundle combined_loss(const ForwardCache& cache, const IntMat& labels,
                         const AttributeSchema& schema, const CrlOptions& opt);

// Same composition, but on mining selections made elsewhere. The hard-example
// choices act as constants of the loss surface, so this is the function a
// finite-difference check (or a resumed evaluation) differentiates.
LossBundle combined_loss_frozen(const ForwardCache& cache, const IntMat& labels,
                                const AttributeSchema& schema, const CrlOptions& opt,
                                const TripletSet& triplets, const PairSet& pairs);

}  // namespace crl
