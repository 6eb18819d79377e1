#pragma once

#include <cstdint>
#include <vector>

#include "crl/data.hpp"
#include "crl/losses.hpp"
#include "crl/mat.hpp"

namespace crl {

enum class SamplerMode { kUniform, kOversample, kDownsample };

// One epoch's worth of training indices and how they were produced. Plans are
// immutable; the harness draws a fresh one per epoch with a per-epoch seed.
//
// Resampling is keyed to a single reference attribute: with several labels
// per sample there is no exact joint balancing, so the classes of one chosen
// attribute (by default the most imbalanced) drive duplication or capping.
struct SamplerPlan {
  SamplerMode mode = SamplerMode::kUniform;
  int reference_attr = 0;
  uint64_t seed = 0;
  std::vector<int64_t> indices;
};

// uniform: seeded permutation of 0..n-1.
// oversample: per class of the reference attribute, all originals plus draws
// with replacement up to the largest class count, then shuffled. Every class
// lands on the majority count exactly.
// downsample: per class, a seeded subsample of the smallest class count, then
// shuffled. A class with zero samples cannot be capped and is a config error.
SamplerPlan make_sampler(const Dataset& ds, SamplerMode mode, int reference_attr, uint64_t seed);

// Attribute with the largest max/min-nonzero class count ratio; ties go to
// the lower index. The default reference attribute for resampling.
int most_imbalanced_attr(const Dataset& ds);

// Inverse-frequency cost weights w_{j,c} = n / (|Z_j| * max(count, 1)),
// rescaled so the dataset-mean weight per attribute is 1. The count floor
// keeps absent classes finite.
struct ClassWeights {
  std::vector<Vec> w;  // [attr][class]
};

ClassWeights cost_weights(const Dataset& ds);

// Cross-entropy with each sample-attribute term scaled by the weight of its
// true class. Unit weights reproduce cross_entropy bit for bit.
LossBundle weighted_cross_entropy(const ForwardCache& cache, const IntMat& labels,
                                  const ClassWeights& weights);

}  // namespace crl
