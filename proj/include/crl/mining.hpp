#pragma once

#include <vector>

#include "crl/data.hpp"
#include "crl/mat.hpp"
#include "crl/network.hpp"

namespace crl {

// Per-batch imbalance profile. Minority classes are found greedily: sort
// classes by ascending batch count (ties toward the lower class index) and
// accumulate from the smallest while the running total stays strictly below
// half the batch. Recomputed every batch; there is no cross-batch state.
struct BatchProfile {
  int n_bs = 0;
  std::vector<std::vector<int>> histogram;     // [attr][class] batch counts
  std::vector<std::vector<int>> minority;      // [attr] ascending class ids
  std::vector<std::vector<char>> is_minority;  // [attr][class]

  bool minority_class(int attr, int cls) const { return is_minority[attr][cls] != 0; }
};

// One (sample, attribute) anchor; its class is minority in this batch and
// occurs here at least twice.
struct Anchor {
  int sample = 0;
  int attr = 0;
  int cls = 0;

  bool operator==(const Anchor& o) const = default;
};

enum class MiningMode { kClassLevel, kInstanceLevel };

// Hard-positive and hard-negative batch indices. Class-level entries exist
// per (attribute, minority class with >= 2 samples); instance-level entries
// exist per anchor, in anchor order.
struct HardSets {
  struct ClassEntry {
    int attr = 0;
    int cls = 0;
    std::vector<int> pos;  // in-class, lowest p(y=c|x) first
    std::vector<int> neg;  // out-of-class, highest p(y=c|x) first
  };
  struct AnchorEntry {
    Anchor anchor;
    std::vector<int> pos;  // in-class misclassified, farthest first
    std::vector<int> neg;  // out-of-class, nearest first
  };

  MiningMode mode = MiningMode::kClassLevel;
  int K = 0;
  std::vector<ClassEntry> class_entries;    // class-level mode
  std::vector<AnchorEntry> anchor_entries;  // instance-level mode
};

struct Triplet {
  int attr = 0;
  int cls = 0;
  int anchor = 0;
  int pos = 0;
  int neg = 0;
};

struct TripletSet {
  std::vector<Triplet> items;
};

struct IndexPair {
  int attr = 0;
  int cls = 0;
  int a = 0;  // the anchor
  int b = 0;  // its partner
};

struct PairSet {
  std::vector<IndexPair> pos;  // partner shares the anchor's label
  std::vector<IndexPair> neg;  // partner does not
};

BatchProfile profile_batch(const IntMat& labels, const AttributeSchema& schema);

// All anchors, ordered by (attribute, sample).
std::vector<Anchor> anchors(const BatchProfile& profile, const IntMat& labels);

// Bottom-K in-class / top-K out-of-class by posterior score p(y=c|x).
HardSets mine_class_level(const BatchProfile& profile, const IntMat& labels,
                          const ForwardCache& cache, int K);

// Per anchor: in-class misclassified samples with the largest feature
// distance / out-of-class samples with the smallest, anchor excluded.
HardSets mine_instance_level(const BatchProfile& profile, const IntMat& labels,
                             const ForwardCache& cache, int K);

// Cartesian product of each anchor's positives and negatives. Class-level
// mode reads the anchor's class sets, skipping the anchor when it appears in
// its own positive set; instance-level mode reads the anchor's own sets.
TripletSet build_triplets(const HardSets& hard, const std::vector<Anchor>& anchors);

// Each anchor paired with each of its positives (P+) and negatives (P-).
PairSet build_pairs(const HardSets& hard, const std::vector<Anchor>& anchors);

}  // namespace crl
