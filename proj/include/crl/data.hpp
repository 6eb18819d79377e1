#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "crl/mat.hpp"

namespace crl {

// Multi-attribute labeling: each sample carries one class value per attribute
// category, and attribute j takes values in [0, cardinality(j)).
struct AttributeSchema {
  std::vector<int> cardinalities;

  int n_attr() const { return static_cast<int>(cardinalities.size()); }
  int cardinality(int j) const { return cardinalities[j]; }
  void validate() const;  // n_attr >= 1, every cardinality >= 2

  bool operator==(const AttributeSchema& o) const = default;
};

// One sample as a value (the dataset itself stores flat arrays).
struct Sample {
  std::vector<double> features;
  std::vector<int32_t> labels;
};

// Immutable after construction; iteration order is the storage order.
struct Dataset {
  AttributeSchema schema;
  int feature_dim = 0;
  int64_t n = 0;
  std::vector<double> features;  // n x feature_dim, row-major
  std::vector<int32_t> labels;   // n x n_attr, row-major

  const double* feature_row(int64_t i) const {
    return features.data() + i * static_cast<int64_t>(feature_dim);
  }
  const int32_t* label_row(int64_t i) const {
    return labels.data() + i * static_cast<int64_t>(schema.n_attr());
  }
  int32_t label(int64_t i, int j) const { return label_row(i)[j]; }
  Sample sample(int64_t i) const;

  std::vector<int64_t> class_counts(int attr) const;
  void validate() const;  // label bounds, finite features, consistent sizes

  bool operator==(const Dataset& o) const = default;
};

// Synthetic data model: labels drawn per attribute from a prior; features are
// the sum of the drawn classes' prototype vectors plus isotropic Gaussian
// noise. Class signals are additive and linearly separable in principle, so
// poor minority performance is attributable to imbalance rather than to an
// unlearnable task.
struct GeneratorSpec {
  AttributeSchema schema;
  int feature_dim = 0;
  std::vector<std::vector<double>> priors;  // [attr][class], each sums to 1
  std::vector<Mat> prototypes;              // [attr]: cardinality x feature_dim
  double noise_sigma = 1.0;
  int64_t n_samples = 0;
  uint64_t seed = 0;

  void validate() const;
};

Dataset generate_synthetic(const GeneratorSpec& spec);

// Self-describing binary format (magic "CRLD"); round trips are bit-exact.
void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

// Disjoint covering partition; split sizes come from largest-remainder
// rounding of the fractions, assignment from a seeded permutation.
std::vector<Dataset> split(const Dataset& ds, const std::vector<double>& fractions, uint64_t seed);

// Size allocation used by split(), exposed for tests.
std::vector<int64_t> largest_remainder_sizes(int64_t n, const std::vector<double>& fractions);

// FNV-1a over schema, features, and labels; identifies a split across runs.
uint64_t dataset_hash(const Dataset& ds);

}  // namespace crl
