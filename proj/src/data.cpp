#include "crl/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

#include "crl/binio.hpp"
#include "crl/errors.hpp"
#include "crl/hash.hpp"
#include "crl/rng.hpp"

namespace crl {

namespace {
constexpr char kMagic[4] = {'C', 'R', 'L', 'D'};
constexpr uint16_t kFormatVersion = 1;
constexpr double kPriorTol = 1e-9;
}  // namespace

void AttributeSchema::validate() const {
  if (cardinalities.empty()) throw ConfigError("schema needs at least one attribute");
  for (size_t j = 0; j < cardinalities.size(); ++j) {
    if (cardinalities[j] < 2)
      throw ConfigError("attribute " + std::to_string(j) + " cardinality must be >= 2, got " +
                        std::to_string(cardinalities[j]));
  }
}

Sample Dataset::sample(int64_t i) const {
  Sample s;
  s.features.assign(feature_row(i), feature_row(i) + feature_dim);
  s.labels.assign(label_row(i), label_row(i) + schema.n_attr());
  return s;
}

std::vector<int64_t> Dataset::class_counts(int attr) const {
  std::vector<int64_t> counts(schema.cardinality(attr), 0);
  for (int64_t i = 0; i < n; ++i) ++counts[label(i, attr)];
  return counts;
}

void Dataset::validate() const {
  schema.validate();
  if (n < 1) throw ConfigError("dataset must contain at least one sample");
  if (feature_dim < 1) throw ConfigError("feature_dim must be >= 1");
  if (static_cast<int64_t>(features.size()) != n * feature_dim ||
      static_cast<int64_t>(labels.size()) != n * schema.n_attr())
    throw ContractError("dataset storage sizes inconsistent with n/d/n_attr");
  if (!all_finite(features.data(), features.size()))
    throw NumericError("dataset features contain non-finite values");
  for (int64_t i = 0; i < n; ++i) {
    for (int j = 0; j < schema.n_attr(); ++j) {
      int32_t a = label(i, j);
      if (a < 0 || a >= schema.cardinality(j))
        throw ContractError("label " + std::to_string(a) + " out of range for attribute " +
                            std::to_string(j) + " (sample " + std::to_string(i) + ")");
    }
  }
}

void GeneratorSpec::validate() const {
  schema.validate();
  if (feature_dim < 1) throw ConfigError("feature_dim must be >= 1");
  if (n_samples < 1) throw ConfigError("n_samples must be >= 1");
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma))
    throw ConfigError("noise_sigma must be finite and >= 0");
  if (priors.size() != static_cast<size_t>(schema.n_attr()) ||
      prototypes.size() != static_cast<size_t>(schema.n_attr()))
    throw ConfigError("priors/prototypes must list one entry per attribute");
  for (int j = 0; j < schema.n_attr(); ++j) {
    const auto& p = priors[j];
    if (p.size() != static_cast<size_t>(schema.cardinality(j)))
      throw ConfigError("prior for attribute " + std::to_string(j) +
                        " must have one entry per class");
    double sum = 0.0;
    for (double v : p) {
      if (!(v >= 0.0) || !std::isfinite(v))
        throw ConfigError("prior entries must be finite and >= 0 (attribute " +
                          std::to_string(j) + ")");
      sum += v;
    }
    if (std::abs(sum - 1.0) > kPriorTol)
      throw ConfigError("prior for attribute " + std::to_string(j) + " sums to " +
                        std::to_string(sum) + ", expected 1");
    if (prototypes[j].rows != schema.cardinality(j) || prototypes[j].cols != feature_dim)
      throw ConfigError("prototypes for attribute " + std::to_string(j) +
                        " must be cardinality x feature_dim");
  }
}

Dataset generate_synthetic(const GeneratorSpec& spec) {
  spec.validate();
  const int n_attr = spec.schema.n_attr();
  const int d = spec.feature_dim;

  std::vector<std::vector<double>> cdfs;
  cdfs.reserve(n_attr);
  for (const auto& prior : spec.priors) cdfs.push_back(prior_to_cdf(prior));

  Dataset ds;
  ds.schema = spec.schema;
  ds.feature_dim = d;
  ds.n = spec.n_samples;
  ds.features.assign(static_cast<size_t>(ds.n) * d, 0.0);
  ds.labels.assign(static_cast<size_t>(ds.n) * n_attr, 0);

  Rng rng(spec.seed);
  for (int64_t i = 0; i < ds.n; ++i) {
    double* x = ds.features.data() + i * d;
    int32_t* a = ds.labels.data() + i * n_attr;
    for (int j = 0; j < n_attr; ++j) {
      a[j] = static_cast<int32_t>(rng.categorical(cdfs[j]));
      const double* proto = spec.prototypes[j].row(a[j]);
      for (int c = 0; c < d; ++c) x[c] += proto[c];
    }
    if (spec.noise_sigma > 0.0) {
      for (int c = 0; c < d; ++c) x[c] += spec.noise_sigma * rng.normal();
    }
  }
  return ds;
}

void save_dataset(const Dataset& ds, const std::string& path) {
  ds.validate();
  BinWriter w(path);
  w.bytes(kMagic, 4);
  w.u16(kFormatVersion);
  w.u64(static_cast<uint64_t>(ds.n));
  w.u32(static_cast<uint32_t>(ds.feature_dim));
  w.u32(static_cast<uint32_t>(ds.schema.n_attr()));
  for (int c : ds.schema.cardinalities) w.u32(static_cast<uint32_t>(c));
  const int n_attr = ds.schema.n_attr();
  for (int64_t i = 0; i < ds.n; ++i) {
    w.f64_array(ds.feature_row(i), ds.feature_dim);
    for (int j = 0; j < n_attr; ++j) w.u32(static_cast<uint32_t>(ds.label(i, j)));
  }
  w.close();
}

Dataset load_dataset(const std::string& path) {
  BinReader r(path);

  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) r.fail("malformed header (bad magic)", 0);
  uint16_t version = r.u16();
  if (version != kFormatVersion)
    r.fail("unsupported format version " + std::to_string(version), 4);

  Dataset ds;
  ds.n = static_cast<int64_t>(r.u64());
  ds.feature_dim = static_cast<int>(r.u32());
  uint32_t n_attr = r.u32();
  if (ds.n < 1 || ds.feature_dim < 1 || n_attr < 1 || n_attr > 1u << 20)
    r.fail("malformed header (n=" + std::to_string(ds.n) + ", d=" +
               std::to_string(ds.feature_dim) + ", n_attr=" + std::to_string(n_attr) + ")",
           6);
  ds.schema.cardinalities.resize(n_attr);
  for (uint32_t j = 0; j < n_attr; ++j) {
    uint64_t at = r.offset();
    uint32_t card = r.u32();
    if (card < 2 || card > 1u << 24)
      r.fail("invalid cardinality " + std::to_string(card) + " for attribute " + std::to_string(j),
             at);
    ds.schema.cardinalities[j] = static_cast<int>(card);
  }

  ds.features.resize(static_cast<size_t>(ds.n) * ds.feature_dim);
  ds.labels.resize(static_cast<size_t>(ds.n) * n_attr);
  for (int64_t i = 0; i < ds.n; ++i) {
    r.f64_array(ds.features.data() + i * ds.feature_dim, ds.feature_dim);
    for (uint32_t j = 0; j < n_attr; ++j) {
      uint64_t at = r.offset();
      uint32_t a = r.u32();
      if (a >= static_cast<uint32_t>(ds.schema.cardinalities[j]))
        r.fail("schema violation: label " + std::to_string(a) + " under cardinality " +
                   std::to_string(ds.schema.cardinalities[j]) + " (sample " + std::to_string(i) +
                   ", attribute " + std::to_string(j) + ")",
               at);
      ds.labels[i * n_attr + j] = static_cast<int32_t>(a);
    }
  }
  if (!all_finite(ds.features.data(), ds.features.size()))
    r.fail("non-finite feature value", r.offset());
  return ds;
}

std::vector<int64_t> largest_remainder_sizes(int64_t n, const std::vector<double>& fractions) {
  if (fractions.empty()) throw ConfigError("split needs at least one fraction");
  double sum = 0.0;
  for (double f : fractions) {
    if (!(f > 0.0) || !std::isfinite(f)) throw ConfigError("split fractions must be positive");
    sum += f;
  }
  if (std::abs(sum - 1.0) > kPriorTol)
    throw ConfigError("split fractions sum to " + std::to_string(sum) + ", expected 1");

  const size_t k = fractions.size();
  std::vector<int64_t> sizes(k);
  std::vector<double> remainder(k);
  int64_t assigned = 0;
  for (size_t i = 0; i < k; ++i) {
    double ideal = static_cast<double>(n) * fractions[i];
    sizes[i] = static_cast<int64_t>(std::floor(ideal));
    remainder[i] = ideal - static_cast<double>(sizes[i]);
    assigned += sizes[i];
  }
  // Hand out the leftover to the largest remainders, ties to the lower index.
  std::vector<size_t> order(k);
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return remainder[a] > remainder[b]; });
  for (int64_t leftover = n - assigned; leftover > 0; --leftover)
    ++sizes[order[static_cast<size_t>(n - assigned - leftover)]];
  return sizes;
}

std::vector<Dataset> split(const Dataset& ds, const std::vector<double>& fractions,
                           uint64_t seed) {
  std::vector<int64_t> sizes = largest_remainder_sizes(ds.n, fractions);

  std::vector<int64_t> perm(ds.n);
  std::iota(perm.begin(), perm.end(), int64_t{0});
  Rng rng(seed);
  rng.shuffle(perm);

  std::vector<Dataset> parts;
  parts.reserve(sizes.size());
  const int n_attr = ds.schema.n_attr();
  int64_t cursor = 0;
  for (int64_t size : sizes) {
    Dataset part;
    part.schema = ds.schema;
    part.feature_dim = ds.feature_dim;
    part.n = size;
    part.features.reserve(static_cast<size_t>(size) * ds.feature_dim);
    part.labels.reserve(static_cast<size_t>(size) * n_attr);
    for (int64_t i = 0; i < size; ++i) {
      int64_t src = perm[cursor + i];
      part.features.insert(part.features.end(), ds.feature_row(src),
                           ds.feature_row(src) + ds.feature_dim);
      part.labels.insert(part.labels.end(), ds.label_row(src), ds.label_row(src) + n_attr);
    }
    cursor += size;
    parts.push_back(std::move(part));
  }
  return parts;
}

uint64_t dataset_hash(const Dataset& ds) {
  uint64_t meta[2] = {static_cast<uint64_t>(ds.n), static_cast<uint64_t>(ds.feature_dim)};
  uint64_t h = fnv1a(meta, sizeof(meta));
  h = fnv1a(ds.schema.cardinalities.data(), ds.schema.cardinalities.size() * sizeof(int), h);
  h = fnv1a(ds.features.data(), ds.features.size() * sizeof(double), h);
  h = fnv1a(ds.labels.data(), ds.labels.size() * sizeof(int32_t), h);
  return h;
}

}  // namespace crl
