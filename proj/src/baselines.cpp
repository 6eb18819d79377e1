#include "crl/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "crl/errors.hpp"
#include "crl/rng.hpp"

namespace crl {

namespace {

std::vector<std::vector<int64_t>> indices_by_class(const Dataset& ds, int attr) {
  std::vector<std::vector<int64_t>> by_class(ds.schema.cardinality(attr));
  for (int64_t i = 0; i < ds.n; ++i) by_class[ds.label(i, attr)].push_back(i);
  return by_class;
}

}  // namespace

SamplerPlan make_sampler(const Dataset& ds, SamplerMode mode, int reference_attr, uint64_t seed) {
  if (ds.n < 1) throw ConfigError("cannot build a sampler plan for an empty dataset");
  if (reference_attr < 0 || reference_attr >= ds.schema.n_attr())
    throw ConfigError("reference attribute " + std::to_string(reference_attr) + " out of range");

  SamplerPlan plan;
  plan.mode = mode;
  plan.reference_attr = reference_attr;
  plan.seed = seed;
  Rng rng(seed);

  if (mode == SamplerMode::kUniform) {
    plan.indices.resize(static_cast<size_t>(ds.n));
    for (int64_t i = 0; i < ds.n; ++i) plan.indices[i] = i;
    rng.shuffle(plan.indices);
    return plan;
  }

  std::vector<std::vector<int64_t>> by_class = indices_by_class(ds, reference_attr);
  if (mode == SamplerMode::kOversample) {
    int64_t majority = 0;
    for (const auto& c : by_class) majority = std::max(majority, static_cast<int64_t>(c.size()));
    for (const auto& c : by_class) {
      if (c.empty()) continue;  // nothing to duplicate
      plan.indices.insert(plan.indices.end(), c.begin(), c.end());
      for (int64_t k = static_cast<int64_t>(c.size()); k < majority; ++k)
        plan.indices.push_back(c[rng.bounded(c.size())]);
    }
  } else {
    int64_t minority = ds.n;
    for (size_t c = 0; c < by_class.size(); ++c) {
      if (by_class[c].empty())
        throw ConfigError("down-sampling reference attribute has no samples of class " +
                          std::to_string(c));
      minority = std::min(minority, static_cast<int64_t>(by_class[c].size()));
    }
    for (auto& c : by_class) {
      rng.shuffle(c);
      plan.indices.insert(plan.indices.end(), c.begin(), c.begin() + minority);
    }
  }
  rng.shuffle(plan.indices);
  return plan;
}

int most_imbalanced_attr(const Dataset& ds) {
  if (ds.n < 1) throw ConfigError("cannot rank attributes of an empty dataset");
  int best = 0;
  double best_ratio = -1.0;
  for (int j = 0; j < ds.schema.n_attr(); ++j) {
    std::vector<int64_t> counts = ds.class_counts(j);
    int64_t hi = 0, lo = ds.n + 1;
    for (int64_t c : counts) {
      hi = std::max(hi, c);
      if (c > 0) lo = std::min(lo, c);
    }
    double ratio = static_cast<double>(hi) / static_cast<double>(lo);
    if (ratio > best_ratio) {
      best_ratio = ratio;
      best = j;
    }
  }
  return best;
}

ClassWeights cost_weights(const Dataset& ds) {
  if (ds.n < 1) throw ConfigError("cannot derive cost weights from an empty dataset");
  ClassWeights out;
  const double n = static_cast<double>(ds.n);
  for (int j = 0; j < ds.schema.n_attr(); ++j) {
    std::vector<int64_t> counts = ds.class_counts(j);
    const double card = static_cast<double>(counts.size());
    Vec w(counts.size());
    double weighted_mass = 0.0;
    for (size_t c = 0; c < counts.size(); ++c) {
      w[c] = n / (card * static_cast<double>(std::max<int64_t>(counts[c], 1)));
      weighted_mass += w[c] * static_cast<double>(counts[c]);
    }
    // Dataset-mean weight 1; with every class present the raw weights already
    // satisfy this and the division is by exactly 1.
    const double mean = weighted_mass / n;
    for (double& v : w) v /= mean;
    out.w.push_back(std::move(w));
  }
  return out;
}

LossBundle weighted_cross_entropy(const ForwardCache& cache, const IntMat& labels,
                                  const ClassWeights& weights) {
  if (labels.rows != cache.n) throw ContractError("labels and cache cover different batches");
  if (labels.cols != static_cast<int>(cache.probs.size()))
    throw ContractError("labels and cache disagree on attribute count");
  if (weights.w.size() != cache.probs.size())
    throw ContractError("weights and cache disagree on attribute count");

  constexpr double kProbFloor = 1e-12;
  LossBundle out;
  const int n = cache.n;
  const double inv_n = 1.0 / n;
  out.grad_logits.reserve(cache.probs.size());
  for (size_t j = 0; j < cache.probs.size(); ++j) {
    const Mat& p = cache.probs[j];
    const Vec& wj = weights.w[j];
    if (static_cast<int>(wj.size()) != p.cols)
      throw ContractError("weight vector length mismatch on attribute " + std::to_string(j));
    Mat g = p;
    for (int i = 0; i < n; ++i) {
      int32_t y = labels(i, static_cast<int>(j));
      if (y < 0 || y >= p.cols)
        throw ContractError("label " + std::to_string(y) + " out of range for attribute " +
                            std::to_string(j));
      const double w = wj[y];
      if (!(w > 0) || !std::isfinite(w)) throw ContractError("class weights must be finite and > 0");
      out.value -= w * std::log(std::max(p(i, y), kProbFloor));
      g(i, y) -= 1.0;
      const double scale = w * inv_n;
      for (int c = 0; c < p.cols; ++c) g(i, c) *= scale;
    }
    out.grad_logits.push_back(std::move(g));
  }
  out.value *= inv_n;
  return out;
}

}  // namespace crl
