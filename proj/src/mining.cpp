#include "crl/mining.hpp"

#include <algorithm>
#include <string>

#include "crl/errors.hpp"
#include "crl/kernels.hpp"

namespace crl {

namespace {

// Rank candidates by (score, batch index) and keep the best K. The
// comparator is a strict total order, so the result matches a full sort.
std::vector<int> top_k(std::vector<std::pair<double, int>>& scored, int K, bool ascending) {
  auto cmp = [ascending](const std::pair<double, int>& a, const std::pair<double, int>& b) {
    if (a.first != b.first) return ascending ? a.first < b.first : a.first > b.first;
    return a.second < b.second;
  };
  std::sort(scored.begin(), scored.end(), cmp);
  int keep = std::min<int>(K, static_cast<int>(scored.size()));
  std::vector<int> out(keep);
  for (int i = 0; i < keep; ++i) out[i] = scored[i].second;
  return out;
}

}  // namespace

BatchProfile profile_batch(const IntMat& labels, const AttributeSchema& schema) {
  if (labels.rows < 1) throw ContractError("profile_batch needs a non-empty batch");
  if (labels.cols != schema.n_attr())
    throw ContractError("label matrix has " + std::to_string(labels.cols) +
                        " attributes, schema has " + std::to_string(schema.n_attr()));

  BatchProfile prof;
  prof.n_bs = labels.rows;
  prof.histogram.resize(schema.n_attr());
  prof.minority.resize(schema.n_attr());
  prof.is_minority.resize(schema.n_attr());

  for (int j = 0; j < schema.n_attr(); ++j) {
    const int card = schema.cardinality(j);
    auto& h = prof.histogram[j];
    h.assign(card, 0);
    for (int i = 0; i < labels.rows; ++i) {
      int32_t c = labels(i, j);
      if (c < 0 || c >= card)
        throw ContractError("label " + std::to_string(c) + " out of range for attribute " +
                            std::to_string(j));
      ++h[c];
    }

    std::vector<int> order(card);
    for (int c = 0; c < card; ++c) order[c] = c;
    std::sort(order.begin(), order.end(), [&h](int a, int b) {
      if (h[a] != h[b]) return h[a] < h[b];
      return a < b;
    });

    // Accumulate smallest-first while the total stays under half the batch;
    // integer arithmetic keeps the strict boundary exact.
    prof.is_minority[j].assign(card, 0);
    long long cum = 0;
    for (int c : order) {
      if (2 * (cum + h[c]) >= prof.n_bs) break;
      cum += h[c];
      prof.is_minority[j][c] = 1;
    }
    for (int c = 0; c < card; ++c) {
      if (prof.is_minority[j][c]) prof.minority[j].push_back(c);
    }
  }
  return prof;
}

std::vector<Anchor> anchors(const BatchProfile& profile, const IntMat& labels) {
  std::vector<Anchor> out;
  for (int j = 0; j < labels.cols; ++j) {
    for (int i = 0; i < labels.rows; ++i) {
      int c = labels(i, j);
      if (profile.minority_class(j, c) && profile.histogram[j][c] >= 2)
        out.push_back({i, j, c});
    }
  }
  return out;
}

HardSets mine_class_level(const BatchProfile& profile, const IntMat& labels,
                          const ForwardCache& cache, int K) {
  if (K < 1) throw ContractError("mining depth K must be >= 1");
  if (cache.n != labels.rows) throw ContractError("cache and labels cover different batches");

  HardSets hard;
  hard.mode = MiningMode::kClassLevel;
  hard.K = K;
  const int n = labels.rows;
  for (int j = 0; j < labels.cols; ++j) {
    const Mat& p = cache.probs[j];
    for (int c : profile.minority[j]) {
      if (profile.histogram[j][c] < 2) continue;
      HardSets::ClassEntry entry;
      entry.attr = j;
      entry.cls = c;
      std::vector<std::pair<double, int>> in_class, out_class;
      for (int i = 0; i < n; ++i) {
        if (labels(i, j) == c)
          in_class.emplace_back(p(i, c), i);
        else
          out_class.emplace_back(p(i, c), i);
      }
      entry.pos = top_k(in_class, K, /*ascending=*/true);
      entry.neg = top_k(out_class, K, /*ascending=*/false);
      hard.class_entries.push_back(std::move(entry));
    }
  }
  return hard;
}

HardSets mine_instance_level(const BatchProfile& profile, const IntMat& labels,
                             const ForwardCache& cache, int K) {
  if (K < 1) throw ContractError("mining depth K must be >= 1");
  if (cache.n != labels.rows) throw ContractError("cache and labels cover different batches");

  HardSets hard;
  hard.mode = MiningMode::kInstanceLevel;
  hard.K = K;
  const int n = labels.rows;

  // Predicted labels per attribute, for the misclassification condition.
  std::vector<std::vector<int32_t>> pred(labels.cols);
  for (int j = 0; j < labels.cols; ++j) kernels::argmax_rows(cache.probs[j], pred[j]);

  std::vector<Anchor> xs = anchors(profile, labels);
  hard.anchor_entries.reserve(xs.size());
  Vec dists;
  for (const Anchor& a : xs) {
    HardSets::AnchorEntry entry;
    entry.anchor = a;
    kernels::sq_dists_to_row(cache.feat[a.attr], a.sample, dists);

    std::vector<std::pair<double, int>> in_class, out_class;
    for (int i = 0; i < n; ++i) {
      if (i == a.sample) continue;
      if (labels(i, a.attr) == a.cls) {
        if (pred[a.attr][i] != a.cls) in_class.emplace_back(dists[i], i);
      } else {
        out_class.emplace_back(dists[i], i);
      }
    }
    entry.pos = top_k(in_class, K, /*ascending=*/false);
    entry.neg = top_k(out_class, K, /*ascending=*/true);
    hard.anchor_entries.push_back(std::move(entry));
  }
  return hard;
}

TripletSet build_triplets(const HardSets& hard, const std::vector<Anchor>& anchors) {
  TripletSet out;
  if (hard.mode == MiningMode::kClassLevel) {
    for (const Anchor& a : anchors) {
      const HardSets::ClassEntry* entry = nullptr;
      for (const auto& e : hard.class_entries) {
        if (e.attr == a.attr && e.cls == a.cls) {
          entry = &e;
          break;
        }
      }
      if (!entry) continue;
      for (int p : entry->pos) {
        if (p == a.sample) continue;  // an anchor is never its own positive
        for (int ng : entry->neg) out.items.push_back({a.attr, a.cls, a.sample, p, ng});
      }
    }
  } else {
    for (const auto& e : hard.anchor_entries) {
      for (int p : e.pos)
        for (int ng : e.neg)
          out.items.push_back({e.anchor.attr, e.anchor.cls, e.anchor.sample, p, ng});
    }
  }
  return out;
}

PairSet build_pairs(const HardSets& hard, const std::vector<Anchor>& anchors) {
  PairSet out;
  if (hard.mode == MiningMode::kClassLevel) {
    for (const Anchor& a : anchors) {
      const HardSets::ClassEntry* entry = nullptr;
      for (const auto& e : hard.class_entries) {
        if (e.attr == a.attr && e.cls == a.cls) {
          entry = &e;
          break;
        }
      }
      if (!entry) continue;
      for (int p : entry->pos) {
        if (p == a.sample) continue;  // an anchor is never its own positive
        out.pos.push_back({a.attr, a.cls, a.sample, p});
      }
      for (int ng : entry->neg) out.neg.push_back({a.attr, a.cls, a.sample, ng});
    }
  } else {
    for (const auto& e : hard.anchor_entries) {
      for (int p : e.pos) out.pos.push_back({e.anchor.attr, e.anchor.cls, e.anchor.sample, p});
      for (int ng : e.neg) out.neg.push_back({e.anchor.attr, e.anchor.cls, e.anchor.sample, ng});
    }
  }
  return out;
}

}  // namespace crl
