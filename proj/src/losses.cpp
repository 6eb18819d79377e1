#include "crl/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "crl/errors.hpp"
#include "kernel_rows.hpp"

namespace crl {

namespace {

constexpr double kProbFloor = 1e-12;
constexpr double kDistFloor = 1e-12;
constexpr double kPi = 3.14159265358979323846;

double feat_dist(const ForwardCache& cache, int attr, int a, int b) {
  const Mat& f = cache.feat[attr];
  return std::sqrt(kernels::detail::sq_dist(f.row(a), f.row(b), f.cols));
}

// d(loss)/d(distance) = coeff pushes the two endpoint features apart or
// together; zero-distance pairs get the zero subgradient.
void add_dist_grad(Mat& g, const Mat& f, int a, int b, double d, double coeff) {
  if (d < kDistFloor) return;
  const double scale = coeff / d;
  const double* fa = f.row(a);
  const double* fb = f.row(b);
  double* ga = g.row(a);
  double* gb = g.row(b);
  for (int c = 0; c < f.cols; ++c) {
    double v = scale * (fa[c] - fb[c]);
    ga[c] += v;
    gb[c] -= v;
  }
}

std::vector<Mat> feat_shaped_zeros(const ForwardCache& cache) {
  std::vector<Mat> out;
  out.reserve(cache.feat.size());
  for (const Mat& f : cache.feat) out.emplace_back(f.rows, f.cols);
  return out;
}

}  // namespace

void HistogramSpec::validate() const {
  if (tau < 2) throw ConfigError("histogram needs at least 2 bins");
  if (!(hi > lo)) throw ConfigError("histogram range must have hi > lo");
}

double margin(const AttributeSchema& schema, int j) {
  return 2.0 * kPi / static_cast<double>(schema.cardinality(j));
}

MarginSpec margins_for(const AttributeSchema& schema, double m_apc) {
  if (!(m_apc > 0)) throw ConfigError("m_apc must be > 0");
  MarginSpec ms;
  ms.m_apc = m_apc;
  for (int j = 0; j < schema.n_attr(); ++j) ms.m.push_back(margin(schema, j));
  return ms;
}

BinCoord bin_coord(double d, const HistogramSpec& hist) {
  hist.validate();
  const double delta = hist.delta();
  BinCoord out;
  out.clamped = d < hist.lo || d > hist.hi;
  const double dc = std::clamp(d, hist.lo, hist.hi);
  int seg = static_cast<int>(std::floor((dc - hist.lo) / delta));
  out.seg = std::clamp(seg, 0, hist.tau - 2);
  out.u = (dc - (hist.lo + out.seg * delta)) / delta;
  return out;
}

Vec soft_histogram(const std::vector<double>& dists, const HistogramSpec& hist) {
  hist.validate();
  Vec h(static_cast<size_t>(hist.tau), 0.0);
  if (dists.empty()) return h;
  const double w = 1.0 / static_cast<double>(dists.size());
  for (double d : dists) {
    BinCoord bc = bin_coord(d, hist);
    h[bc.seg] += (1.0 - bc.u) * w;
    h[bc.seg + 1] += bc.u * w;
  }
  return h;
}

LossBundle cross_entropy(const ForwardCache& cache, const IntMat& labels) {
  if (labels.rows != cache.n) throw ContractError("labels and cache cover different batches");
  if (labels.cols != static_cast<int>(cache.probs.size()))
    throw ContractError("labels and cache disagree on attribute count");

  LossBundle out;
  const int n = cache.n;
  const double inv_n = 1.0 / n;
  out.grad_logits.reserve(cache.probs.size());
  for (size_t j = 0; j < cache.probs.size(); ++j) {
    const Mat& p = cache.probs[j];
    Mat g = p;  // softmax term of the gradient
    for (int i = 0; i < n; ++i) {
      int32_t y = labels(i, static_cast<int>(j));
      if (y < 0 || y >= p.cols)
        throw ContractError("label " + std::to_string(y) + " out of range for attribute " +
                            std::to_string(j));
      out.value -= std::log(std::max(p(i, y), kProbFloor));
      g(i, y) -= 1.0;
    }
    for (double& v : g.a) v *= inv_n;
    out.grad_logits.push_back(std::move(g));
  }
  out.value *= inv_n;
  return out;
}

LossBundle crl_relative(const TripletSet& triplets, const ForwardCache& cache,
                        const MarginSpec& margins) {
  LossBundle out;
  out.n_triplets = static_cast<int64_t>(triplets.items.size());
  if (triplets.items.empty()) return out;

  out.grad_feat = feat_shaped_zeros(cache);
  const double inv_t = 1.0 / static_cast<double>(triplets.items.size());
  for (const Triplet& t : triplets.items) {
    double d_ap = feat_dist(cache, t.attr, t.anchor, t.pos);
    double d_an = feat_dist(cache, t.attr, t.anchor, t.neg);
    double z = margins.m[t.attr] + d_ap - d_an;
    if (z <= 0) continue;  // satisfied margin, hinge clamps to zero
    out.value += z * inv_t;
    Mat& g = out.grad_feat[t.attr];
    const Mat& f = cache.feat[t.attr];
    add_dist_grad(g, f, t.anchor, t.pos, d_ap, inv_t);
    add_dist_grad(g, f, t.anchor, t.neg, d_an, -inv_t);
  }
  return out;
}

LossBundle crl_absolute(const PairSet& pairs, const ForwardCache& cache, double m_apc) {
  if (!(m_apc > 0)) throw ConfigError("m_apc must be > 0");
  LossBundle out;
  out.n_pos_pairs = static_cast<int64_t>(pairs.pos.size());
  out.n_neg_pairs = static_cast<int64_t>(pairs.neg.size());
  if (pairs.pos.empty() && pairs.neg.empty()) return out;
  if (pairs.pos.empty() || pairs.neg.empty()) out.empty_side = true;

  out.grad_feat = feat_shaped_zeros(cache);
  if (!pairs.pos.empty()) {
    const double inv = 1.0 / static_cast<double>(pairs.pos.size());
    for (const IndexPair& pr : pairs.pos) {
      const Mat& f = cache.feat[pr.attr];
      double d2 = kernels::detail::sq_dist(f.row(pr.a), f.row(pr.b), f.cols);
      out.value += 0.5 * d2 * inv;
      // d(0.5 d^2)/d f_a = (f_a - f_b): no distance division needed.
      Mat& g = out.grad_feat[pr.attr];
      const double* fa = f.row(pr.a);
      const double* fb = f.row(pr.b);
      for (int c = 0; c < f.cols; ++c) {
        double v = inv * (fa[c] - fb[c]);
        g(pr.a, c) += v;
        g(pr.b, c) -= v;
      }
    }
  }
  if (!pairs.neg.empty()) {
    const double inv = 1.0 / static_cast<double>(pairs.neg.size());
    for (const IndexPair& pr : pairs.neg) {
      double d = feat_dist(cache, pr.attr, pr.a, pr.b);
      double slack = m_apc - d;
      if (slack <= 0) continue;
      out.value += 0.5 * slack * slack * inv;
      add_dist_grad(out.grad_feat[pr.attr], cache.feat[pr.attr], pr.a, pr.b, d, -slack * inv);
    }
  }
  return out;
}

LossBundle crl_distribution(const PairSet& pairs, const ForwardCache& cache,
                            const HistogramSpec& hist) {
  hist.validate();
  LossBundle out;
  out.n_pos_pairs = static_cast<int64_t>(pairs.pos.size());
  out.n_neg_pairs = static_cast<int64_t>(pairs.neg.size());
  if (pairs.pos.empty() || pairs.neg.empty()) {
    out.empty_side = true;
    return out;
  }

  const int tau = hist.tau;
  const double delta = hist.delta();

  // A distance lands in segment s between bin centers b_s and b_{s+1} and
  // splits its mass (1-u, u). Out-of-range distances clamp to the end bins
  // (flat, so they carry no gradient) and are counted.
  struct Binned {
    int attr, a, b;
    double d;
    int seg;
    double u;
    bool clamped;
  };
  auto bin_one = [&](const IndexPair& pr) {
    Binned bn;
    bn.attr = pr.attr;
    bn.a = pr.a;
    bn.b = pr.b;
    bn.d = feat_dist(cache, pr.attr, pr.a, pr.b);
    BinCoord bc = bin_coord(bn.d, hist);
    bn.seg = bc.seg;
    bn.u = bc.u;
    bn.clamped = bc.clamped;
    return bn;
  };

  std::vector<Binned> pos, neg;
  pos.reserve(pairs.pos.size());
  neg.reserve(pairs.neg.size());
  Vec hp(tau, 0.0), hn(tau, 0.0);
  const double wp = 1.0 / static_cast<double>(pairs.pos.size());
  const double wn = 1.0 / static_cast<double>(pairs.neg.size());
  for (const IndexPair& pr : pairs.pos) {
    Binned bn = bin_one(pr);
    hp[bn.seg] += (1.0 - bn.u) * wp;
    hp[bn.seg + 1] += bn.u * wp;
    if (bn.clamped) ++out.out_of_range;
    pos.push_back(bn);
  }
  for (const IndexPair& pr : pairs.neg) {
    Binned bn = bin_one(pr);
    hn[bn.seg] += (1.0 - bn.u) * wn;
    hn[bn.seg + 1] += bn.u * wn;
    if (bn.clamped) ++out.out_of_range;
    neg.push_back(bn);
  }

  // cum[t] = P(negative <= bin t); suffix[t] = positive mass at or above t.
  Vec cum(tau, 0.0), suffix(tau, 0.0);
  double acc = 0.0;
  for (int t = 0; t < tau; ++t) {
    acc += hn[t];
    cum[t] = acc;
  }
  acc = 0.0;
  for (int t = tau - 1; t >= 0; --t) {
    acc += hp[t];
    suffix[t] = acc;
  }
  for (int t = 0; t < tau; ++t) out.value += hp[t] * cum[t];

  out.grad_feat = feat_shaped_zeros(cache);
  for (const Binned& bn : pos) {
    if (bn.clamped) continue;
    double coeff = (cum[bn.seg + 1] - cum[bn.seg]) / delta * wp;
    add_dist_grad(out.grad_feat[bn.attr], cache.feat[bn.attr], bn.a, bn.b, bn.d, coeff);
  }
  for (const Binned& bn : neg) {
    if (bn.clamped) continue;
    double coeff = (suffix[bn.seg + 1] - suffix[bn.seg]) / delta * wn;
    add_dist_grad(out.grad_feat[bn.attr], cache.feat[bn.attr], bn.a, bn.b, bn.d, coeff);
  }
  return out;
}

namespace {

TripletSet filter_triplets(const TripletSet& all, int attr) {
  TripletSet out;
  for (const Triplet& t : all.items) {
    if (t.attr == attr) out.items.push_back(t);
  }
  return out;
}

PairSet filter_pairs(const PairSet& all, int attr) {
  PairSet out;
  for (const IndexPair& p : all.pos) {
    if (p.attr == attr) out.pos.push_back(p);
  }
  for (const IndexPair& p : all.neg) {
    if (p.attr == attr) out.neg.push_back(p);
  }
  return out;
}

}  // namespace

LossBundle combined_loss_frozen(const ForwardCache& cache, const IntMat& labels,
                                const AttributeSchema& schema, const CrlOptions& opt,
                                const TripletSet& triplets, const PairSet& pairs) {
  if (!(opt.crl_weight >= 0)) throw ConfigError("crl_weight must be >= 0");

  LossBundle ce = cross_entropy(cache, labels);
  if (opt.variant == CrlVariant::kNone) {
    ce.ce_component = ce.value;
    return ce;
  }

  LossBundle out;
  out.grad_logits = std::move(ce.grad_logits);
  out.grad_feat = feat_shaped_zeros(cache);
  out.ce_component = ce.value;

  MarginSpec margins = margins_for(schema, opt.m_apc);
  double crl_sum = 0.0;
  int contributing = 0;
  std::vector<LossBundle> parts;
  for (int j = 0; j < schema.n_attr(); ++j) {
    LossBundle part;
    if (opt.variant == CrlVariant::kRelative) {
      TripletSet tj = filter_triplets(triplets, j);
      if (tj.items.empty()) continue;
      part = crl_relative(tj, cache, margins);
    } else {
      PairSet pj = filter_pairs(pairs, j);
      if (pj.pos.empty() && pj.neg.empty()) continue;
      part = opt.variant == CrlVariant::kAbsolute
                 ? crl_absolute(pj, cache, opt.m_apc)
                 : crl_distribution(pj, cache, opt.hist);
    }
    ++contributing;
    crl_sum += part.value;
    out.n_triplets += part.n_triplets;
    out.n_pos_pairs += part.n_pos_pairs;
    out.n_neg_pairs += part.n_neg_pairs;
    out.out_of_range += part.out_of_range;
    out.empty_side = out.empty_side || part.empty_side;
    parts.push_back(std::move(part));
  }

  if (contributing > 0) {
    const double scale = opt.crl_weight / static_cast<double>(contributing);
    for (const LossBundle& part : parts) {
      if (part.grad_feat.empty()) continue;
      for (size_t j = 0; j < out.grad_feat.size(); ++j) {
        const Vec& src = part.grad_feat[j].a;
        Vec& dst = out.grad_feat[j].a;
        for (size_t i = 0; i < src.size(); ++i) dst[i] += scale * src[i];
      }
    }
    out.crl_component = crl_sum / static_cast<double>(contributing);
  }
  out.value = out.ce_component + opt.crl_weight * out.crl_component;
  return out;
}

LossBundle combined_loss(const ForwardCache& cache, const IntMat& labels,
                         const AttributeSchema& schema, const CrlOptions& opt) {
  if (opt.K < 1) throw ConfigError("mining depth K must be >= 1");
  if (opt.variant == CrlVariant::kNone)
    return combined_loss_frozen(cache, labels, schema, opt, TripletSet{}, PairSet{});

  BatchProfile prof = profile_batch(labels, schema);
  std::vector<Anchor> xs = anchors(prof, labels);
  HardSets hard = opt.mode == MiningMode::kClassLevel
                      ? mine_class_level(prof, labels, cache, opt.K)
                      : mine_instance_level(prof, labels, cache, opt.K);

  TripletSet triplets;
  PairSet pairs;
  if (opt.variant == CrlVariant::kRelative)
    triplets = build_triplets(hard, xs);
  else
    pairs = build_pairs(hard, xs);

  LossBundle out = combined_loss_frozen(cache, labels, schema, opt, triplets, pairs);
  out.n_anchors = static_cast<int64_t>(xs.size());
  return out;
}

}  // namespace crl
