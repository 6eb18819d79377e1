#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "crl/errors.hpp"
#include "crl/harness.hpp"
#include "json.hpp"

namespace crl {

using ordered_json = nlohmann::ordered_json;

double median(std::vector<double> v) {
  if (v.empty()) throw ContractError("median of an empty sample");
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

namespace {

// Average ranks, 1-based; ties share the mean of their positions.
std::vector<double> ranks_of(const std::vector<double>& v) {
  const size_t n = v.size();
  std::vector<size_t> idx(n);
  for (size_t i = 0; i < n; ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return v[a] < v[b]; });
  std::vector<double> rank(n);
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double shared = 0.5 * static_cast<double>(i + j) + 1.0;
    for (size_t k = i; k <= j; ++k) rank[idx[k]] = shared;
    i = j + 1;
  }
  return rank;
}

int64_t attr_ratio_x(const AttrEval& attr) {
  int64_t max_c = 0, min_c = 0;
  for (int64_t s : attr.support) {
    max_c = std::max(max_c, s);
    if (s > 0 && (min_c == 0 || s < min_c)) min_c = s;
  }
  if (min_c == 0) throw ContractError("attribute has no test support");
  return std::llround(static_cast<double>(max_c) / static_cast<double>(min_c));
}

int most_imbalanced_eval_attr(const EvalReport& ev) {
  int best = 0;
  int64_t best_x = -1;
  for (size_t j = 0; j < ev.attrs.size(); ++j) {
    const int64_t x = attr_ratio_x(ev.attrs[j]);
    if (x > best_x) {
      best_x = x;
      best = static_cast<int>(j);
    }
  }
  return best;
}

}  // namespace

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2)
    throw ContractError("spearman needs two equal-length samples of size >= 2");
  std::vector<double> ra = ranks_of(a), rb = ranks_of(b);
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    ma += ra[i];
    mb += rb[i];
  }
  ma /= n;
  mb /= n;
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    cov += (ra[i] - ma) * (rb[i] - mb);
    va += (ra[i] - ma) * (ra[i] - ma);
    vb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (va == 0.0 || vb == 0.0) return 0.0;
  return cov / std::sqrt(va * vb);
}

CompareReport compare(const std::vector<RunRecord>& records, const std::string& baseline_label) {
  if (records.empty()) throw ContractError("no run records to compare");
  std::vector<std::string> labels;
  std::map<std::string, std::map<uint64_t, const RunRecord*>> groups;
  for (const RunRecord& rec : records) {
    auto [it, fresh] = groups[rec.label].emplace(rec.seed, &rec);
    if (!fresh)
      throw ContractError("duplicate record for " + rec.label + " seed " +
                          std::to_string(rec.seed));
    if (groups[rec.label].size() == 1) labels.push_back(rec.label);
    if (rec.dataset_hash != records.front().dataset_hash)
      throw ContractError("records span different datasets; gains are not comparable");
  }
  auto base_it = groups.find(baseline_label);
  if (base_it == groups.end())
    throw ContractError("no '" + baseline_label + "' records to compare against");
  const auto& base = base_it->second;

  std::vector<std::string> methods;
  for (const std::string& label : labels)
    if (label != baseline_label) methods.push_back(label);
  if (methods.empty()) throw ContractError("nothing to compare: only baseline records given");
  for (const std::string& m : methods) {
    const auto& g = groups[m];
    if (g.size() != base.size() ||
        !std::equal(g.begin(), g.end(), base.begin(),
                    [](const auto& x, const auto& y) { return x.first == y.first; }))
      throw ContractError("method '" + m + "' does not cover the baseline's seeds");
  }

  // One gain table per seed; identical shape and ordering because every
  // report comes from the same test split.
  std::vector<std::vector<GainRow>> per_seed;
  for (const auto& [seed, base_rec] : base) {
    std::vector<std::pair<std::string, EvalReport>> candidates;
    for (const std::string& m : methods)
      candidates.emplace_back(m, groups[m].at(seed)->final_eval);
    per_seed.push_back(gain_table(base_rec->final_eval, candidates));
  }

  CompareReport rep;
  rep.rows = per_seed.front();
  for (size_t i = 0; i < rep.rows.size(); ++i) {
    std::vector<double> cell;
    for (const auto& rows : per_seed) cell.push_back(rows[i].gain);
    rep.rows[i].gain = median(cell);
  }
  rep.tsv = gain_table_tsv(rep.rows);

  const size_t n_attr = records.front().final_eval.attrs.size();
  for (const std::string& m : methods) {
    std::vector<double> per_seed_avg;
    for (const auto& rows : per_seed) {
      double sum = 0.0;
      size_t used = 0;
      for (const GainRow& row : rows)
        if (row.method == m) {
          sum += row.gain;
          ++used;
        }
      if (used != n_attr) throw ContractError("gain table shape mismatch for '" + m + "'");
      per_seed_avg.push_back(sum / static_cast<double>(n_attr));
    }
    rep.avg_gain.emplace_back(m, median(per_seed_avg));
  }
  return rep;
}

BenchResult run_bench_suite(const BenchOptions& opts) {
  ExperimentConfig base = opts.base;
  base.out_dir = opts.out_dir;
  if (opts.quick) {
    base.train_samples = 2000;
    base.test_samples = 400;
    base.epochs = 5;
  }

  struct MethodDef {
    const char* label;
    const char* loss;
    const char* mining;
    const char* baseline;
  };
  static const MethodDef kMethods[] = {
      {"ce", "ce", "instance", "none"},
      {"crl-r-i", "crl-r", "instance", "none"},
      {"crl-r-c", "crl-r", "class", "none"},
      {"crl-a-i", "crl-a", "instance", "none"},
      {"crl-a-c", "crl-a", "class", "none"},
      {"crl-d-i", "crl-d", "instance", "none"},
      {"crl-d-c", "crl-d", "class", "none"},
      {"oversample", "ce", "instance", "oversample"},
      {"downsample", "ce", "instance", "downsample"},
      {"cost", "ce", "instance", "cost-sensitive"},
  };

  BenchResult res;
  for (const MethodDef& def : kMethods) {
    ExperimentConfig cfg = base;
    cfg.loss = def.loss;
    cfg.mining = def.mining;
    cfg.baseline = def.baseline;
    cfg.validate();
    for (uint64_t seed : base.seeds) {
      RunOptions ro;
      ro.label = def.label;
      RunRecord rec = run_experiment(cfg, seed, ro);
      std::fprintf(stderr, "[bench] %-12s seed %llu  avg ms %6.2f%%  (%.1fs)\n", def.label,
                   static_cast<unsigned long long>(seed), rec.final_eval.avg_mean_sensitivity,
                   rec.wall_seconds);
      res.records.push_back(std::move(rec));
    }
  }

  res.gains = compare(res.records, "ce");

  BenchVerdict& v = res.verdict;
  v.margin = kTrend200MarginPp / 2.0;

  // Trend on the most imbalanced attribute, default instance+relative.
  const int attr200 = most_imbalanced_eval_attr(res.records.front().final_eval);
  std::vector<double> ratio_rank, gain_by_ratio;
  for (const GainRow& row : res.gains.rows)
    if (row.method == "crl-r-i") {
      ratio_rank.push_back(static_cast<double>(ratio_rank.size() + 1));
      gain_by_ratio.push_back(row.gain);
      if (row.attr == attr200) v.gain_200 = row.gain;
    }
  v.spearman_rg = spearman(ratio_rank, gain_by_ratio);
  v.trend_gain_pass = v.gain_200 >= v.margin && v.gain_200 > 0.0;
  v.trend_order_pass = v.spearman_rg > 0.0;

  v.variants_pass = true;
  for (const auto& [m, avg] : res.gains.avg_gain)
    if (m.rfind("crl-", 0) == 0) {
      v.variant_avg_gain.emplace_back(m, avg);
      if (avg < 0.0) v.variants_pass = false;
    }

  // Down-sampling check: per-seed differences on the 1:200 attribute, then
  // the median. Strictly negative against either comparator passes.
  std::map<std::string, std::map<uint64_t, const RunRecord*>> by_label;
  for (const RunRecord& rec : res.records) by_label[rec.label][rec.seed] = &rec;
  std::vector<double> d_ce, d_over;
  for (uint64_t seed : base.seeds) {
    const double down = by_label["downsample"][seed]->final_eval.attrs[attr200].mean_sensitivity;
    const double ce = by_label["ce"][seed]->final_eval.attrs[attr200].mean_sensitivity;
    const double over = by_label["oversample"][seed]->final_eval.attrs[attr200].mean_sensitivity;
    d_ce.push_back(down - ce);
    d_over.push_back(down - over);
  }
  v.down_vs_ce_200 = median(d_ce);
  v.down_vs_over_200 = median(d_over);
  v.downsample_pass = v.down_vs_ce_200 < 0.0 || v.down_vs_over_200 < 0.0;
  v.downsample_tie = !v.downsample_pass && (v.down_vs_ce_200 == 0.0 || v.down_vs_over_200 == 0.0);

  std::filesystem::create_directories(opts.out_dir);
  auto write = [&](const std::string& name, const std::string& text) {
    std::ofstream out(opts.out_dir + "/" + name, std::ios::binary);
    if (!out) throw IoError("cannot write '" + opts.out_dir + "/" + name + "'");
    out << text;
  };
  write("gains.tsv", res.gains.tsv);
  write("verdict.json", verdict_json(v, opts.quick));
  write("summary.txt", bench_summary(res));
  return res;
}

std::string verdict_json(const BenchVerdict& v, bool quick) {
  ordered_json j;
  j["quick"] = quick;
  ordered_json trend;
  trend["pass"] = v.trend_gain_pass;
  trend["gain_200"] = v.gain_200;
  trend["required_margin"] = v.margin;
  trend["expected_margin"] = kTrend200MarginPp;
  j["trend_gain"] = std::move(trend);
  ordered_json order;
  order["pass"] = v.trend_order_pass;
  order["spearman"] = v.spearman_rg;
  j["trend_order"] = std::move(order);
  ordered_json variants;
  variants["pass"] = v.variants_pass;
  ordered_json avg;
  for (const auto& [m, g] : v.variant_avg_gain) avg[m] = g;
  variants["avg_gain"] = std::move(avg);
  j["variants"] = std::move(variants);
  ordered_json down;
  down["pass"] = v.downsample_pass;
  down["tie"] = v.downsample_tie;
  down["down_vs_ce_200"] = v.down_vs_ce_200;
  down["down_vs_over_200"] = v.down_vs_over_200;
  j["downsample"] = std::move(down);
  return j.dump(2) + "\n";
}

std::string bench_summary(const BenchResult& r) {
  std::map<std::string, std::vector<const RunRecord*>> by_label;
  std::vector<std::string> order;
  for (const RunRecord& rec : r.records) {
    if (!by_label.count(rec.label)) order.push_back(rec.label);
    by_label[rec.label].push_back(&rec);
  }
  std::string out = "method          median avg ms   per-attribute median ms\n";
  char buf[160];
  for (const std::string& label : order) {
    const auto& recs = by_label[label];
    std::vector<double> avg;
    for (const RunRecord* rec : recs) avg.push_back(rec->final_eval.avg_mean_sensitivity);
    std::snprintf(buf, sizeof(buf), "%-15s %9.2f%%      ", label.c_str(), median(avg));
    out += buf;
    const size_t n_attr = recs.front()->final_eval.attrs.size();
    for (size_t j = 0; j < n_attr; ++j) {
      std::vector<double> ms;
      for (const RunRecord* rec : recs) ms.push_back(rec->final_eval.attrs[j].mean_sensitivity);
      std::snprintf(buf, sizeof(buf), "%s%6.2f", j ? " " : "", median(ms));
      out += buf;
    }
    out += "\n";
  }
  const BenchVerdict& v = r.verdict;
  std::snprintf(buf, sizeof(buf), "\ntrend gain on 1:200 attr: %+.2f pp (needs >= %.2f): %s\n",
                v.gain_200, v.margin, v.trend_gain_pass ? "pass" : "FAIL");
  out += buf;
  std::snprintf(buf, sizeof(buf), "gain vs ratio spearman: %+.3f (needs > 0): %s\n", v.spearman_rg,
                v.trend_order_pass ? "pass" : "FAIL");
  out += buf;
  out += "variant average gains (needs all >= 0): ";
  out += v.variants_pass ? "pass\n" : "FAIL\n";
  for (const auto& [m, g] : v.variant_avg_gain) {
    std::snprintf(buf, sizeof(buf), "  %-10s %+.2f pp\n", m.c_str(), g);
    out += buf;
  }
  std::snprintf(buf, sizeof(buf), "downsample vs ce %+.2f, vs oversample %+.2f on 1:200: %s%s\n",
                v.down_vs_ce_200, v.down_vs_over_200, v.downsample_pass ? "pass" : "FAIL",
                v.downsample_tie ? " (tie: soft failure)" : "");
  out += buf;
  return out;
}

}  // namespace crl
