#include "crl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "crl/errors.hpp"

namespace crl {

namespace {

int64_t ratio_x(const std::vector<int64_t>& counts) {
  int64_t hi = 0, lo = -1;
  for (int64_t c : counts) {
    hi = std::max(hi, c);
    if (c > 0 && (lo < 0 || c < lo)) lo = c;
  }
  if (lo < 0) throw ContractError("imbalance ratio needs at least one nonzero class count");
  return std::llround(static_cast<double>(hi) / static_cast<double>(lo));
}

AttrEval eval_attr(const IntMat& predictions, const IntMat& labels, const AttributeSchema& schema,
                   int attr) {
  const int card = schema.cardinality(attr);
  AttrEval out;
  out.support.assign(card, 0);
  std::vector<int64_t> correct(card, 0);
  for (int i = 0; i < labels.rows; ++i) {
    const int32_t y = labels(i, attr);
    const int32_t p = predictions(i, attr);
    if (y < 0 || y >= card)
      throw ContractError("label " + std::to_string(y) + " out of range for attribute " +
                          std::to_string(attr));
    if (p < 0 || p >= card)
      throw ContractError("prediction " + std::to_string(p) + " out of range for attribute " +
                          std::to_string(attr));
    ++out.support[y];
    if (p == y) ++correct[y];
  }

  out.recall.assign(card, 0.0);
  double sum = 0.0;
  int present = 0;
  for (int c = 0; c < card; ++c) {
    if (out.support[c] == 0) {
      out.skipped.push_back(c);
      continue;
    }
    out.recall[c] = static_cast<double>(correct[c]) / static_cast<double>(out.support[c]);
    sum += out.recall[c];
    ++present;
  }
  if (present == 0) throw EvalError("attribute " + std::to_string(attr) + " has no test support");
  out.mean_sensitivity = 100.0 * sum / static_cast<double>(present);
  out.ratio = imbalance_ratio(out.support);
  return out;
}

void check_aligned(const IntMat& predictions, const IntMat& labels, const AttributeSchema& schema) {
  if (predictions.rows != labels.rows || predictions.cols != labels.cols)
    throw ContractError("predictions and labels have different shapes");
  if (labels.cols != schema.n_attr())
    throw ContractError("labels and schema disagree on attribute count");
  if (labels.rows == 0) throw EvalError("no test samples to evaluate");
}

}  // namespace

std::string imbalance_ratio(const std::vector<int64_t>& counts) {
  return "1:" + std::to_string(ratio_x(counts));
}

double mean_sensitivity(const IntMat& predictions, const IntMat& labels,
                        const AttributeSchema& schema, int attr) {
  check_aligned(predictions, labels, schema);
  if (attr < 0 || attr >= schema.n_attr())
    throw ContractError("attribute " + std::to_string(attr) + " out of range");
  return eval_attr(predictions, labels, schema, attr).mean_sensitivity;
}

EvalReport evaluate(const IntMat& predictions, const IntMat& labels,
                    const AttributeSchema& schema) {
  check_aligned(predictions, labels, schema);
  EvalReport report;
  report.n = labels.rows;
  double sum = 0.0;
  for (int j = 0; j < schema.n_attr(); ++j) {
    report.attrs.push_back(eval_attr(predictions, labels, schema, j));
    sum += report.attrs.back().mean_sensitivity;
  }
  report.avg_mean_sensitivity = sum / static_cast<double>(schema.n_attr());
  return report;
}

std::string report_text(const EvalReport& report) {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof(line), "%-5s %-8s %-10s %s\n", "attr", "ratio", "mean-sens",
                "skipped-classes");
  os << line;
  for (size_t j = 0; j < report.attrs.size(); ++j) {
    const AttrEval& a = report.attrs[j];
    std::string skipped = "-";
    if (!a.skipped.empty()) {
      skipped.clear();
      for (size_t k = 0; k < a.skipped.size(); ++k) {
        if (k) skipped += ",";
        skipped += std::to_string(a.skipped[k]);
      }
    }
    std::snprintf(line, sizeof(line), "%-5zu %-8s %8.2f%%  %s\n", j, a.ratio.c_str(),
                  a.mean_sensitivity, skipped.c_str());
    os << line;
  }
  std::snprintf(line, sizeof(line), "average %.2f%% over %zu attributes, %lld samples\n",
                report.avg_mean_sensitivity, report.attrs.size(),
                static_cast<long long>(report.n));
  os << line;
  return os.str();
}

std::vector<GainRow> gain_table(const EvalReport& baseline,
                                const std::vector<std::pair<std::string, EvalReport>>& candidates) {
  for (const auto& [name, report] : candidates) {
    if (report.n != baseline.n || report.attrs.size() != baseline.attrs.size())
      throw ContractError("gain table inputs evaluated on different test sets");
    for (size_t j = 0; j < baseline.attrs.size(); ++j)
      if (report.attrs[j].support != baseline.attrs[j].support)
        throw ContractError("gain table inputs evaluated on different test sets");
  }

  std::vector<int> order(baseline.attrs.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<int64_t> xs;
  xs.reserve(baseline.attrs.size());
  for (const AttrEval& a : baseline.attrs) xs.push_back(ratio_x(a.support));
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return xs[a] < xs[b]; });

  std::vector<GainRow> rows;
  for (int j : order) {
    for (const auto& [name, report] : candidates) {
      GainRow row;
      row.attr = j;
      row.ratio = baseline.attrs[j].ratio;
      row.ratio_x = xs[j];
      row.method = name;
      row.gain = report.attrs[j].mean_sensitivity - baseline.attrs[j].mean_sensitivity;
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

std::string gain_table_tsv(const std::vector<GainRow>& rows) {
  std::ostringstream os;
  os << "attr\tratio\tmethod\tgain\n";
  char buf[64];
  for (const GainRow& r : rows) {
    std::snprintf(buf, sizeof(buf), "%.4f", r.gain);
    os << r.attr << '\t' << r.ratio << '\t' << r.method << '\t' << buf << '\n';
  }
  return os.str();
}

}  // namespace crl
