#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "crl/data.hpp"
#include "crl/mat.hpp"

namespace crl {

// Class-balanced evaluation of one attribute. Mean sensitivity is the
// arithmetic mean of per-class recalls, in percent; classes absent from the
// test labels are excluded from the mean and listed in `skipped` (the metric
// is undefined for them, and zero would be a silent penalty).
struct AttrEval {
  std::vector<double> recall;   // [class], in [0,1]; 0 for zero-support classes
  std::vector<int64_t> support; // [class] test counts
  std::vector<int> skipped;     // zero-support classes, ascending
  double mean_sensitivity = 0.0;  // percent
  std::string ratio;              // "1:x" over the test label counts
};

struct EvalReport {
  std::vector<AttrEval> attrs;
  double avg_mean_sensitivity = 0.0;  // percent, mean over attributes
  int64_t n = 0;                      // evaluated samples
};

// Mean per-class recall for one attribute, in percent.
double mean_sensitivity(const IntMat& predictions, const IntMat& labels,
                        const AttributeSchema& schema, int attr);

// "1:x" with x = round(largest count / smallest nonzero count).
std::string imbalance_ratio(const std::vector<int64_t>& counts);

EvalReport evaluate(const IntMat& predictions, const IntMat& labels,
                    const AttributeSchema& schema);

// Aligned-column rendering for terminals.
std::string report_text(const EvalReport& report);

// One gain row per (attribute, method): candidate minus baseline mean
// sensitivity, in percentage points.
struct GainRow {
  int attr = 0;
  std::string ratio;
  int64_t ratio_x = 1;  // numeric ratio for sorting
  std::string method;
  double gain = 0.0;
};

// Long-form table sorted by ascending imbalance ratio (ties by attribute
// index), methods kept in their given order. All reports must come from the
// same test set; per-class supports are checked as a proxy.
std::vector<GainRow> gain_table(const EvalReport& baseline,
                                const std::vector<std::pair<std::string, EvalReport>>& candidates);

// Tab-separated with a header: attr, ratio, method, gain.
std::string gain_table_tsv(const std::vector<GainRow>& rows);

}  // namespace crl
