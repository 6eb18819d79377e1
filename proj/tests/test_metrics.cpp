#include <doctest.h>

#include <string>
#include <vector>

#include "crl/errors.hpp"
#include "crl/metrics.hpp"
#include "crl/rng.hpp"

using namespace crl;

namespace {

IntMat column(const std::vector<int>& v) {
  IntMat m(static_cast<int>(v.size()), 1);
  for (size_t i = 0; i < v.size(); ++i) m(static_cast<int>(i), 0) = v[i];
  return m;
}

}  // namespace

TEST_CASE("imbalance ratio formatting") {
  CHECK(imbalance_ratio({24, 99885}) == "1:4162");
  CHECK(imbalance_ratio({10, 430}) == "1:43");
  CHECK(imbalance_ratio({7, 7}) == "1:1");
  CHECK(imbalance_ratio({0, 5, 10}) == "1:2");  // zero counts are ignored
  CHECK(imbalance_ratio({3}) == "1:1");
  CHECK_THROWS_AS(imbalance_ratio({0, 0}), ContractError);
}

TEST_CASE("mean sensitivity on worked predictors") {
  AttributeSchema schema{{2}};

  SUBCASE("perfect predictor scores 100") {
    std::vector<int> y = {0, 0, 0, 1, 1};
    CHECK(mean_sensitivity(column(y), column(y), schema, 0) == doctest::Approx(100.0));
  }
  SUBCASE("majority-only predictor scores 50 on a binary attribute") {
    std::vector<int> labels = {0, 0, 0, 0, 0, 0, 0, 0, 1, 1};
    std::vector<int> preds(10, 0);
    CHECK(mean_sensitivity(column(preds), column(labels), schema, 0) == doctest::Approx(50.0));
  }
  SUBCASE("recalls 0.9 and 0.3 average to 60") {
    std::vector<int> labels, preds;
    for (int i = 0; i < 10; ++i) {
      labels.push_back(0);
      preds.push_back(i < 9 ? 0 : 1);
    }
    for (int i = 0; i < 10; ++i) {
      labels.push_back(1);
      preds.push_back(i < 3 ? 1 : 0);
    }
    CHECK(mean_sensitivity(column(preds), column(labels), schema, 0) == doctest::Approx(60.0));
  }
  SUBCASE("zero-support classes are excluded, not zero-counted") {
    AttributeSchema s3{{3}};
    std::vector<int> labels = {0, 0, 0, 0, 1, 1};
    std::vector<int> preds = {0, 0, 0, 0, 0, 0};
    CHECK(mean_sensitivity(column(preds), column(labels), s3, 0) == doctest::Approx(50.0));
    EvalReport report = evaluate(column(preds), column(labels), s3);
    CHECK(report.attrs[0].skipped == std::vector<int>{2});
    CHECK(report.attrs[0].ratio == "1:2");
  }
  SUBCASE("validation") {
    std::vector<int> y = {0, 1};
    CHECK_THROWS_AS(mean_sensitivity(IntMat(0, 1), IntMat(0, 1), schema, 0), EvalError);
    CHECK_THROWS_AS(mean_sensitivity(column(y), IntMat(3, 1), schema, 0), ContractError);
    CHECK_THROWS_AS(mean_sensitivity(column(y), column(y), schema, 1), ContractError);
    std::vector<int> bad = {0, 2};
    CHECK_THROWS_AS(mean_sensitivity(column(bad), column(y), schema, 0), ContractError);
  }
}

TEST_CASE("mean sensitivity properties") {
  SUBCASE("invariant under consistent class relabeling") {
    AttributeSchema schema{{4}};
    Rng rng(61);
    const int n = 120;
    std::vector<int> labels(n), preds(n);
    for (int i = 0; i < n; ++i) {
      labels[i] = static_cast<int>(rng.bounded(4));
      preds[i] = static_cast<int>(rng.bounded(4));
    }
    double base = mean_sensitivity(column(preds), column(labels), schema, 0);
    const int perm[4] = {2, 3, 1, 0};
    std::vector<int> rl(n), rp(n);
    for (int i = 0; i < n; ++i) {
      rl[i] = perm[labels[i]];
      rp[i] = perm[preds[i]];
    }
    CHECK(mean_sensitivity(column(rp), column(rl), schema, 0) ==
          doctest::Approx(base).epsilon(1e-12));
  }
  SUBCASE("equals plain accuracy on a balanced test set") {
    AttributeSchema schema{{2}};
    Rng rng(62);
    std::vector<int> labels, preds;
    for (int i = 0; i < 40; ++i) {
      labels.push_back(i < 20 ? 0 : 1);
      preds.push_back(static_cast<int>(rng.bounded(2)));
    }
    int correct = 0;
    for (int i = 0; i < 40; ++i) correct += preds[i] == labels[i];
    CHECK(mean_sensitivity(column(preds), column(labels), schema, 0) ==
          doctest::Approx(100.0 * correct / 40.0).epsilon(1e-12));
  }
}

TEST_CASE("evaluate aggregates attributes") {
  AttributeSchema schema{{2, 2}};
  IntMat labels(4, 2), preds(4, 2);
  // attr0: perfect; attr1: majority-only.
  for (int i = 0; i < 4; ++i) {
    labels(i, 0) = i % 2;
    preds(i, 0) = i % 2;
    labels(i, 1) = i < 3 ? 0 : 1;
    preds(i, 1) = 0;
  }
  EvalReport report = evaluate(preds, labels, schema);
  CHECK(report.n == 4);
  CHECK(report.attrs[0].mean_sensitivity == doctest::Approx(100.0));
  CHECK(report.attrs[1].mean_sensitivity == doctest::Approx(50.0));
  CHECK(report.avg_mean_sensitivity == doctest::Approx(75.0));
  CHECK(report.attrs[1].ratio == "1:3");

  std::string text = report_text(report);
  CHECK(text.find("average 75.00%") != std::string::npos);
  CHECK(text.find("1:3") != std::string::npos);
}

TEST_CASE("gain tables") {
  AttributeSchema schema{{2, 2}};
  // attr0 balanced 8/8 (1:1), attr1 imbalanced 12/4 (1:3); order in the
  // table must put the balanced attribute first.
  IntMat labels(16, 2);
  for (int i = 0; i < 16; ++i) {
    labels(i, 0) = i < 8 ? 0 : 1;
    labels(i, 1) = i < 12 ? 0 : 1;
  }
  IntMat base_preds(16, 2), cand_preds(16, 2);
  for (int i = 0; i < 16; ++i) {
    base_preds(i, 0) = 0;                  // 50%
    cand_preds(i, 0) = labels(i, 0);       // 100%
    base_preds(i, 1) = 0;                  // 50%
    cand_preds(i, 1) = i < 14 ? 0 : 1;     // recalls 1.0 and 0.5 -> 75%
  }
  EvalReport base = evaluate(base_preds, labels, schema);
  EvalReport cand = evaluate(cand_preds, labels, schema);

  SUBCASE("rows are sorted by ratio and gains subtract baselines") {
    std::vector<GainRow> rows = gain_table(base, {{"crl", cand}, {"self", base}});
    REQUIRE(rows.size() == 4);
    CHECK(rows[0].attr == 0);
    CHECK(rows[0].method == "crl");
    CHECK(rows[0].gain == doctest::Approx(50.0));
    CHECK(rows[1].method == "self");
    CHECK(rows[1].gain == doctest::Approx(0.0));
    CHECK(rows[2].attr == 1);
    CHECK(rows[2].ratio == "1:3");
    CHECK(rows[2].gain == doctest::Approx(25.0));
    CHECK(rows[0].ratio_x <= rows[2].ratio_x);
  }
  SUBCASE("self-comparison is all zeros") {
    for (const GainRow& r : gain_table(base, {{"b", base}}))
      CHECK(r.gain == doctest::Approx(0.0));
  }
  SUBCASE("tsv rendering") {
    std::vector<GainRow> rows = gain_table(base, {{"crl", cand}});
    std::string tsv = gain_table_tsv(rows);
    CHECK(tsv == "attr\tratio\tmethod\tgain\n"
                 "0\t1:1\tcrl\t50.0000\n"
                 "1\t1:3\tcrl\t25.0000\n");
  }
  SUBCASE("mismatched test sets are rejected") {
    IntMat other_labels(16, 2);
    for (int i = 0; i < 16; ++i) {
      other_labels(i, 0) = i < 4 ? 0 : 1;
      other_labels(i, 1) = i < 12 ? 0 : 1;
    }
    EvalReport other = evaluate(base_preds, other_labels, schema);
    CHECK_THROWS_AS(gain_table(base, {{"x", other}}), ContractError);
    EvalReport short_report = base;
    short_report.attrs.pop_back();
    CHECK_THROWS_AS(gain_table(base, {{"x", short_report}}), ContractError);
  }
}
