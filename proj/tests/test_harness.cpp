#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>

#include "crl/errors.hpp"
#include "crl/harness.hpp"
#include "crl/rng.hpp"
#include "doctest.h"

using namespace crl;
namespace fs = std::filesystem;

namespace {

// Seconds-scale config: tiny data, tiny net, two epochs.
ExperimentConfig tiny_config(const std::string& out_dir) {
  ExperimentConfig c;
  c.train_samples = 60;
  c.test_samples = 30;
  c.feature_dim = 4;
  c.cardinalities = {2, 2};
  c.imbalance = {1.0, 5.0};
  c.gen_seed = 7;
  c.trunk = {8};
  c.branch_dim = 4;
  c.lr = 0.05;
  c.batch_size = 16;
  c.epochs = 2;
  c.k = 2;
  c.seeds = {1};
  c.out_dir = out_dir;
  return c;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::path("tmp_tests") / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str() const { return path.string(); }
};

RunRecord sample_record() {
  RunRecord rec;
  rec.label = "demo";
  rec.seed = 42;
  rec.config_hash = 0xDEADBEEFCAFEF00DULL;
  rec.dataset_hash = 0x0123456789ABCDEFULL;
  rec.epochs = {{0, 1.5, 0.25, 1.75, 52.0}, {1, 1.2, 0.2, 1.4, 61.5}};
  AttrEval a0;
  a0.recall = {0.9, 0.5};
  a0.support = {20, 10};
  a0.mean_sensitivity = 70.0;
  a0.ratio = "1:2";
  AttrEval a1;
  a1.recall = {1.0, 0.0, 0.5};
  a1.support = {15, 0, 15};
  a1.skipped = {1};
  a1.mean_sensitivity = 75.0;
  a1.ratio = "1:1";
  rec.final_eval.attrs = {a0, a1};
  rec.final_eval.avg_mean_sensitivity = 72.5;
  rec.final_eval.n = 30;
  rec.state_hash = 777;
  rec.wall_seconds = 1.25;
  return rec;
}

EvalReport report_for(double ms0, double ms1) {
  EvalReport ev;
  AttrEval a0;
  a0.recall = {ms0 / 100.0, ms0 / 100.0};
  a0.support = {16, 16};  // balanced attr
  a0.mean_sensitivity = ms0;
  a0.ratio = "1:1";
  AttrEval a1;
  a1.recall = {ms1 / 100.0, ms1 / 100.0};
  a1.support = {24, 8};  // 1:3 attr
  a1.mean_sensitivity = ms1;
  a1.ratio = "1:3";
  ev.attrs = {a0, a1};
  ev.avg_mean_sensitivity = 0.5 * (ms0 + ms1);
  ev.n = 32;
  return ev;
}

RunRecord record_for(const std::string& label, uint64_t seed, double ms0, double ms1) {
  RunRecord rec;
  rec.label = label;
  rec.seed = seed;
  rec.config_hash = 1;
  rec.dataset_hash = 99;
  rec.final_eval = report_for(ms0, ms1);
  rec.state_hash = seed;
  return rec;
}

}  // namespace

TEST_CASE("run records round-trip through JSON") {
  RunRecord rec = sample_record();
  std::string text = record_json(rec);
  RunRecord back = record_from_json(text);
  CHECK(back.label == rec.label);
  CHECK(back.seed == rec.seed);
  CHECK(back.config_hash == rec.config_hash);
  CHECK(back.dataset_hash == rec.dataset_hash);
  CHECK(back.epochs == rec.epochs);
  CHECK(back.final_eval.avg_mean_sensitivity == rec.final_eval.avg_mean_sensitivity);
  CHECK(back.final_eval.n == rec.final_eval.n);
  REQUIRE(back.final_eval.attrs.size() == 2);
  CHECK(back.final_eval.attrs[1].recall == rec.final_eval.attrs[1].recall);
  CHECK(back.final_eval.attrs[1].support == rec.final_eval.attrs[1].support);
  CHECK(back.final_eval.attrs[1].skipped == rec.final_eval.attrs[1].skipped);
  CHECK(back.final_eval.attrs[1].ratio == "1:1");
  CHECK(back.state_hash == rec.state_hash);
  CHECK(back.wall_seconds == rec.wall_seconds);
  // serialization is stable: same record, same bytes
  CHECK(record_json(back) == text);

  SUBCASE("files") {
    TempDir dir("records");
    std::string path = dir.str() + "/r.json";
    save_record(rec, path);
    RunRecord loaded = load_record(path);
    CHECK(record_json(loaded) == text);
    CHECK_THROWS_AS(load_record(dir.str() + "/absent.json"), IoError);
  }
  SUBCASE("malformed text is an io error") {
    CHECK_THROWS_AS(record_from_json("not json"), IoError);
    CHECK_THROWS_AS(record_from_json("{\"label\": \"x\"}"), IoError);
  }
}

TEST_CASE("checkpoints restore the exact training state") {
  TempDir dir("ckpt");
  ModelConfig mc;
  mc.feature_dim = 3;
  mc.trunk_layer_sizes = {5, 4};
  mc.branch_dim = 3;
  mc.schema = AttributeSchema{{2, 3}};
  mc.normalize_features = false;
  mc.init_seed = 11;

  Checkpoint ck;
  ck.config_hash = 1234567890123456789ULL;
  ck.run_seed = 3;
  ck.completed_epochs = 17;
  ck.model = mc;
  ck.lr = 0.01;
  ck.momentum = 0.8;
  ck.weight_decay = 1e-4;
  ck.params = init_params(mc);
  for (const Vec* t : tensor_list(ck.params)) {
    Vec v(t->size());
    for (size_t i = 0; i < v.size(); ++i) v[i] = 0.001 * static_cast<double>(i) - 0.5;
    ck.velocity.push_back(std::move(v));
  }

  std::string path = dir.str() + "/a.ckpt";
  save_checkpoint(ck, path);
  Checkpoint back = load_checkpoint(path);
  CHECK(back.config_hash == ck.config_hash);
  CHECK(back.run_seed == ck.run_seed);
  CHECK(back.completed_epochs == ck.completed_epochs);
  CHECK(back.model == mc);
  CHECK(back.lr == ck.lr);
  CHECK(back.momentum == ck.momentum);
  CHECK(back.weight_decay == ck.weight_decay);
  std::vector<Vec*> got = tensor_list(back.params);
  std::vector<Vec*> want = tensor_list(ck.params);
  REQUIRE(got.size() == want.size());
  for (size_t t = 0; t < got.size(); ++t) CHECK(*got[t] == *want[t]);
  REQUIRE(back.velocity.size() == ck.velocity.size());
  for (size_t t = 0; t < back.velocity.size(); ++t) CHECK(back.velocity[t] == ck.velocity[t]);

  SUBCASE("state hash tracks tensors and epoch, nothing else") {
    uint64_t h = state_hash(ck.params, ck.velocity, ck.completed_epochs);
    CHECK(h == state_hash(back.params, back.velocity, back.completed_epochs));
    CHECK(h != state_hash(ck.params, ck.velocity, ck.completed_epochs + 1));
    Checkpoint mut = load_checkpoint(path);
    tensor_list(mut.params)[0]->at(0) += 1e-9;
    CHECK(h != state_hash(mut.params, mut.velocity, mut.completed_epochs));
    // config hash is deliberately not part of the state
    Checkpoint other = load_checkpoint(path);
    other.config_hash ^= 1;
    CHECK(h == state_hash(other.params, other.velocity, other.completed_epochs));
  }
  SUBCASE("wrong magic and truncation are io errors") {
    {
      std::ofstream out(dir.str() + "/bad.ckpt", std::ios::binary);
      out << "NOPE" << std::string(64, '\0');
    }
    CHECK_THROWS_AS(load_checkpoint(dir.str() + "/bad.ckpt"), IoError);
    std::string text;
    {
      std::ifstream in(path, std::ios::binary);
      text.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    }
    {
      std::ofstream out(dir.str() + "/cut.ckpt", std::ios::binary);
      out << text.substr(0, text.size() / 2);
    }
    CHECK_THROWS_AS(load_checkpoint(dir.str() + "/cut.ckpt"), IoError);
  }
}

TEST_CASE("training runs complete and persist their artifacts") {
  TempDir dir("smoke");
  ExperimentConfig c = tiny_config(dir.str());

  SUBCASE("plain cross-entropy") {
    c.loss = "ce";
    RunOptions ro;
    ro.label = "ce";
    RunRecord rec = run_experiment(c, 1, ro);
    CHECK(rec.label == "ce");
    CHECK(rec.seed == 1);
    CHECK(rec.config_hash == config_hash(c));
    REQUIRE(rec.epochs.size() == 2);
    for (int e = 0; e < 2; ++e) {
      CHECK(rec.epochs[e].epoch == e);
      CHECK(rec.epochs[e].l_crl == 0.0);
      CHECK(rec.epochs[e].l_bln == rec.epochs[e].l_ce);
      CHECK(rec.epochs[e].val_ms >= 0.0);
    }
    CHECK(rec.final_eval.n == 30);
    CHECK(rec.final_eval.attrs.size() == 2);
    CHECK(fs::exists(dir.path / "ce-seed1.json"));
    CHECK(fs::exists(dir.path / "ce-seed1.ckpt"));
    RunRecord loaded = load_record((dir.path / "ce-seed1.json").string());
    CHECK(loaded.state_hash == rec.state_hash);
    Checkpoint ck = load_checkpoint((dir.path / "ce-seed1.ckpt").string());
    CHECK(ck.completed_epochs == 2);
    CHECK(ck.config_hash == rec.config_hash);
    CHECK(state_hash(ck.params, ck.velocity, ck.completed_epochs) == rec.state_hash);
  }
  SUBCASE("rectified variants and baselines complete") {
    for (std::string loss : {"crl-r", "crl-a", "crl-d"}) {
      c.loss = loss;
      RunOptions ro;
      ro.label = loss;
      RunRecord rec = run_experiment(c, 1, ro);
      REQUIRE(rec.epochs.size() == 2);
      for (const EpochStats& e : rec.epochs) {
        CHECK(e.l_crl >= 0.0);
        CHECK(e.l_bln == doctest::Approx(e.l_ce + e.l_crl).epsilon(1e-12));
      }
    }
    c.loss = "ce";
    for (std::string baseline : {"oversample", "downsample", "cost-sensitive"}) {
      c.baseline = baseline;
      RunOptions ro;
      ro.label = baseline;
      RunRecord rec = run_experiment(c, 1, ro);
      CHECK(rec.epochs.size() == 2);
      CHECK(rec.final_eval.n == 30);
    }
  }
  SUBCASE("per-batch trace lines appear when asked for") {
    c.loss = "crl-r";
    RunOptions ro;
    ro.label = "traced";
    ro.trace_path = dir.str() + "/trace.jsonl";
    run_experiment(c, 1, ro);
    std::ifstream in(ro.trace_path);
    REQUIRE(in.good());
    int lines = 0;
    std::string line;
    while (std::getline(in, line)) {
      ++lines;
      CHECK(line.find("\"anchors\"") != std::string::npos);
    }
    CHECK(lines == 2 * 4);  // epochs x ceil(60/16)
  }
  SUBCASE("invalid epoch counts are rejected before any work") {
    c.epochs = 0;
    CHECK_THROWS_AS(run_experiment(c, 1, RunOptions{}), ConfigError);
  }
}

TEST_CASE("equal config and seed reproduce the record byte for byte") {
  TempDir dir_a("det-a");
  TempDir dir_b("det-b");
  ExperimentConfig c = tiny_config(dir_a.str());
  c.loss = "crl-r";
  RunOptions ro;
  ro.label = "det";
  RunRecord a = run_experiment(c, 5, ro);
  c.out_dir = dir_b.str();  // out_dir feeds the config hash, so pin it back
  c.out_dir = dir_a.str();
  RunRecord b = run_experiment(c, 5, ro);
  a.wall_seconds = 0.0;
  b.wall_seconds = 0.0;
  CHECK(record_json(a) == record_json(b));
  CHECK(a.state_hash == b.state_hash);

  SUBCASE("a different seed changes the state") {
    RunRecord other = run_experiment(c, 6, ro);
    CHECK(other.state_hash != a.state_hash);
  }
}

TEST_CASE("disabling the rectifier reproduces plain cross-entropy exactly") {
  TempDir dir("reduction");
  ExperimentConfig ce = tiny_config(dir.str());
  ce.loss = "ce";
  ExperimentConfig none = ce;
  none.loss = "none";
  CHECK(config_hash(ce) != config_hash(none));

  RunOptions ro_ce;
  ro_ce.label = "ce";
  RunOptions ro_none;
  ro_none.label = "none";
  RunRecord rec_ce = run_experiment(ce, 2, ro_ce);
  RunRecord rec_none = run_experiment(none, 2, ro_none);
  CHECK(rec_ce.state_hash == rec_none.state_hash);
  CHECK(rec_ce.epochs == rec_none.epochs);
  CHECK(rec_ce.final_eval.avg_mean_sensitivity == rec_none.final_eval.avg_mean_sensitivity);
}

TEST_CASE("a paused and resumed run matches the uninterrupted one") {
  TempDir dir_full("resume-full");
  TempDir dir_part("resume-part");
  ExperimentConfig c = tiny_config(dir_full.str());
  c.loss = "crl-r";
  c.epochs = 6;

  RunOptions ro;
  ro.label = "run";
  RunRecord full = run_experiment(c, 9, ro);

  c.out_dir = dir_part.str();
  RunOptions pause = ro;
  pause.stop_after = 3;
  RunRecord half = run_experiment(c, 9, pause);
  REQUIRE(half.epochs.size() == 3);
  CHECK(half.state_hash != full.state_hash);

  RunOptions resume = ro;
  resume.resume_path = dir_part.str() + "/run-seed9.ckpt";
  RunRecord rest = run_experiment(c, 9, resume);
  CHECK(rest.state_hash == full.state_hash);
  REQUIRE(rest.epochs.size() == 3);
  for (int e = 0; e < 3; ++e) CHECK(rest.epochs[e] == full.epochs[e + 3]);

  SUBCASE("resume guards") {
    ExperimentConfig other = c;
    other.lr *= 2.0;
    CHECK_THROWS_AS(run_experiment(other, 9, resume), ConfigError);
    CHECK_THROWS_AS(run_experiment(c, 8, resume), ConfigError);
    RunOptions bad = resume;
    bad.stop_after = 2;  // before the checkpoint
    CHECK_THROWS_AS(run_experiment(c, 9, bad), ConfigError);
  }
}

TEST_CASE("diverging training aborts with a diagnostic dump") {
  TempDir dir("blowup");
  ExperimentConfig c = tiny_config(dir.str());
  c.loss = "ce";
  c.lr = 1e18;  // guaranteed overflow within a couple of steps
  c.epochs = 3;
  RunOptions ro;
  ro.label = "boom";
  CHECK_THROWS_AS(run_experiment(c, 1, ro), NumericError);
  CHECK(fs::exists(dir.path / "boom-seed1-diagnostic.json"));
}

TEST_CASE("median and spearman helpers") {
  CHECK(median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(median({4.0, 1.0, 3.0, 2.0}) == 2.5);
  CHECK(median({5.0}) == 5.0);
  CHECK_THROWS_AS(median({}), ContractError);

  CHECK(spearman({1, 2, 3, 4}, {10, 20, 30, 40}) == doctest::Approx(1.0));
  CHECK(spearman({1, 2, 3, 4}, {9, 7, 5, 3}) == doctest::Approx(-1.0));
  CHECK(spearman({1, 2, 3, 4}, {5, 5, 5, 5}) == 0.0);
  // one inversion: rho = 1 - 6*sum(d^2)/(n(n^2-1)) = 1 - 6*2/60 = 0.8
  CHECK(spearman({1, 2, 3, 4}, {1, 3, 2, 4}) == doctest::Approx(0.8));
  CHECK_THROWS_AS(spearman({1}, {1}), ContractError);
  CHECK_THROWS_AS(spearman({1, 2}, {1, 2, 3}), ContractError);
}

TEST_CASE("comparing records medians per-seed gains against the baseline") {
  std::vector<RunRecord> records;
  // baseline ce: flat 50/50 on both attrs for every seed
  for (uint64_t s : {1, 2, 3}) records.push_back(record_for("ce", s, 50, 50));
  // method A: gains {+2,+4,+6} on attr0, {+10,+30,+20} on attr1
  records.push_back(record_for("a", 1, 52, 60));
  records.push_back(record_for("a", 2, 54, 80));
  records.push_back(record_for("a", 3, 56, 70));
  // method B: constant -5 on both attrs
  for (uint64_t s : {1, 2, 3}) records.push_back(record_for("b", s, 45, 45));

  CompareReport rep = compare(records);
  REQUIRE(rep.rows.size() == 4);  // 2 attrs x 2 methods
  // rows sorted by ratio: attr0 (1:1) first, methods in first-seen order
  CHECK(rep.rows[0].attr == 0);
  CHECK(rep.rows[0].method == "a");
  CHECK(rep.rows[0].gain == 4.0);
  CHECK(rep.rows[1].method == "b");
  CHECK(rep.rows[1].gain == -5.0);
  CHECK(rep.rows[2].attr == 1);
  CHECK(rep.rows[2].ratio == "1:3");
  CHECK(rep.rows[2].gain == 20.0);
  CHECK(rep.rows[3].gain == -5.0);
  // per-seed average gains: a = {6, 17, 13} -> median 13; b = -5
  REQUIRE(rep.avg_gain.size() == 2);
  CHECK(rep.avg_gain[0].first == "a");
  CHECK(rep.avg_gain[0].second == 13.0);
  CHECK(rep.avg_gain[1].second == -5.0);
  CHECK(rep.tsv.find("attr\tratio\tmethod\tgain") == 0);
  CHECK(std::count(rep.tsv.begin(), rep.tsv.end(), '\n') == 5);

  SUBCASE("a record compared with itself gains nothing") {
    std::vector<RunRecord> two = {record_for("ce", 1, 60, 70), record_for("twin", 1, 60, 70)};
    CompareReport self = compare(two);
    for (const GainRow& row : self.rows) CHECK(row.gain == 0.0);
  }
  SUBCASE("incompatible record sets are contract errors") {
    CHECK_THROWS_AS(compare({record_for("x", 1, 50, 50)}), ContractError);  // no baseline
    std::vector<RunRecord> dup = {record_for("ce", 1, 50, 50), record_for("ce", 1, 50, 50)};
    CHECK_THROWS_AS(compare(dup), ContractError);
    std::vector<RunRecord> missing = {record_for("ce", 1, 50, 50), record_for("ce", 2, 50, 50),
                                      record_for("a", 1, 50, 50)};
    CHECK_THROWS_AS(compare(missing), ContractError);
    std::vector<RunRecord> shifted = {record_for("ce", 1, 50, 50), record_for("a", 1, 50, 50)};
    shifted[1].dataset_hash = 100;
    CHECK_THROWS_AS(compare(shifted), ContractError);
    std::vector<RunRecord> only_base = {record_for("ce", 1, 50, 50)};
    CHECK_THROWS_AS(compare(only_base), ContractError);
  }
}
