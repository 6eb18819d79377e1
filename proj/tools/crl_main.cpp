// Command-line front end: data generation, training, evaluation, comparison,
// and the synthetic benchmark suite. Every run is a pure function of its
// config text and seed.
#include <cstdio>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "crl/baselines.hpp"
#include "crl/errors.hpp"
#include "crl/harness.hpp"
#include "crl/kernels.hpp"
#include "crl/metrics.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::optional<std::string> loss;
  std::optional<std::string> mining;
  std::optional<std::string> baseline;
  std::optional<int> k;
  std::optional<int> epochs;
  std::optional<int> batch_size;
  std::optional<int> hist_bins;
  std::optional<double> m_apc;
  std::optional<double> crl_weight;
  std::optional<int> ref_attr;
  std::optional<uint64_t> gen_seed;
  std::optional<std::string> out_dir;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "experiment config file (TOML-style)");
  cmd->add_option("--loss", args.loss, "ce | none | crl-r | crl-a | crl-d");
  cmd->add_option("--mining", args.mining, "class | instance");
  cmd->add_option("--baseline", args.baseline, "none | oversample | downsample | cost-sensitive");
  cmd->add_option("--k", args.k, "hard examples per side");
  cmd->add_option("--epochs", args.epochs, "training epochs");
  cmd->add_option("--batch-size", args.batch_size, "samples per batch");
  cmd->add_option("--hist-bins", args.hist_bins, "histogram loss bins");
  cmd->add_option("--m-apc", args.m_apc, "absolute-loss margin");
  cmd->add_option("--crl-weight", args.crl_weight, "rectification weight in the objective");
  cmd->add_option("--ref-attr", args.ref_attr, "resampling reference attribute (-1: auto)");
  cmd->add_option("--gen-seed", args.gen_seed, "dataset generation seed");
  cmd->add_option("--out-dir", args.out_dir, "artifact directory");
}

crl::ExperimentConfig resolve_config(const CommonArgs& args) {
  crl::ExperimentConfig c;
  if (!args.config_path.empty()) c = crl::load_experiment_config(args.config_path);
  if (args.loss) c.loss = *args.loss;
  if (args.mining) c.mining = *args.mining;
  if (args.baseline) c.baseline = *args.baseline;
  if (args.k) c.k = *args.k;
  if (args.epochs) c.epochs = *args.epochs;
  if (args.batch_size) c.batch_size = *args.batch_size;
  if (args.hist_bins) c.hist_bins = *args.hist_bins;
  if (args.m_apc) c.m_apc = *args.m_apc;
  if (args.crl_weight) c.crl_weight = *args.crl_weight;
  if (args.ref_attr) c.ref_attr = *args.ref_attr;
  if (args.gen_seed) c.gen_seed = *args.gen_seed;
  if (args.out_dir) c.out_dir = *args.out_dir;
  c.validate();
  return c;
}

std::string default_label(const crl::ExperimentConfig& c) {
  std::string label = c.loss;
  if (c.uses_crl()) label += c.mining == "class" ? "-c" : "-i";
  if (c.baseline != "none") label += "-" + c.baseline;
  return label;
}

int cmd_gen_data(const CommonArgs& args, const std::string& out_path) {
  crl::ExperimentConfig c = resolve_config(args);
  crl::Dataset ds = crl::generate_synthetic(crl::generator_spec(c));
  crl::save_dataset(ds, out_path);
  std::printf("wrote %lld samples x %d features, %d attributes to %s\n",
              static_cast<long long>(ds.n), ds.feature_dim, ds.schema.n_attr(), out_path.c_str());
  for (int j = 0; j < ds.schema.n_attr(); ++j)
    std::printf("  attr %d: %s\n", j, crl::imbalance_ratio(ds.class_counts(j)).c_str());
  return 0;
}

int cmd_train(const CommonArgs& args, std::optional<uint64_t> seed, const std::string& label,
              const std::string& resume, const std::string& trace, int stop_after) {
  crl::ExperimentConfig c = resolve_config(args);
  std::vector<uint64_t> seeds = seed ? std::vector<uint64_t>{*seed} : c.seeds;
  if (!resume.empty() && seeds.size() != 1)
    throw crl::ConfigError("--resume applies to a single seed; pass --seed");
  for (uint64_t s : seeds) {
    crl::RunOptions opts;
    opts.label = label.empty() ? default_label(c) : label;
    opts.resume_path = resume;
    opts.trace_path = trace;
    opts.stop_after = stop_after;
    crl::RunRecord rec = crl::run_experiment(c, s, opts);
    std::printf("%s seed %llu: %d epochs, avg mean sensitivity %.2f%% (%.1fs)\n",
                rec.label.c_str(), static_cast<unsigned long long>(s),
                static_cast<int>(rec.epochs.size()), rec.final_eval.avg_mean_sensitivity,
                rec.wall_seconds);
    std::printf("%s", crl::report_text(rec.final_eval).c_str());
    std::printf("record: %s/%s-seed%llu.json\n", c.out_dir.c_str(), rec.label.c_str(),
                static_cast<unsigned long long>(s));
  }
  return 0;
}

int cmd_eval(const CommonArgs& args, const std::string& ckpt_path, bool print_config) {
  crl::ExperimentConfig c = resolve_config(args);
  if (print_config) {
    std::printf("%s", crl::canonical_config(c).c_str());
    return 0;
  }
  if (ckpt_path.empty())
    throw crl::ConfigError("eval needs --checkpoint (or --print-config)");
  crl::Checkpoint ck = crl::load_checkpoint(ckpt_path);
  if (ck.config_hash != crl::config_hash(c))
    throw crl::ConfigError("checkpoint '" + ckpt_path + "' was trained under a different config");
  crl::TrainData data = crl::prepare_data(c);
  crl::Mat x(static_cast<int>(data.test.n), data.test.feature_dim);
  crl::IntMat y(static_cast<int>(data.test.n), data.test.schema.n_attr());
  for (int64_t i = 0; i < data.test.n; ++i) {
    const double* f = data.test.feature_row(i);
    std::copy(f, f + data.test.feature_dim, x.row(static_cast<int>(i)));
    for (int j = 0; j < data.test.schema.n_attr(); ++j)
      y(static_cast<int>(i), j) = data.test.label(i, j);
  }
  crl::IntMat pred = crl::predict(ck.model, ck.params, x);
  crl::EvalReport report = crl::evaluate(pred, y, data.test.schema);
  std::printf("checkpoint: %s (%u epochs)\n", ckpt_path.c_str(), ck.completed_epochs);
  std::printf("%s", crl::report_text(report).c_str());
  return 0;
}

int cmd_compare(const std::vector<std::string>& record_paths, const std::string& baseline,
                const std::string& tsv_out) {
  std::vector<crl::RunRecord> records;
  for (const std::string& path : record_paths) records.push_back(crl::load_record(path));
  crl::CompareReport rep = crl::compare(records, baseline);
  std::printf("gain over '%s' (median of per-seed gains, percentage points):\n",
              baseline.c_str());
  std::printf("%s", rep.tsv.c_str());
  std::printf("average gain per method:\n");
  for (const auto& [method, gain] : rep.avg_gain)
    std::printf("  %-12s %+.2f\n", method.c_str(), gain);
  if (!tsv_out.empty()) {
    std::ofstream out(tsv_out, std::ios::binary);
    if (!out) throw crl::IoError("cannot write '" + tsv_out + "'");
    out << rep.tsv;
    std::printf("tsv: %s\n", tsv_out.c_str());
  }
  return 0;
}

int cmd_bench(const CommonArgs& args, bool quick) {
  crl::BenchOptions opts;
  opts.base = resolve_config(args);
  opts.out_dir = opts.base.out_dir;
  opts.quick = quick;
  crl::BenchResult res = crl::run_bench_suite(opts);
  std::printf("%s", crl::bench_summary(res).c_str());
  std::printf("artifacts: %s/{gains.tsv, verdict.json, summary.txt}\n", opts.out_dir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"class rectification training toolkit"};
  app.require_subcommand(1);

  CommonArgs args;

  auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset file");
  std::string gen_out;
  add_common(gen, args);
  gen->add_option("--out", gen_out, "dataset output path")->required();

  auto* train = app.add_subcommand("train", "train one run per seed");
  std::optional<uint64_t> seed;
  std::string label, resume, trace;
  int stop_after = 0;
  add_common(train, args);
  train->add_option("--seed", seed, "train only this seed");
  train->add_option("--label", label, "artifact name (default: derived from the loss)");
  train->add_option("--resume", resume, "checkpoint to continue from");
  train->add_option("--trace", trace, "write per-batch loss/mining counters (JSONL)");
  train->add_option("--stop-after", stop_after, "pause after this many epochs");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on the config's test split");
  std::string ckpt;
  bool print_config = false;
  add_common(eval, args);
  eval->add_option("--checkpoint", ckpt, "checkpoint file");
  eval->add_flag("--print-config", print_config, "print the resolved config and exit");

  auto* cmp = app.add_subcommand("compare", "gain tables from saved run records");
  std::vector<std::string> record_paths;
  std::string baseline_label = "ce", tsv_out;
  cmp->add_option("records", record_paths, "run record JSON files")->required();
  cmp->add_option("--baseline", baseline_label, "baseline method label");
  cmp->add_option("--out", tsv_out, "also write the gain table TSV here");

  auto* bench = app.add_subcommand("bench-suite", "run the full synthetic benchmark");
  bool quick = false;
  add_common(bench, args);
  bench->add_flag("--quick", quick, "small data and few epochs (smoke only)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    crl::kernels::init_threads_from_env();
    if (gen->parsed()) return cmd_gen_data(args, gen_out);
    if (train->parsed()) return cmd_train(args, seed, label, resume, trace, stop_after);
    if (eval->parsed()) return cmd_eval(args, ckpt, print_config);
    if (cmp->parsed()) return cmd_compare(record_paths, baseline_label, tsv_out);
    if (bench->parsed()) return cmd_bench(args, quick);
  } catch (const crl::ConfigError& e) {
    std::fprintf(stderr, "%s\n", e.what());  // what() carries the error: prefix
    return 2;
  } catch (const crl::IoError& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return 2;
  } catch (const crl::Error& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: internal: %s\n", e.what());
    return 1;
  }
  return 0;
}
