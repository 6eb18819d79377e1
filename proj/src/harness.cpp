#include "crl/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "crl/baselines.hpp"
#include "crl/binio.hpp"
#include "crl/errors.hpp"
#include "crl/hash.hpp"
#include "crl/losses.hpp"
#include "crl/rng.hpp"
#include "json.hpp"

namespace crl {

using ordered_json = nlohmann::ordered_json;

namespace {

ordered_json eval_to_json(const EvalReport& ev) {
  ordered_json attrs = ordered_json::array();
  for (const AttrEval& a : ev.attrs) {
    ordered_json j;
    j["ratio"] = a.ratio;
    j["mean_sensitivity"] = a.mean_sensitivity;
    j["recall"] = a.recall;
    j["support"] = a.support;
    j["skipped"] = a.skipped;
    attrs.push_back(std::move(j));
  }
  ordered_json j;
  j["n"] = ev.n;
  j["avg_mean_sensitivity"] = ev.avg_mean_sensitivity;
  j["attrs"] = std::move(attrs);
  return j;
}

EvalReport eval_from_json(const ordered_json& j) {
  EvalReport ev;
  ev.n = j.at("n").get<int64_t>();
  ev.avg_mean_sensitivity = j.at("avg_mean_sensitivity").get<double>();
  for (const ordered_json& a : j.at("attrs")) {
    AttrEval attr;
    attr.ratio = a.at("ratio").get<std::string>();
    attr.mean_sensitivity = a.at("mean_sensitivity").get<double>();
    attr.recall = a.at("recall").get<std::vector<double>>();
    attr.support = a.at("support").get<std::vector<int64_t>>();
    attr.skipped = a.at("skipped").get<std::vector<int>>();
    ev.attrs.push_back(std::move(attr));
  }
  return ev;
}

std::string safe_name(const std::string& label) {
  std::string out = label;
  for (char& c : out)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_' && c != '.') c = '_';
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw IoError("write to '" + path + "' failed");
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

bool bundle_finite(const LossBundle& b) {
  if (!std::isfinite(b.value)) return false;
  for (const Mat& m : b.grad_logits)
    if (!all_finite(m)) return false;
  for (const Mat& m : b.grad_feat)
    if (!all_finite(m)) return false;
  return true;
}

}  // namespace

std::string record_json(const RunRecord& rec) {
  ordered_json j;
  j["label"] = rec.label;
  j["seed"] = rec.seed;
  j["config_hash"] = rec.config_hash;
  j["dataset_hash"] = rec.dataset_hash;
  ordered_json epochs = ordered_json::array();
  for (const EpochStats& e : rec.epochs) {
    ordered_json je;
    je["epoch"] = e.epoch;
    je["l_ce"] = e.l_ce;
    je["l_crl"] = e.l_crl;
    je["l_bln"] = e.l_bln;
    je["val_ms"] = e.val_ms;
    epochs.push_back(std::move(je));
  }
  j["epochs"] = std::move(epochs);
  j["final"] = eval_to_json(rec.final_eval);
  j["state_hash"] = rec.state_hash;
  j["wall_seconds"] = rec.wall_seconds;
  return j.dump(2) + "\n";
}

RunRecord record_from_json(const std::string& text) {
  try {
    ordered_json j = ordered_json::parse(text);
    RunRecord rec;
    rec.label = j.at("label").get<std::string>();
    rec.seed = j.at("seed").get<uint64_t>();
    rec.config_hash = j.at("config_hash").get<uint64_t>();
    rec.dataset_hash = j.at("dataset_hash").get<uint64_t>();
    for (const ordered_json& je : j.at("epochs")) {
      EpochStats e;
      e.epoch = je.at("epoch").get<int>();
      e.l_ce = je.at("l_ce").get<double>();
      e.l_crl = je.at("l_crl").get<double>();
      e.l_bln = je.at("l_bln").get<double>();
      e.val_ms = je.at("val_ms").get<double>();
      rec.epochs.push_back(e);
    }
    rec.final_eval = eval_from_json(j.at("final"));
    rec.state_hash = j.at("state_hash").get<uint64_t>();
    rec.wall_seconds = j.at("wall_seconds").get<double>();
    return rec;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed run record: ") + e.what());
  }
}

void save_record(const RunRecord& rec, const std::string& path) {
  write_text(path, record_json(rec));
}

RunRecord load_record(const std::string& path) {
  try {
    return record_from_json(read_text(path));
  } catch (const IoError& e) {
    throw IoError(std::string(e.what()) + " (" + path + ")");
  }
}

void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  BinWriter w(path);
  w.bytes("CRLC", 4);
  w.u16(1);
  w.u64(ck.config_hash);
  w.u64(ck.run_seed);
  w.u32(ck.completed_epochs);
  w.u32(static_cast<uint32_t>(ck.model.feature_dim));
  w.u32(static_cast<uint32_t>(ck.model.trunk_layer_sizes.size()));
  for (int s : ck.model.trunk_layer_sizes) w.u32(static_cast<uint32_t>(s));
  w.u32(static_cast<uint32_t>(ck.model.branch_dim));
  w.u32(static_cast<uint32_t>(ck.model.schema.n_attr()));
  for (int c : ck.model.schema.cardinalities) w.u32(static_cast<uint32_t>(c));
  unsigned char norm = ck.model.normalize_features ? 1 : 0;
  w.bytes(&norm, 1);
  w.u64(ck.model.init_seed);
  w.f64(ck.lr);
  w.f64(ck.momentum);
  w.f64(ck.weight_decay);
  std::vector<const Vec*> tensors = tensor_list(ck.params);
  if (tensors.size() != ck.velocity.size())
    throw ContractError("checkpoint has " + std::to_string(ck.velocity.size()) +
                        " momentum buffers for " + std::to_string(tensors.size()) + " tensors");
  w.u32(static_cast<uint32_t>(tensors.size()));
  for (const Vec* t : tensors) {
    w.u64(t->size());
    w.f64_array(t->data(), t->size());
  }
  for (const Vec& v : ck.velocity) {
    w.u64(v.size());
    w.f64_array(v.data(), v.size());
  }
  w.close();
}

Checkpoint load_checkpoint(const std::string& path) {
  BinReader r(path);
  char magic[4];
  r.bytes(magic, 4);
  if (std::string(magic, 4) != "CRLC") r.fail("not a checkpoint file (bad magic)", 0);
  uint16_t version = r.u16();
  if (version != 1) r.fail("unsupported checkpoint version " + std::to_string(version), 4);

  Checkpoint ck;
  ck.config_hash = r.u64();
  ck.run_seed = r.u64();
  ck.completed_epochs = r.u32();
  ck.model.feature_dim = static_cast<int>(r.u32());
  uint32_t n_trunk = r.u32();
  for (uint32_t i = 0; i < n_trunk; ++i)
    ck.model.trunk_layer_sizes.push_back(static_cast<int>(r.u32()));
  ck.model.branch_dim = static_cast<int>(r.u32());
  uint32_t n_attr = r.u32();
  for (uint32_t i = 0; i < n_attr; ++i)
    ck.model.schema.cardinalities.push_back(static_cast<int>(r.u32()));
  unsigned char norm = 0;
  r.bytes(&norm, 1);
  ck.model.normalize_features = norm != 0;
  ck.model.init_seed = r.u64();
  ck.model.validate();
  ck.lr = r.f64();
  ck.momentum = r.f64();
  ck.weight_decay = r.f64();

  ck.params = init_params(ck.model);
  std::vector<Vec*> tensors = tensor_list(ck.params);
  uint32_t n_tensors = r.u32();
  if (n_tensors != tensors.size())
    r.fail("expected " + std::to_string(tensors.size()) + " tensors, file has " +
               std::to_string(n_tensors),
           r.offset());
  for (Vec* t : tensors) {
    uint64_t len = r.u64();
    if (len != t->size())
      r.fail("tensor length " + std::to_string(len) + " does not match the model shape",
             r.offset());
    r.f64_array(t->data(), t->size());
  }
  for (uint32_t i = 0; i < n_tensors; ++i) {
    uint64_t len = r.u64();
    if (len != tensors[i]->size())
      r.fail("momentum buffer length " + std::to_string(len) + " does not match the model shape",
             r.offset());
    Vec v(len);
    r.f64_array(v.data(), v.size());
    ck.velocity.push_back(std::move(v));
  }
  return ck;
}

uint64_t state_hash(const Parameters& params, const std::vector<Vec>& velocity,
                    uint32_t completed_epochs) {
  uint64_t e64 = completed_epochs;
  uint64_t h = fnv1a(&e64, sizeof(e64));
  for (const Vec* t : tensor_list(params)) {
    uint64_t len = t->size();
    h = fnv1a(&len, sizeof(len), h);
    h = fnv1a(t->data(), len * sizeof(double), h);
  }
  for (const Vec& v : velocity) {
    uint64_t len = v.size();
    h = fnv1a(&len, sizeof(len), h);
    h = fnv1a(v.data(), len * sizeof(double), h);
  }
  return h;
}

TrainData prepare_data(const ExperimentConfig& config) {
  Dataset full;
  if (config.source == "generate") {
    full = generate_synthetic(generator_spec(config));
  } else {
    full = load_dataset(config.data_path);
    if (full.n != config.train_samples + config.test_samples)
      throw ConfigError("dataset '" + config.data_path + "' holds " + std::to_string(full.n) +
                        " samples but the config asks for " +
                        std::to_string(config.train_samples + config.test_samples));
  }
  TrainData data;
  data.full_hash = dataset_hash(full);
  const double tr = static_cast<double>(config.train_samples);
  const double te = static_cast<double>(config.test_samples);
  std::vector<Dataset> parts =
      split(full, {tr / (tr + te), te / (tr + te)}, Rng::mix(config.gen_seed, 2));
  data.train = std::move(parts[0]);
  data.test = std::move(parts[1]);
  return data;
}

RunRecord run_experiment(const ExperimentConfig& config, uint64_t seed, const RunOptions& opts) {
  config.validate();
  const auto t0 = std::chrono::steady_clock::now();
  TrainData data = prepare_data(config);
  const Dataset& train = data.train;
  const AttributeSchema schema = train.schema;
  const int n_attr = schema.n_attr();

  // Rebalancing machinery. Resampling fixes one index plan for the whole run;
  // epochs reshuffle it. Cost weighting swaps the loss, not the data.
  std::vector<int64_t> base_indices;
  if (config.baseline == "oversample" || config.baseline == "downsample") {
    const int ref = config.ref_attr == -1 ? most_imbalanced_attr(train) : config.ref_attr;
    const SamplerMode mode =
        config.baseline == "oversample" ? SamplerMode::kOversample : SamplerMode::kDownsample;
    base_indices = make_sampler(train, mode, ref, Rng::mix(seed, 3)).indices;
  } else {
    base_indices.resize(static_cast<size_t>(train.n));
    std::iota(base_indices.begin(), base_indices.end(), int64_t{0});
  }
  const bool weighted = config.baseline == "cost-sensitive";
  ClassWeights weights;
  if (weighted) weights = cost_weights(train);

  const uint64_t cfg_hash = config_hash(config);
  const ModelConfig mc = config.model_config(Rng::mix(seed, 1));
  Parameters params = init_params(mc);
  OptimState optim = init_optim(params, config.lr, config.momentum, config.weight_decay);
  int start_epoch = 0;
  if (!opts.resume_path.empty()) {
    Checkpoint ck = load_checkpoint(opts.resume_path);
    if (ck.config_hash != cfg_hash)
      throw ConfigError("checkpoint '" + opts.resume_path + "' was written by a different config");
    if (ck.run_seed != seed)
      throw ConfigError("checkpoint '" + opts.resume_path + "' belongs to seed " +
                        std::to_string(ck.run_seed) + ", not " + std::to_string(seed));
    if (!(ck.model == mc))
      throw ConfigError("checkpoint '" + opts.resume_path + "' model shape does not match");
    if (ck.completed_epochs > static_cast<uint32_t>(config.epochs))
      throw ConfigError("checkpoint already covers " + std::to_string(ck.completed_epochs) +
                        " epochs, config asks for " + std::to_string(config.epochs));
    params = std::move(ck.params);
    optim.velocity = std::move(ck.velocity);
    start_epoch = static_cast<int>(ck.completed_epochs);
  }

  Mat test_x(static_cast<int>(data.test.n), data.test.feature_dim);
  IntMat test_y(static_cast<int>(data.test.n), n_attr);
  for (int64_t i = 0; i < data.test.n; ++i) {
    const double* f = data.test.feature_row(i);
    std::copy(f, f + data.test.feature_dim, test_x.row(static_cast<int>(i)));
    for (int j = 0; j < n_attr; ++j) test_y(static_cast<int>(i), j) = data.test.label(i, j);
  }

  const CrlOptions copt = config.crl_options();
  const bool use_combined = !weighted && (config.uses_crl() || config.loss == "none");

  std::filesystem::create_directories(config.out_dir);
  const std::string stem =
      config.out_dir + "/" + safe_name(opts.label) + "-seed" + std::to_string(seed);
  std::ofstream trace;
  if (!opts.trace_path.empty()) {
    trace.open(opts.trace_path, std::ios::binary);
    if (!trace) throw IoError("cannot open '" + opts.trace_path + "' for writing");
  }

  RunRecord rec;
  rec.label = opts.label;
  rec.seed = seed;
  rec.config_hash = cfg_hash;
  rec.dataset_hash = data.full_hash;

  int end_epoch = config.epochs;
  if (opts.stop_after > 0) end_epoch = std::min(end_epoch, opts.stop_after);
  if (end_epoch < start_epoch)
    throw ConfigError("stop_after " + std::to_string(opts.stop_after) +
                      " lies before the checkpoint's " + std::to_string(start_epoch) + " epochs");

  const int64_t n_train = static_cast<int64_t>(base_indices.size());
  for (int e = start_epoch; e < end_epoch; ++e) {
    std::vector<int64_t> order = base_indices;
    Rng epoch_rng(Rng::mix(seed, 1000 + static_cast<uint64_t>(e)));
    epoch_rng.shuffle(order);

    double sum_ce = 0.0, sum_crl = 0.0, sum_total = 0.0;
    int batch_index = 0;
    for (int64_t b0 = 0; b0 < n_train; b0 += config.batch_size, ++batch_index) {
      const int nb = static_cast<int>(std::min<int64_t>(config.batch_size, n_train - b0));
      Mat bx(nb, train.feature_dim);
      IntMat by(nb, n_attr);
      for (int r = 0; r < nb; ++r) {
        const int64_t src = order[static_cast<size_t>(b0) + r];
        const double* f = train.feature_row(src);
        std::copy(f, f + train.feature_dim, bx.row(r));
        for (int j = 0; j < n_attr; ++j) by(r, j) = train.label(src, j);
      }

      ForwardCache cache = forward(mc, params, bx);
      LossBundle bundle = weighted    ? weighted_cross_entropy(cache, by, weights)
                          : use_combined ? combined_loss(cache, by, schema, copt)
                                         : cross_entropy(cache, by);
      if (!bundle_finite(bundle)) {
        const std::string dump_path = stem + "-diagnostic.json";
        ordered_json dump;
        dump["label"] = opts.label;
        dump["seed"] = seed;
        dump["epoch"] = e;
        dump["batch"] = batch_index;
        dump["value"] = bundle.value;
        dump["ce_component"] = bundle.ce_component;
        dump["crl_component"] = bundle.crl_component;
        dump["n_anchors"] = bundle.n_anchors;
        dump["n_triplets"] = bundle.n_triplets;
        std::vector<int64_t> rows(order.begin() + b0, order.begin() + b0 + nb);
        dump["sample_indices"] = rows;
        write_text(dump_path, dump.dump(2) + "\n");
        throw NumericError("non-finite loss in epoch " + std::to_string(e) + " batch " +
                           std::to_string(batch_index) + "; diagnostics at " + dump_path);
      }

      Gradients g = backward(mc, params, cache, bundle.grad_logits, bundle.grad_feat);
      sgd_step(params, g, optim);

      const double ce = use_combined ? bundle.ce_component : bundle.value;
      const double crl = use_combined ? bundle.crl_component : 0.0;
      sum_ce += ce * nb;
      sum_crl += crl * nb;
      sum_total += bundle.value * nb;
      if (trace.is_open()) {
        ordered_json line;
        line["epoch"] = e;
        line["batch"] = batch_index;
        line["n"] = nb;
        line["value"] = bundle.value;
        line["ce"] = ce;
        line["crl"] = crl;
        line["anchors"] = bundle.n_anchors;
        line["triplets"] = bundle.n_triplets;
        line["pos_pairs"] = bundle.n_pos_pairs;
        line["neg_pairs"] = bundle.n_neg_pairs;
        trace << line.dump() << "\n";
      }
    }

    IntMat pred = predict(mc, params, test_x);
    EvalReport ev = evaluate(pred, test_y, schema);
    const double inv = 1.0 / static_cast<double>(n_train);
    rec.epochs.push_back(
        {e, sum_ce * inv, sum_crl * inv, sum_total * inv, ev.avg_mean_sensitivity});
  }

  IntMat pred = predict(mc, params, test_x);
  rec.final_eval = evaluate(pred, test_y, schema);
  rec.state_hash = state_hash(params, optim.velocity, static_cast<uint32_t>(end_epoch));

  Checkpoint ck;
  ck.config_hash = cfg_hash;
  ck.run_seed = seed;
  ck.completed_epochs = static_cast<uint32_t>(end_epoch);
  ck.model = mc;
  ck.lr = config.lr;
  ck.momentum = config.momentum;
  ck.weight_decay = config.weight_decay;
  ck.params = std::move(params);
  ck.velocity = std::move(optim.velocity);
  save_checkpoint(ck, stem + ".ckpt");

  rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  save_record(rec, stem + ".json");
  return rec;
}

}  // namespace crl
