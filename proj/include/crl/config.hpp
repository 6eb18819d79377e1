#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "crl/data.hpp"
#include "crl/losses.hpp"
#include "crl/mining.hpp"
#include "crl/network.hpp"

namespace crl {

// Minimal TOML-style document: [section] headers, key = value lines, line
// comments with #, and single-line arrays of scalars. That covers every
// experiment knob while keeping the parser small and auditable. Keys are
// addressed as "section.key".
struct ConfigValue {
  enum class Kind { kBool, kInt, kFloat, kString, kArray };
  Kind kind = Kind::kInt;
  bool b = false;
  int64_t i = 0;
  double f = 0.0;
  std::string s;
  std::vector<ConfigValue> items;
};

class ConfigDoc {
 public:
  static ConfigDoc parse(const std::string& text, const std::string& origin);
  static ConfigDoc parse_file(const std::string& path);

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  const std::string& origin() const { return origin_; }

  // Typed lookups; a present key of the wrong type is a config error. The
  // default-taking forms also mark the key as known for unknown-key checks.
  bool get_bool(const std::string& key, bool def);
  int64_t get_int(const std::string& key, int64_t def);
  uint64_t get_uint(const std::string& key, uint64_t def);
  double get_double(const std::string& key, double def);
  std::string get_string(const std::string& key, const std::string& def);
  std::vector<int> get_int_list(const std::string& key, std::vector<int> def);
  std::vector<uint64_t> get_uint_list(const std::string& key, std::vector<uint64_t> def);
  std::vector<double> get_double_list(const std::string& key, std::vector<double> def);

  // Every key the document holds that no getter asked about; used to reject
  // misspelled settings instead of silently ignoring them.
  std::vector<std::string> unknown_keys() const;

 private:
  const ConfigValue* find(const std::string& key, ConfigValue::Kind kind);

  std::string origin_;
  std::map<std::string, ConfigValue> values_;
  std::map<std::string, bool> seen_;
};

// Full experiment description with every default explicit. The canonical
// text form both feeds the config hash and round-trips through the parser.
struct ExperimentConfig {
  // data
  std::string source = "generate";  // "generate" | "file"
  std::string data_path;
  int64_t train_samples = 20000;
  int64_t test_samples = 4000;
  int feature_dim = 32;
  std::vector<int> cardinalities = {2, 2, 2, 2};
  std::vector<double> imbalance = {1.0, 10.0, 50.0, 200.0};  // per-attr "1:x"
  std::vector<double> priors_flat;  // optional explicit priors, concatenated
  double noise_sigma = 1.0;
  double signal = 3.0;  // prototype displacement scale
  uint64_t gen_seed = 1;
  // model
  std::vector<int> trunk = {64};
  int branch_dim = 64;
  bool normalize_features = true;
  // optim
  double lr = 0.001;
  double momentum = 0.9;
  double weight_decay = 0.0005;
  // train
  int batch_size = 128;
  int epochs = 30;
  std::string loss = "crl-r";     // ce | none | crl-r | crl-a | crl-d
  std::string mining = "instance";  // class | instance
  int k = 5;
  double m_apc = 1.0;
  double crl_weight = 1.0;
  int hist_bins = 51;
  double hist_lo = 0.0;
  double hist_hi = 2.0;
  std::string baseline = "none";  // none | oversample | downsample | cost-sensitive
  int ref_attr = -1;              // -1: pick the most imbalanced attribute
  std::vector<uint64_t> seeds = {1, 2, 3};
  std::string out_dir = "runs";

  bool operator==(const ExperimentConfig& o) const = default;

  void validate() const;
  AttributeSchema schema() const { return AttributeSchema{cardinalities}; }
  bool uses_crl() const { return loss == "crl-r" || loss == "crl-a" || loss == "crl-d"; }
  CrlOptions crl_options() const;
  ModelConfig model_config(uint64_t init_seed) const;
};

ExperimentConfig config_from_doc(ConfigDoc& doc);
ExperimentConfig load_experiment_config(const std::string& path);

// Parseable text with every field in a fixed order; `parse` of this text
// reproduces the config exactly.
std::string canonical_config(const ExperimentConfig& config);

// FNV-1a over the canonical text.
uint64_t config_hash(const ExperimentConfig& config);

// Synthetic data recipe: orthonormal per-attribute prototype directions with
// classes spread along each direction, priors from `imbalance` (largest
// class first, geometric decay to 1:x) unless `priors_flat` overrides them.
GeneratorSpec generator_spec(const ExperimentConfig& config);

}  // namespace crl
