#include "crl/config.hpp"

#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "crl/errors.hpp"
#include "crl/hash.hpp"
#include "crl/rng.hpp"

namespace crl {

namespace {

[[noreturn]] void fail_at(const std::string& origin, int line, const std::string& what) {
  throw ConfigError(origin + ":" + std::to_string(line) + ": " + what);
}

bool ident_ok(const std::string& s) {
  if (s.empty()) return false;
  for (char c : s)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-') return false;
  return true;
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

// Cut a # comment, honoring quoted strings.
std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted && c == '\\' && i + 1 < line.size()) {
      ++i;
      continue;
    }
    if (c == '"') quoted = !quoted;
    if (c == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

ConfigValue parse_scalar(const std::string& text, const std::string& origin, int line);

ConfigValue parse_string_value(const std::string& text, const std::string& origin, int line) {
  ConfigValue v;
  v.kind = ConfigValue::Kind::kString;
  size_t i = 1;
  for (; i < text.size(); ++i) {
    char c = text[i];
    if (c == '"') break;
    if (c == '\\') {
      if (i + 1 >= text.size()) fail_at(origin, line, "dangling escape in string");
      char e = text[++i];
      switch (e) {
        case '"': v.s += '"'; break;
        case '\\': v.s += '\\'; break;
        case 'n': v.s += '\n'; break;
        case 't': v.s += '\t'; break;
        default: fail_at(origin, line, std::string("unsupported escape \\") + e);
      }
      continue;
    }
    v.s += c;
  }
  if (i >= text.size()) fail_at(origin, line, "unterminated string");
  if (trim(text.substr(i + 1)) != "") fail_at(origin, line, "trailing text after string");
  return v;
}

ConfigValue parse_array(const std::string& text, const std::string& origin, int line) {
  if (text.back() != ']') fail_at(origin, line, "arrays must close on the same line");
  ConfigValue v;
  v.kind = ConfigValue::Kind::kArray;
  std::string inner = trim(text.substr(1, text.size() - 2));
  if (inner.empty()) return v;
  // Split on commas outside quotes.
  std::vector<std::string> pieces;
  std::string cur;
  bool quoted = false;
  for (size_t i = 0; i < inner.size(); ++i) {
    char c = inner[i];
    if (quoted && c == '\\' && i + 1 < inner.size()) {
      cur += c;
      cur += inner[++i];
      continue;
    }
    if (c == '"') quoted = !quoted;
    if (c == ',' && !quoted) {
      pieces.push_back(cur);
      cur.clear();
      continue;
    }
    cur += c;
  }
  pieces.push_back(cur);
  for (const std::string& piece : pieces) {
    std::string p = trim(piece);
    if (p.empty()) fail_at(origin, line, "empty array element");
    if (p[0] == '[') fail_at(origin, line, "nested arrays are not supported");
    v.items.push_back(parse_scalar(p, origin, line));
  }
  return v;
}

ConfigValue parse_scalar(const std::string& text, const std::string& origin, int line) {
  if (text.empty()) fail_at(origin, line, "missing value");
  if (text[0] == '"') return parse_string_value(text, origin, line);
  if (text == "true" || text == "false") {
    ConfigValue v;
    v.kind = ConfigValue::Kind::kBool;
    v.b = text == "true";
    return v;
  }
  bool integral = true;
  for (size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (i == 0 && (c == '+' || c == '-')) continue;
    if (!std::isdigit(static_cast<unsigned char>(c))) {
      integral = false;
      break;
    }
  }
  if (integral && text != "+" && text != "-") {
    errno = 0;
    char* end = nullptr;
    long long n = std::strtoll(text.c_str(), &end, 10);
    if (errno == ERANGE) fail_at(origin, line, "integer out of range: " + text);
    ConfigValue v;
    v.kind = ConfigValue::Kind::kInt;
    v.i = n;
    return v;
  }
  errno = 0;
  char* end = nullptr;
  double d = std::strtod(text.c_str(), &end);
  if (end != text.c_str() + text.size() || errno == ERANGE || !std::isfinite(d))
    fail_at(origin, line, "cannot parse value: " + text);
  ConfigValue v;
  v.kind = ConfigValue::Kind::kFloat;
  v.f = d;
  return v;
}

const char* kind_name(ConfigValue::Kind k) {
  switch (k) {
    case ConfigValue::Kind::kBool: return "boolean";
    case ConfigValue::Kind::kInt: return "integer";
    case ConfigValue::Kind::kFloat: return "float";
    case ConfigValue::Kind::kString: return "string";
    case ConfigValue::Kind::kArray: return "array";
  }
  return "?";
}

// Shortest decimal text that parses back to exactly the same double.
std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.15g", v);
  if (std::strtod(buf, nullptr) != v) std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace

ConfigDoc ConfigDoc::parse(const std::string& text, const std::string& origin) {
  ConfigDoc doc;
  doc.origin_ = origin;
  std::string section;
  std::istringstream in(text);
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = trim(strip_comment(raw));
    if (line.empty()) continue;
    if (line[0] == '[') {
      if (line.back() != ']') fail_at(origin, lineno, "malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      if (!ident_ok(section)) fail_at(origin, lineno, "bad section name '" + section + "'");
      continue;
    }
    size_t eq = std::string::npos;
    bool quoted = false;
    for (size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') quoted = !quoted;
      if (line[i] == '=' && !quoted) {
        eq = i;
        break;
      }
    }
    if (eq == std::string::npos) fail_at(origin, lineno, "expected key = value");
    std::string key = trim(line.substr(0, eq));
    if (!ident_ok(key)) fail_at(origin, lineno, "bad key name '" + key + "'");
    std::string value_text = trim(line.substr(eq + 1));
    ConfigValue value = value_text.size() && value_text[0] == '['
                            ? parse_array(value_text, origin, lineno)
                            : parse_scalar(value_text, origin, lineno);
    std::string full = section.empty() ? key : section + "." + key;
    if (doc.values_.count(full)) fail_at(origin, lineno, "duplicate key '" + full + "'");
    doc.values_.emplace(full, std::move(value));
  }
  return doc;
}

ConfigDoc ConfigDoc::parse_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path);
}

const ConfigValue* ConfigDoc::find(const std::string& key, ConfigValue::Kind kind) {
  seen_[key] = true;
  auto it = values_.find(key);
  if (it == values_.end()) return nullptr;
  const ConfigValue& v = it->second;
  bool ok = v.kind == kind ||
            (kind == ConfigValue::Kind::kFloat && v.kind == ConfigValue::Kind::kInt);
  if (!ok)
    throw ConfigError(origin_ + ": key '" + key + "' should be a " + kind_name(kind) +
                      ", got a " + kind_name(v.kind));
  return &v;
}

bool ConfigDoc::get_bool(const std::string& key, bool def) {
  const ConfigValue* v = find(key, ConfigValue::Kind::kBool);
  return v ? v->b : def;
}

int64_t ConfigDoc::get_int(const std::string& key, int64_t def) {
  const ConfigValue* v = find(key, ConfigValue::Kind::kInt);
  return v ? v->i : def;
}

uint64_t ConfigDoc::get_uint(const std::string& key, uint64_t def) {
  const ConfigValue* v = find(key, ConfigValue::Kind::kInt);
  if (!v) return def;
  if (v->i < 0) throw ConfigError(origin_ + ": key '" + key + "' must be >= 0");
  return static_cast<uint64_t>(v->i);
}

double ConfigDoc::get_double(const std::string& key, double def) {
  const ConfigValue* v = find(key, ConfigValue::Kind::kFloat);
  if (!v) return def;
  return v->kind == ConfigValue::Kind::kInt ? static_cast<double>(v->i) : v->f;
}

std::string ConfigDoc::get_string(const std::string& key, const std::string& def) {
  const ConfigValue* v = find(key, ConfigValue::Kind::kString);
  return v ? v->s : def;
}

std::vector<int> ConfigDoc::get_int_list(const std::string& key, std::vector<int> def) {
  const ConfigValue* v = find(key, ConfigValue::Kind::kArray);
  if (!v) return def;
  std::vector<int> out;
  for (const ConfigValue& item : v->items) {
    if (item.kind != ConfigValue::Kind::kInt)
      throw ConfigError(origin_ + ": key '" + key + "' must hold integers");
    out.push_back(static_cast<int>(item.i));
  }
  return out;
}

std::vector<uint64_t> ConfigDoc::get_uint_list(const std::string& key, std::vector<uint64_t> def) {
  const ConfigValue* v = find(key, ConfigValue::Kind::kArray);
  if (!v) return def;
  std::vector<uint64_t> out;
  for (const ConfigValue& item : v->items) {
    if (item.kind != ConfigValue::Kind::kInt || item.i < 0)
      throw ConfigError(origin_ + ": key '" + key + "' must hold integers >= 0");
    out.push_back(static_cast<uint64_t>(item.i));
  }
  return out;
}

std::vector<double> ConfigDoc::get_double_list(const std::string& key, std::vector<double> def) {
  const ConfigValue* v = find(key, ConfigValue::Kind::kArray);
  if (!v) return def;
  std::vector<double> out;
  for (const ConfigValue& item : v->items) {
    if (item.kind == ConfigValue::Kind::kInt)
      out.push_back(static_cast<double>(item.i));
    else if (item.kind == ConfigValue::Kind::kFloat)
      out.push_back(item.f);
    else
      throw ConfigError(origin_ + ": key '" + key + "' must hold numbers");
  }
  return out;
}

std::vector<std::string> ConfigDoc::unknown_keys() const {
  std::vector<std::string> out;
  for (const auto& [key, value] : values_)
    if (!seen_.count(key)) out.push_back(key);
  return out;
}

ExperimentConfig config_from_doc(ConfigDoc& doc) {
  ExperimentConfig c;
  c.source = doc.get_string("data.source", c.source);
  c.data_path = doc.get_string("data.path", c.data_path);
  c.train_samples = doc.get_int("data.train_samples", c.train_samples);
  c.test_samples = doc.get_int("data.test_samples", c.test_samples);
  c.feature_dim = static_cast<int>(doc.get_int("data.feature_dim", c.feature_dim));
  c.cardinalities = doc.get_int_list("data.cardinalities", c.cardinalities);
  c.imbalance = doc.get_double_list("data.imbalance", c.imbalance);
  c.priors_flat = doc.get_double_list("data.priors", c.priors_flat);
  c.noise_sigma = doc.get_double("data.noise_sigma", c.noise_sigma);
  c.signal = doc.get_double("data.signal", c.signal);
  c.gen_seed = doc.get_uint("data.gen_seed", c.gen_seed);
  c.trunk = doc.get_int_list("model.trunk", c.trunk);
  c.branch_dim = static_cast<int>(doc.get_int("model.branch_dim", c.branch_dim));
  c.normalize_features = doc.get_bool("model.normalize_features", c.normalize_features);
  c.lr = doc.get_double("optim.lr", c.lr);
  c.momentum = doc.get_double("optim.momentum", c.momentum);
  c.weight_decay = doc.get_double("optim.weight_decay", c.weight_decay);
  c.batch_size = static_cast<int>(doc.get_int("train.batch_size", c.batch_size));
  c.epochs = static_cast<int>(doc.get_int("train.epochs", c.epochs));
  c.loss = doc.get_string("train.loss", c.loss);
  c.mining = doc.get_string("train.mining", c.mining);
  c.k = static_cast<int>(doc.get_int("train.k", c.k));
  c.m_apc = doc.get_double("train.m_apc", c.m_apc);
  c.crl_weight = doc.get_double("train.crl_weight", c.crl_weight);
  c.hist_bins = static_cast<int>(doc.get_int("train.hist_bins", c.hist_bins));
  c.hist_lo = doc.get_double("train.hist_lo", c.hist_lo);
  c.hist_hi = doc.get_double("train.hist_hi", c.hist_hi);
  c.baseline = doc.get_string("train.baseline", c.baseline);
  c.ref_attr = static_cast<int>(doc.get_int("train.ref_attr", c.ref_attr));
  c.seeds = doc.get_uint_list("train.seeds", c.seeds);
  c.out_dir = doc.get_string("train.out_dir", c.out_dir);

  std::vector<std::string> unknown = doc.unknown_keys();
  if (!unknown.empty()) {
    std::string msg = doc.origin() + ": unknown key(s):";
    for (const std::string& k : unknown) msg += " '" + k + "'";
    throw ConfigError(msg);
  }
  c.validate();
  return c;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  ConfigDoc doc = ConfigDoc::parse_file(path);
  return config_from_doc(doc);
}

void ExperimentConfig::validate() const {
  if (source != "generate" && source != "file")
    throw ConfigError("data.source must be \"generate\" or \"file\"");
  if (source == "file" && data_path.empty())
    throw ConfigError("data.source = \"file\" requires data.path");
  if (train_samples < 1 || test_samples < 1)
    throw ConfigError("train_samples and test_samples must be >= 1");
  if (feature_dim < 1) throw ConfigError("feature_dim must be >= 1");
  if (cardinalities.empty()) throw ConfigError("at least one attribute is required");
  for (int card : cardinalities)
    if (card < 2) throw ConfigError("every attribute needs >= 2 classes");
  const int n_attr = static_cast<int>(cardinalities.size());
  if (source == "generate") {
    if (feature_dim < n_attr)
      throw ConfigError("generation needs feature_dim >= number of attributes for "
                        "orthogonal class directions");
    if (priors_flat.empty()) {
      if (static_cast<int>(imbalance.size()) != n_attr)
        throw ConfigError("data.imbalance must list one ratio per attribute");
      for (double x : imbalance)
        if (!(x >= 1.0)) throw ConfigError("imbalance ratios must be >= 1");
    } else {
      size_t want = 0;
      for (int card : cardinalities) want += static_cast<size_t>(card);
      if (priors_flat.size() != want)
        throw ConfigError("data.priors must concatenate one prior per class");
    }
    if (!(noise_sigma >= 0.0)) throw ConfigError("noise_sigma must be >= 0");
    if (!(signal > 0.0)) throw ConfigError("signal must be > 0");
  }
  if (trunk.empty()) throw ConfigError("model.trunk needs at least one layer width");
  for (int w : trunk)
    if (w < 1) throw ConfigError("trunk widths must be >= 1");
  if (branch_dim < 1) throw ConfigError("branch_dim must be >= 1");
  if (!(lr > 0.0)) throw ConfigError("lr must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must be in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
  if (batch_size < 2) throw ConfigError("batch_size must be >= 2");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (loss != "ce" && loss != "none" && !uses_crl())
    throw ConfigError("train.loss must be one of ce, none, crl-r, crl-a, crl-d");
  if (mining != "class" && mining != "instance")
    throw ConfigError("train.mining must be class or instance");
  if (k < 1) throw ConfigError("train.k must be >= 1");
  if (!(m_apc > 0.0)) throw ConfigError("m_apc must be > 0");
  if (!(crl_weight >= 0.0)) throw ConfigError("crl_weight must be >= 0");
  if (hist_bins < 2) throw ConfigError("hist_bins must be >= 2");
  if (!(hist_hi > hist_lo)) throw ConfigError("hist range must have hi > lo");
  if (baseline != "none" && baseline != "oversample" && baseline != "downsample" &&
      baseline != "cost-sensitive")
    throw ConfigError("train.baseline must be none, oversample, downsample, or cost-sensitive");
  if (baseline == "cost-sensitive" && uses_crl())
    throw ConfigError("cost-sensitive weighting applies to the plain classifier; use loss = ce");
  if (ref_attr != -1 && (ref_attr < 0 || ref_attr >= n_attr))
    throw ConfigError("ref_attr out of range");
  if (seeds.empty()) throw ConfigError("train.seeds must list at least one seed");
  if (out_dir.empty()) throw ConfigError("train.out_dir must not be empty");
}

CrlOptions ExperimentConfig::crl_options() const {
  CrlOptions opt;
  if (loss == "crl-r")
    opt.variant = CrlVariant::kRelative;
  else if (loss == "crl-a")
    opt.variant = CrlVariant::kAbsolute;
  else if (loss == "crl-d")
    opt.variant = CrlVariant::kDistribution;
  else
    opt.variant = CrlVariant::kNone;
  opt.mode = mining == "class" ? MiningMode::kClassLevel : MiningMode::kInstanceLevel;
  opt.K = k;
  opt.m_apc = m_apc;
  opt.hist.tau = hist_bins;
  opt.hist.lo = hist_lo;
  opt.hist.hi = hist_hi;
  opt.crl_weight = crl_weight;
  return opt;
}

ModelConfig ExperimentConfig::model_config(uint64_t init_seed) const {
  ModelConfig mc;
  mc.feature_dim = feature_dim;
  mc.trunk_layer_sizes = trunk;
  mc.branch_dim = branch_dim;
  mc.schema = schema();
  mc.normalize_features = normalize_features;
  mc.init_seed = init_seed;
  return mc;
}

std::string canonical_config(const ExperimentConfig& c) {
  std::ostringstream os;
  auto ints = [](const std::vector<int>& v) {
    std::string s = "[";
    for (size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + std::to_string(v[i]);
    return s + "]";
  };
  auto uints = [](const std::vector<uint64_t>& v) {
    std::string s = "[";
    for (size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + std::to_string(v[i]);
    return s + "]";
  };
  auto floats = [](const std::vector<double>& v) {
    std::string s = "[";
    for (size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt_double(v[i]);
    return s + "]";
  };
  os << "[data]\n";
  os << "source = " << quote(c.source) << "\n";
  os << "path = " << quote(c.data_path) << "\n";
  os << "train_samples = " << c.train_samples << "\n";
  os << "test_samples = " << c.test_samples << "\n";
  os << "feature_dim = " << c.feature_dim << "\n";
  os << "cardinalities = " << ints(c.cardinalities) << "\n";
  os << "imbalance = " << floats(c.imbalance) << "\n";
  os << "priors = " << floats(c.priors_flat) << "\n";
  os << "noise_sigma = " << fmt_double(c.noise_sigma) << "\n";
  os << "signal = " << fmt_double(c.signal) << "\n";
  os << "gen_seed = " << c.gen_seed << "\n";
  os << "\n[model]\n";
  os << "trunk = " << ints(c.trunk) << "\n";
  os << "branch_dim = " << c.branch_dim << "\n";
  os << "normalize_features = " << (c.normalize_features ? "true" : "false") << "\n";
  os << "\n[optim]\n";
  os << "lr = " << fmt_double(c.lr) << "\n";
  os << "momentum = " << fmt_double(c.momentum) << "\n";
  os << "weight_decay = " << fmt_double(c.weight_decay) << "\n";
  os << "\n[train]\n";
  os << "batch_size = " << c.batch_size << "\n";
  os << "epochs = " << c.epochs << "\n";
  os << "loss = " << quote(c.loss) << "\n";
  os << "mining = " << quote(c.mining) << "\n";
  os << "k = " << c.k << "\n";
  os << "m_apc = " << fmt_double(c.m_apc) << "\n";
  os << "crl_weight = " << fmt_double(c.crl_weight) << "\n";
  os << "hist_bins = " << c.hist_bins << "\n";
  os << "hist_lo = " << fmt_double(c.hist_lo) << "\n";
  os << "hist_hi = " << fmt_double(c.hist_hi) << "\n";
  os << "baseline = " << quote(c.baseline) << "\n";
  os << "ref_attr = " << c.ref_attr << "\n";
  os << "seeds = " << uints(c.seeds) << "\n";
  os << "out_dir = " << quote(c.out_dir) << "\n";
  return os.str();
}

uint64_t config_hash(const ExperimentConfig& c) {
  // Where artifacts land does not identify the experiment; neutralizing
  // out_dir lets eval accept a checkpoint regardless of --out-dir.
  ExperimentConfig id = c;
  id.out_dir = ExperimentConfig{}.out_dir;
  return fnv1a(canonical_config(id));
}

GeneratorSpec generator_spec(const ExperimentConfig& c) {
  c.validate();
  if (c.source != "generate")
    throw ConfigError("generator_spec requires data.source = \"generate\"");

  GeneratorSpec spec;
  spec.schema = c.schema();
  spec.feature_dim = c.feature_dim;
  spec.noise_sigma = c.noise_sigma;
  spec.n_samples = c.train_samples + c.test_samples;
  spec.seed = c.gen_seed;

  const int n_attr = spec.schema.n_attr();
  for (int j = 0; j < n_attr; ++j) {
    const int card = spec.schema.cardinality(j);
    std::vector<double> prior(card);
    if (!c.priors_flat.empty()) {
      size_t off = 0;
      for (int q = 0; q < j; ++q) off += static_cast<size_t>(spec.schema.cardinality(q));
      for (int z = 0; z < card; ++z) prior[z] = c.priors_flat[off + z];
    } else {
      // Geometric decay from the largest class down to 1:x at the last one.
      const double x = c.imbalance[j];
      double sum = 0.0;
      for (int z = 0; z < card; ++z) {
        prior[z] = std::pow(x, -static_cast<double>(z) / static_cast<double>(card - 1));
        sum += prior[z];
      }
      for (double& p : prior) p /= sum;
    }
    spec.priors.push_back(std::move(prior));
  }

  // Orthonormal attribute directions; classes sit at evenly spaced signed
  // multiples of the direction so attribute signals occupy disjoint subspaces.
  Rng rng(Rng::mix(c.gen_seed, 11));
  std::vector<Vec> dirs;
  for (int j = 0; j < n_attr; ++j) {
    Vec u(c.feature_dim);
    for (int attempt = 0;; ++attempt) {
      if (attempt >= 100) throw NumericError("could not orthonormalize prototype directions");
      for (double& v : u) v = rng.normal();
      for (const Vec& prev : dirs) {
        double dot = 0.0;
        for (int k = 0; k < c.feature_dim; ++k) dot += u[k] * prev[k];
        for (int k = 0; k < c.feature_dim; ++k) u[k] -= dot * prev[k];
      }
      double norm2 = 0.0;
      for (double v : u) norm2 += v * v;
      if (norm2 > 1e-12) {
        double inv = 1.0 / std::sqrt(norm2);
        for (double& v : u) v *= inv;
        break;
      }
    }
    dirs.push_back(u);

    const int card = spec.schema.cardinality(j);
    Mat proto(card, c.feature_dim);
    for (int z = 0; z < card; ++z) {
      const double coef =
          c.signal * (2.0 * static_cast<double>(z) / static_cast<double>(card - 1) - 1.0);
      for (int k = 0; k < c.feature_dim; ++k) proto(z, k) = coef * dirs[j][k];
    }
    spec.prototypes.push_back(std::move(proto));
  }
  spec.validate();
  return spec;
}

}  // namespace crl
