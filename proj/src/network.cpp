#include "crl/network.hpp"

#include <cmath>
#include <string>

#include "crl/errors.hpp"
#include "crl/kernels.hpp"
#include "crl/rng.hpp"

namespace crl {

namespace K = kernels;

void ModelConfig::validate() const {
  schema.validate();
  if (feature_dim < 1) throw ConfigError("feature_dim must be >= 1");
  if (branch_dim < 1) throw ConfigError("branch_dim must be >= 1");
  if (trunk_layer_sizes.empty()) throw ConfigError("trunk needs at least one layer");
  for (size_t l = 0; l < trunk_layer_sizes.size(); ++l) {
    if (trunk_layer_sizes[l] < 1)
      throw ConfigError("trunk layer " + std::to_string(l) + " width must be >= 1");
  }
}

std::vector<Vec*> tensor_list(Parameters& p) {
  std::vector<Vec*> out;
  for (size_t l = 0; l < p.trunk_w.size(); ++l) {
    out.push_back(&p.trunk_w[l].a);
    out.push_back(&p.trunk_b[l]);
  }
  for (size_t j = 0; j < p.branch_w.size(); ++j) {
    out.push_back(&p.branch_w[j].a);
    out.push_back(&p.branch_b[j]);
    out.push_back(&p.head_w[j].a);
    out.push_back(&p.head_b[j]);
  }
  return out;
}

std::vector<const Vec*> tensor_list(const Parameters& p) {
  auto mut = tensor_list(const_cast<Parameters&>(p));
  return {mut.begin(), mut.end()};
}

Parameters zeros_like(const Parameters& p) {
  Parameters z;
  auto like = [](const std::vector<Mat>& src) {
    std::vector<Mat> out;
    out.reserve(src.size());
    for (const Mat& m : src) out.emplace_back(m.rows, m.cols);
    return out;
  };
  auto likev = [](const std::vector<Vec>& src) {
    std::vector<Vec> out;
    out.reserve(src.size());
    for (const Vec& v : src) out.emplace_back(v.size(), 0.0);
    return out;
  };
  z.trunk_w = like(p.trunk_w);
  z.trunk_b = likev(p.trunk_b);
  z.branch_w = like(p.branch_w);
  z.branch_b = likev(p.branch_b);
  z.head_w = like(p.head_w);
  z.head_b = likev(p.head_b);
  return z;
}

Parameters init_params(const ModelConfig& config) {
  config.validate();
  Rng rng(config.init_seed);
  auto fill = [&rng](Mat& w) {
    double bound = 1.0 / std::sqrt(static_cast<double>(w.cols));
    for (double& v : w.a) v = rng.uniform(-bound, bound);
  };

  Parameters p;
  int fan_in = config.feature_dim;
  for (int width : config.trunk_layer_sizes) {
    p.trunk_w.emplace_back(width, fan_in);
    fill(p.trunk_w.back());
    p.trunk_b.emplace_back(width, 0.0);
    fan_in = width;
  }
  const int trunk_out = fan_in;
  for (int j = 0; j < config.schema.n_attr(); ++j) {
    p.branch_w.emplace_back(config.branch_dim, trunk_out);
    fill(p.branch_w.back());
    p.branch_b.emplace_back(config.branch_dim, 0.0);
    p.head_w.emplace_back(config.schema.cardinality(j), config.branch_dim);
    fill(p.head_w.back());
    p.head_b.emplace_back(config.schema.cardinality(j), 0.0);
  }
  return p;
}

OptimState init_optim(const Parameters& p, double lr, double momentum, double weight_decay) {
  OptimState s;
  s.lr = lr;
  s.momentum = momentum;
  s.weight_decay = weight_decay;
  for (const Vec* t : tensor_list(p)) s.velocity.emplace_back(t->size(), 0.0);
  return s;
}

ForwardCache forward(const ModelConfig& config, const Parameters& p, const Mat& x) {
  if (x.rows < 1) throw ContractError("forward needs a non-empty batch");
  if (x.cols != config.feature_dim)
    throw ContractError("batch has " + std::to_string(x.cols) + " columns, model expects " +
                        std::to_string(config.feature_dim));
  if (!all_finite(x)) throw NumericError("batch features contain non-finite values");

  const int n = x.rows;
  const int n_attr = config.schema.n_attr();
  ForwardCache c;
  c.n = n;
  c.input = x;
  c.normalized = config.normalize_features;

  const Mat* cur = &c.input;
  for (size_t l = 0; l < p.trunk_w.size(); ++l) {
    c.trunk_pre.emplace_back(n, p.trunk_w[l].rows);
    K::linear_forward(*cur, p.trunk_w[l], p.trunk_b[l], c.trunk_pre.back());
    c.trunk_act.emplace_back(n, p.trunk_w[l].rows);
    K::relu_forward(c.trunk_pre.back(), c.trunk_act.back());
    cur = &c.trunk_act.back();
  }

  c.branch_pre.reserve(n_attr);
  c.branch_act.reserve(n_attr);
  c.feat.reserve(n_attr);
  c.feat_norms.reserve(n_attr);
  c.logits.reserve(n_attr);
  c.probs.reserve(n_attr);
  const Mat& trunk_out = *cur;
  for (int j = 0; j < n_attr; ++j) {
    c.branch_pre.emplace_back(n, config.branch_dim);
    K::linear_forward(trunk_out, p.branch_w[j], p.branch_b[j], c.branch_pre.back());
    c.branch_act.emplace_back(n, config.branch_dim);
    K::relu_forward(c.branch_pre.back(), c.branch_act.back());

    c.feat_norms.emplace_back(n, 0.0);
    if (config.normalize_features) {
      c.feat.emplace_back(n, config.branch_dim);
      K::l2_normalize_rows(c.branch_act.back(), c.feat.back(), c.feat_norms.back());
    } else {
      c.feat.push_back(c.branch_act.back());
    }

    const int card = config.schema.cardinality(j);
    c.logits.emplace_back(n, card);
    K::linear_forward(c.branch_act.back(), p.head_w[j], p.head_b[j], c.logits.back());
    c.probs.emplace_back(n, card);
    K::softmax_rows(c.logits.back(), c.probs.back());
  }
  return c;
}

Gradients backward(const ModelConfig& config, const Parameters& p, const ForwardCache& cache,
                   const std::vector<Mat>& grad_logits, const std::vector<Mat>& grad_feat) {
  const int n = cache.n;
  const int n_attr = config.schema.n_attr();
  if (!grad_logits.empty() && static_cast<int>(grad_logits.size()) != n_attr)
    throw ContractError("grad_logits must have one entry per attribute");
  if (!grad_feat.empty() && static_cast<int>(grad_feat.size()) != n_attr)
    throw ContractError("grad_feat must have one entry per attribute");

  Gradients g = zeros_like(p);
  const Mat& trunk_out = cache.trunk_act.back();
  Mat d_trunk_out(n, trunk_out.cols);

  Mat d_branch_act(n, config.branch_dim);
  Mat d_branch_pre(n, config.branch_dim);
  Mat d_branch_in(n, trunk_out.cols);
  for (int j = 0; j < n_attr; ++j) {
    d_branch_act.zero();
    if (!grad_logits.empty()) {
      const Mat& dl = grad_logits[j];
      if (dl.rows != n || dl.cols != config.schema.cardinality(j))
        throw ContractError("grad_logits shape mismatch on attribute " + std::to_string(j));
      K::linear_grad_params(dl, cache.branch_act[j], g.head_w[j], g.head_b[j]);
      K::linear_grad_input(dl, p.head_w[j], d_branch_act);
    }
    if (!grad_feat.empty()) {
      const Mat& df = grad_feat[j];
      if (df.rows != n || df.cols != config.branch_dim)
        throw ContractError("grad_feat shape mismatch on attribute " + std::to_string(j));
      if (cache.normalized) {
        K::l2_normalize_backward_add(cache.feat[j], cache.feat_norms[j], df, d_branch_act);
      } else {
        K::add_inplace(d_branch_act, df);
      }
    }

    K::relu_backward(cache.branch_pre[j], d_branch_act, d_branch_pre);
    K::linear_grad_params(d_branch_pre, trunk_out, g.branch_w[j], g.branch_b[j]);
    K::linear_grad_input(d_branch_pre, p.branch_w[j], d_branch_in);
    if (j == 0)
      d_trunk_out = d_branch_in;
    else
      K::add_inplace(d_trunk_out, d_branch_in);
  }

  // Trunk layers, last to first.
  Mat d_act = std::move(d_trunk_out);
  for (int l = static_cast<int>(p.trunk_w.size()) - 1; l >= 0; --l) {
    Mat d_pre(n, p.trunk_w[l].rows);
    K::relu_backward(cache.trunk_pre[l], d_act, d_pre);
    const Mat& layer_in = l == 0 ? cache.input : cache.trunk_act[l - 1];
    K::linear_grad_params(d_pre, layer_in, g.trunk_w[l], g.trunk_b[l]);
    if (l > 0) {
      Mat d_prev(n, p.trunk_w[l].cols);
      K::linear_grad_input(d_pre, p.trunk_w[l], d_prev);
      d_act = std::move(d_prev);
    }
  }
  return g;
}

void sgd_step(Parameters& p, const Gradients& g, OptimState& state) {
  auto pw = tensor_list(p);
  auto gw = tensor_list(g);
  if (pw.size() != gw.size() || pw.size() != state.velocity.size())
    throw ContractError("optimizer state does not match parameter tensors");
  for (size_t i = 0; i < pw.size(); ++i) {
    if (pw[i]->size() != gw[i]->size() || pw[i]->size() != state.velocity[i].size())
      throw ContractError("gradient tensor " + std::to_string(i) + " shape mismatch");
    K::sgd_update(*pw[i], *gw[i], state.velocity[i], state.lr, state.momentum,
                  state.weight_decay);
  }
}

IntMat predict(const ModelConfig& config, const Parameters& p, const Mat& x) {
  ForwardCache c = forward(config, p, x);
  const int n_attr = config.schema.n_attr();
  IntMat out(c.n, n_attr);
  std::vector<int32_t> col;
  for (int j = 0; j < n_attr; ++j) {
    K::argmax_rows(c.probs[j], col);
    for (int i = 0; i < c.n; ++i) out(i, j) = col[i];
  }
  return out;
}

}  // namespace crl
