#pragma once

#include <cstdint>
#include <vector>

#include "crl/data.hpp"
#include "crl/mat.hpp"

namespace crl {

// Multi-branch classifier: a shared dense ReLU trunk feeds one branch layer
// per attribute (Linear + ReLU, width branch_dim), and each branch feeds a
// softmax head over that attribute's classes. Logits come from the raw branch
// features; mining and metric losses consume L2-normalized copies so that
// distances live on the unit sphere, where the angular margins are defined.
struct ModelConfig {
  int feature_dim = 0;
  std::vector<int> trunk_layer_sizes;
  int branch_dim = 64;
  AttributeSchema schema;
  bool normalize_features = true;
  uint64_t init_seed = 0;

  void validate() const;
  bool operator==(const ModelConfig& o) const = default;
};

struct Parameters {
  std::vector<Mat> trunk_w;   // [layer]: width x fan_in
  std::vector<Vec> trunk_b;   // [layer]: width
  std::vector<Mat> branch_w;  // [attr]: branch_dim x trunk_out
  std::vector<Vec> branch_b;  // [attr]: branch_dim
  std::vector<Mat> head_w;    // [attr]: cardinality x branch_dim
  std::vector<Vec> head_b;    // [attr]: cardinality
};

// Every tensor's flat storage, in a fixed order shared by the optimizer,
// checkpoints, and gradient checks.
std::vector<Vec*> tensor_list(Parameters& p);
std::vector<const Vec*> tensor_list(const Parameters& p);

// Same shapes as p, all values zero. Doubles as the Gradients container.
Parameters zeros_like(const Parameters& p);
using Gradients = Parameters;

struct ForwardCache {
  int n = 0;  // batch rows
  Mat input;
  std::vector<Mat> trunk_pre;   // [layer]: n x width, before ReLU
  std::vector<Mat> trunk_act;   // [layer]: n x width
  std::vector<Mat> branch_pre;  // [attr]: n x branch_dim, before ReLU
  std::vector<Mat> branch_act;  // [attr]: n x branch_dim, the features x_{i,j}
  std::vector<Mat> feat;        // [attr]: features used for distances (see below)
  std::vector<Vec> feat_norms;  // [attr]: per-row norms of branch_act
  std::vector<Mat> logits;      // [attr]: n x cardinality
  std::vector<Mat> probs;       // [attr]: n x cardinality
  bool normalized = true;       // whether feat is the L2-normalized copy
};

struct OptimState {
  std::vector<Vec> velocity;  // one buffer per tensor_list entry
  double lr = 0.001;
  double momentum = 0.9;
  double weight_decay = 0.0005;
};

// Scaled uniform fan-in init, U(-1/sqrt(fan_in), 1/sqrt(fan_in)), seeded;
// biases zero.
Parameters init_params(const ModelConfig& config);

OptimState init_optim(const Parameters& p, double lr, double momentum, double weight_decay);

ForwardCache forward(const ModelConfig& config, const Parameters& p, const Mat& x);

// grad_logits[j] is dL/dlogits for attribute j; grad_feat[j] is dL/dfeat
// with respect to cache.feat (the normalization Jacobian is applied inside
// when the cache holds normalized features). Either vector may be empty to
// mean "all zero".
Gradients backward(const ModelConfig& config, const Parameters& p, const ForwardCache& cache,
                   const std::vector<Mat>& grad_logits, const std::vector<Mat>& grad_feat);

void sgd_step(Parameters& p, const Gradients& g, OptimState& state);

// argmax over classes per attribute; ties go to the lower class index.
IntMat predict(const ModelConfig& config, const Parameters& p, const Mat& x);

}  // namespace crl
