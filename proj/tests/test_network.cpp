#include <doctest.h>

#include <cmath>

#include "crl/errors.hpp"
#include "crl/network.hpp"
#include "crl/rng.hpp"

using namespace crl;

namespace {

ModelConfig tiny_config(bool normalize = true) {
  ModelConfig c;
  c.feature_dim = 4;
  c.trunk_layer_sizes = {5};
  c.branch_dim = 3;
  c.schema.cardinalities = {2, 3};
  c.normalize_features = normalize;
  c.init_seed = 17;
  return c;
}

Mat random_batch(int n, int d, uint64_t seed) {
  Rng rng(seed);
  Mat x(n, d);
  for (double& v : x.a) v = rng.normal();
  return x;
}

double fd_rel_err(double analytic, double numeric) {
  double denom = std::max({1.0, std::abs(analytic), std::abs(numeric)});
  return std::abs(analytic - numeric) / denom;
}

}  // namespace

TEST_CASE("init_params is deterministic, shaped by the config, and bounded") {
  ModelConfig c = tiny_config();
  Parameters p = init_params(c);
  Parameters q = init_params(c);

  REQUIRE(p.trunk_w.size() == 1);
  CHECK(p.trunk_w[0].rows == 5);
  CHECK(p.trunk_w[0].cols == 4);
  REQUIRE(p.head_w.size() == 2);
  CHECK(p.head_w[0].rows == 2);
  CHECK(p.head_w[0].cols == 3);
  CHECK(p.head_w[1].rows == 3);

  auto tp = tensor_list(p);
  auto tq = tensor_list(q);
  REQUIRE(tp.size() == tq.size());
  for (size_t i = 0; i < tp.size(); ++i) CHECK(*tp[i] == *tq[i]);

  for (const Vec& b : p.trunk_b)
    for (double v : b) CHECK(v == 0.0);
  double bound = 1.0 / std::sqrt(4.0);
  for (double v : p.trunk_w[0].a) CHECK(std::abs(v) <= bound);

  c.init_seed = 18;
  Parameters r = init_params(c);
  CHECK_FALSE(p.trunk_w[0].a == r.trunk_w[0].a);
}

TEST_CASE("init_params rejects bad configs") {
  ModelConfig c = tiny_config();
  c.trunk_layer_sizes = {};
  CHECK_THROWS_AS(init_params(c), ConfigError);
  c = tiny_config();
  c.trunk_layer_sizes = {0};
  CHECK_THROWS_AS(init_params(c), ConfigError);
  c = tiny_config();
  c.branch_dim = 0;
  CHECK_THROWS_AS(init_params(c), ConfigError);
}

TEST_CASE("forward produces normalized probability rows") {
  ModelConfig c = tiny_config();
  Parameters p = init_params(c);
  Mat x = random_batch(6, 4, 3);
  ForwardCache cache = forward(c, p, x);

  REQUIRE(cache.probs.size() == 2);
  for (int j = 0; j < 2; ++j) {
    for (int i = 0; i < 6; ++i) {
      double sum = 0.0;
      for (int k = 0; k < cache.probs[j].cols; ++k) {
        double pr = cache.probs[j](i, k);
        CHECK(pr >= 0.0);
        CHECK(pr <= 1.0);
        sum += pr;
      }
      CHECK(std::abs(sum - 1.0) < 1e-9);
    }
  }

  // Normalized features have unit norm unless the raw row is zero.
  for (int j = 0; j < 2; ++j) {
    for (int i = 0; i < 6; ++i) {
      double norm = 0.0;
      for (int k = 0; k < c.branch_dim; ++k)
        norm += cache.feat[j](i, k) * cache.feat[j](i, k);
      norm = std::sqrt(norm);
      if (cache.feat_norms[j][i] > 0.0)
        CHECK(norm == doctest::Approx(1.0).epsilon(1e-12));
      else
        CHECK(norm == 0.0);
    }
  }
}

TEST_CASE("constant-bias head reproduces the (0.75, 0.25) softmax point") {
  ModelConfig c = tiny_config();
  c.schema.cardinalities = {2};
  Parameters p = init_params(c);
  p.head_w[0].zero();
  p.head_b[0] = {std::log(3.0), 0.0};

  Mat x = random_batch(4, 4, 5);
  ForwardCache cache = forward(c, p, x);
  for (int i = 0; i < 4; ++i) {
    CHECK(cache.probs[0](i, 0) == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(cache.probs[0](i, 1) == doctest::Approx(0.25).epsilon(1e-12));
  }

  // Adding a constant to every logit leaves the probabilities unchanged.
  Parameters q = p;
  q.head_b[0] = {std::log(3.0) + 7.0, 7.0};
  ForwardCache cache2 = forward(c, q, x);
  for (int i = 0; i < 4; ++i)
    CHECK(cache2.probs[0](i, 0) == doctest::Approx(cache.probs[0](i, 0)).epsilon(1e-12));
}

TEST_CASE("zero head weights give uniform probabilities and class-0 predictions") {
  ModelConfig c = tiny_config();
  Parameters p = init_params(c);
  for (auto& w : p.head_w) w.zero();
  for (auto& b : p.head_b) std::fill(b.begin(), b.end(), 0.0);

  Mat x = random_batch(5, 4, 8);
  ForwardCache cache = forward(c, p, x);
  CHECK(cache.probs[0](0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(cache.probs[1](0, 0) == doctest::Approx(1.0 / 3).epsilon(1e-12));

  IntMat pred = predict(c, p, x);
  for (int i = 0; i < 5; ++i) {
    CHECK(pred(i, 0) == 0);
    CHECK(pred(i, 1) == 0);
  }
}

TEST_CASE("forward rejects bad batches") {
  ModelConfig c = tiny_config();
  Parameters p = init_params(c);
  Mat empty;
  CHECK_THROWS_AS(forward(c, p, empty), ContractError);
  Mat wrong(2, 3);
  CHECK_THROWS_AS(forward(c, p, wrong), ContractError);
  Mat nan(2, 4);
  nan(1, 2) = std::nan("");
  CHECK_THROWS_AS(forward(c, p, nan), NumericError);
}

TEST_CASE("backward rejects mismatched gradient shapes") {
  ModelConfig c = tiny_config();
  Parameters p = init_params(c);
  Mat x = random_batch(3, 4, 2);
  ForwardCache cache = forward(c, p, x);

  std::vector<Mat> bad_logits = {Mat(3, 2)};  // one entry, model has two attributes
  CHECK_THROWS_AS(backward(c, p, cache, bad_logits, {}), ContractError);

  std::vector<Mat> wrong_shape = {Mat(3, 2), Mat(3, 4)};  // attr 1 head has 3 classes
  CHECK_THROWS_AS(backward(c, p, cache, wrong_shape, {}), ContractError);
}

TEST_CASE("zero upstream gradients give zero parameter gradients") {
  ModelConfig c = tiny_config();
  Parameters p = init_params(c);
  Mat x = random_batch(3, 4, 2);
  ForwardCache cache = forward(c, p, x);

  std::vector<Mat> gl = {Mat(3, 2), Mat(3, 3)};
  std::vector<Mat> gf = {Mat(3, 3), Mat(3, 3)};
  Gradients g = backward(c, p, cache, gl, gf);
  for (const Vec* t : tensor_list(g))
    for (double v : *t) CHECK(v == 0.0);
}

static void check_network_gradients(bool normalize) {
  ModelConfig c = tiny_config(normalize);
  Parameters p = init_params(c);
  Mat x = random_batch(3, 4, 4);

  // Fixed co-gradients G (on logits) and F (on distance features) turn the
  // network into a scalar objective with analytic gradient = backward(G, F).
  Rng rng(99);
  std::vector<Mat> G, F;
  for (int card : {2, 3}) {
    Mat g(3, card);
    for (double& v : g.a) v = rng.normal();
    G.push_back(g);
  }
  for (int j = 0; j < 2; ++j) {
    Mat f(3, 3);
    for (double& v : f.a) v = rng.normal();
    F.push_back(f);
  }

  auto objective = [&](const Parameters& q) {
    ForwardCache cache = forward(c, q, x);
    double s = 0.0;
    for (int j = 0; j < 2; ++j) {
      for (size_t i = 0; i < cache.logits[j].size(); ++i)
        s += cache.logits[j].a[i] * G[j].a[i];
      for (size_t i = 0; i < cache.feat[j].size(); ++i) s += cache.feat[j].a[i] * F[j].a[i];
    }
    return s;
  };

  ForwardCache cache = forward(c, p, x);
  Gradients g = backward(c, p, cache, G, F);

  auto gt = tensor_list(g);
  auto pt = tensor_list(p);
  const double h = 1e-5;
  int worst_count = 0;
  for (size_t t = 0; t < pt.size(); ++t) {
    for (size_t i = 0; i < pt[t]->size(); ++i) {
      Parameters q = p;
      (*tensor_list(q)[t])[i] += h;
      double up = objective(q);
      (*tensor_list(q)[t])[i] -= 2 * h;
      double down = objective(q);
      double num = (up - down) / (2 * h);
      if (fd_rel_err((*gt[t])[i], num) >= 1e-4) ++worst_count;
    }
  }
  CHECK(worst_count == 0);
}

TEST_CASE("analytic gradients match finite differences (normalized features)") {
  check_network_gradients(true);
}

TEST_CASE("analytic gradients match finite differences (raw features)") {
  check_network_gradients(false);
}

TEST_CASE("sgd_step closed-form behaviors") {
  ModelConfig c = tiny_config();
  c.schema.cardinalities = {2};
  c.trunk_layer_sizes = {2};
  Parameters p = init_params(c);

  SUBCASE("plain gradient descent when momentum and decay are zero") {
    OptimState s = init_optim(p, 1.0, 0.0, 0.0);
    Gradients g = zeros_like(p);
    g.trunk_w[0](0, 0) = 0.25;
    double before = p.trunk_w[0](0, 0);
    sgd_step(p, g, s);
    CHECK(p.trunk_w[0](0, 0) == doctest::Approx(before - 0.25).epsilon(1e-15));
  }

  SUBCASE("momentum coasts by v0*(m + m^2) over two gradient-free steps") {
    OptimState s = init_optim(p, 0.1, 0.9, 0.0);
    const double v0 = 0.5;
    s.velocity[0][0] = v0;
    Gradients g = zeros_like(p);
    double before = p.trunk_w[0](0, 0);
    sgd_step(p, g, s);
    sgd_step(p, g, s);
    CHECK(p.trunk_w[0](0, 0) ==
          doctest::Approx(before + v0 * (0.9 + 0.81)).epsilon(1e-12));
  }

  SUBCASE("weight decay shrinks parameters geometrically") {
    OptimState s = init_optim(p, 0.1, 0.0, 0.5);
    Gradients g = zeros_like(p);
    double before = p.trunk_w[0](0, 0);
    sgd_step(p, g, s);
    CHECK(p.trunk_w[0](0, 0) == doctest::Approx(before * (1.0 - 0.1 * 0.5)).epsilon(1e-12));
    sgd_step(p, g, s);
    // Momentum is zero, so two steps compose multiplicatively.
    CHECK(p.trunk_w[0](0, 0) ==
          doctest::Approx(before * (1.0 - 0.05) * (1.0 - 0.05) ).epsilon(1e-9));
  }
}

TEST_CASE("training steps are bit-reproducible") {
  ModelConfig c = tiny_config();
  Mat x = random_batch(4, 4, 12);
  Rng rng(5);
  std::vector<Mat> G = {Mat(4, 2), Mat(4, 3)};
  for (auto& m : G)
    for (double& v : m.a) v = 0.1 * rng.normal();

  auto run = [&]() {
    Parameters p = init_params(c);
    OptimState s = init_optim(p, 0.01, 0.9, 0.0005);
    for (int step = 0; step < 5; ++step) {
      ForwardCache cache = forward(c, p, x);
      Gradients g = backward(c, p, cache, G, {});
      sgd_step(p, g, s);
    }
    return p;
  };

  Parameters a = run();
  Parameters b = run();
  auto ta = tensor_list(a), tb = tensor_list(b);
  for (size_t i = 0; i < ta.size(); ++i) CHECK(*ta[i] == *tb[i]);
}
