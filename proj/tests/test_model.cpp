#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "vrlab/errors.hpp"
#include "vrlab/model.hpp"
#include "vrlab/rng.hpp"

using namespace vrlab;
using namespace vrlab::problems;
using vrlab::testing::fd_gradient;
using vrlab::testing::vec_rel_error;

namespace {

Example random_example(std::size_t dim, std::size_t classes, rng::Stream& s) {
  Example ex;
  ex.shape = {dim, 1, 1};
  ex.label = static_cast<int>(s.next_below(classes));
  ex.features.resize(dim);
  for (double& f : ex.features) f = s.next_normal();
  return ex;
}

ParamVector random_params(const Model& model, rng::Stream& s) {
  ParamVector w(model.parameter_count());
  for (double& x : w) x = 0.5 * s.next_normal();
  return w;
}

}  // namespace

TEST_CASE("parameter_count follows the layer layout") {
  Model logistic;
  logistic.architecture = Architecture::kLogistic;
  logistic.layer_sizes = {4, 1};
  CHECK(logistic.parameter_count() == 5);
  logistic.bias = false;
  CHECK(logistic.parameter_count() == 4);

  Model mlp;
  mlp.architecture = Architecture::kMlp;
  mlp.layer_sizes = {4, 3, 2};
  CHECK(mlp.parameter_count() == 4 * 3 + 3 + 3 * 2 + 2);
  mlp.batch_norm = true;
  CHECK(mlp.parameter_count() == 4 * 3 + 3 + 2 * 3 + 3 * 2 + 2);
  CHECK(mlp.bn_feature_count() == 3);
}

TEST_CASE("model validation rejects malformed configurations") {
  Model m;
  m.layer_sizes = {4};
  CHECK_THROWS_AS(m.validate(), InvalidArgument);
  m.layer_sizes = {4, 0, 2};
  CHECK_THROWS_AS(m.validate(), InvalidArgument);
  m.layer_sizes = {4, 3, 2};
  m.architecture = Architecture::kLogistic;
  CHECK_THROWS_AS(m.validate(), InvalidArgument);
  m.architecture = Architecture::kLeastSquares;
  m.layer_sizes = {4, 2};
  m.batch_norm = true;
  CHECK_THROWS_AS(m.validate(), InvalidArgument);
}

TEST_CASE("binary logistic gradient at zero weights is minus half x") {
  Model m;
  m.architecture = Architecture::kLogistic;
  m.layer_sizes = {3, 1};
  const BnState bn = BnState::initial(m);

  Example ex;
  ex.shape = {3, 1, 1};
  ex.label = 1;
  ex.features = {2.0, -1.0, 0.5};

  const ParamVector w(m.parameter_count(), 0.0);
  const GradResult r = batch_loss_grad(m, w, {ex}, BnMode::kEval, bn);
  CHECK(r.loss == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(r.grad[0] == doctest::Approx(-1.0));    // -0.5 * 2.0
  CHECK(r.grad[1] == doctest::Approx(0.5));     // -0.5 * -1.0
  CHECK(r.grad[2] == doctest::Approx(-0.25));   // -0.5 * 0.5
  CHECK(r.grad[3] == doctest::Approx(-0.5));    // bias
}

TEST_CASE("softmax loss at zero weights is log K") {
  Model m;
  m.architecture = Architecture::kLogistic;
  m.layer_sizes = {4, 5};
  m.bias = true;
  const BnState bn = BnState::initial(m);
  rng::Stream s(1);
  std::vector<Example> batch;
  for (int i = 0; i < 3; ++i) batch.push_back(random_example(4, 5, s));
  const ParamVector w(m.parameter_count(), 0.0);
  CHECK(batch_loss(m, w, batch, BnMode::kEval, bn) ==
        doctest::Approx(std::log(5.0)).epsilon(1e-14));
}

TEST_CASE("least squares gradient vanishes at an interpolating solution") {
  // Scalar weight w; every target equals w* so the residual is w - w*.
  Model m = testing::scalar_model();
  const BnState bn = BnState::initial(m);
  Dataset data = testing::scalar_dataset({1.5, 1.5, 1.5});
  const std::vector<Example> batch(data.examples.begin(), data.examples.end());

  const GradResult at_opt = batch_loss_grad(m, {1.5}, batch, BnMode::kEval, bn);
  CHECK(at_opt.loss == 0.0);
  CHECK(at_opt.grad[0] == 0.0);

  const GradResult away = batch_loss_grad(m, {2.5}, batch, BnMode::kEval, bn);
  CHECK(away.grad[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(away.loss == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("train-mode batch norm zeroes a constant batch") {
  Model m;
  m.architecture = Architecture::kMlp;
  m.layer_sizes = {3, 4, 2};
  m.batch_norm = true;
  const BnState bn = BnState::initial(m);

  Example ex;
  ex.shape = {3, 1, 1};
  ex.label = 0;
  ex.features = {1.0, 2.0, 3.0};
  const std::vector<Example> batch{ex, ex};

  rng::Stream s(77);
  const ParamVector w = random_params(m, s);
  const GradResult r = batch_loss_grad(m, w, batch, BnMode::kTrain, bn);

  // Identical examples have zero batch variance, so normalized activations
  // collapse to beta and the logits see only the output bias.
  REQUIRE(r.bn_stats.var.size() == 4);
  for (double v : r.bn_stats.var) CHECK(v == 0.0);

  Model plain = m;
  plain.batch_norm = false;
  // Build the equivalent no-BN evaluation: beta feeds a network whose first
  // layer is zero. Cheaper: the loss must be invariant to the input features.
  Example other = ex;
  other.features = {-5.0, 0.0, 9.0};
  const double loss_a = batch_loss(m, w, {ex, ex}, BnMode::kTrain, bn);
  const double loss_b = batch_loss(m, w, {other, other}, BnMode::kTrain, bn);
  CHECK(loss_a == doctest::Approx(loss_b).epsilon(1e-12));
}

TEST_CASE("eval-mode batch norm uses the running statistics") {
  Model m;
  m.architecture = Architecture::kMlp;
  m.layer_sizes = {2, 3, 2};
  m.batch_norm = true;
  BnState bn = BnState::initial(m);

  rng::Stream s(5);
  const ParamVector w = random_params(m, s);
  Example ex = random_example(2, 2, s);

  const double before = batch_loss(m, w, {ex}, BnMode::kEval, bn);
  bn.running_mean.assign(3, 0.7);
  bn.running_var.assign(3, 2.0);
  const double after = batch_loss(m, w, {ex}, BnMode::kEval, bn);
  CHECK(before != after);

  // Train mode ignores the running statistics entirely.
  const std::vector<Example> batch{ex, random_example(2, 2, s)};
  const double train_default =
      batch_loss(m, w, batch, BnMode::kTrain, BnState::initial(m));
  const double train_shifted = batch_loss(m, w, batch, BnMode::kTrain, bn);
  CHECK(train_default == train_shifted);
}

TEST_CASE("bn running statistics update with the 0.9/0.1 recursion") {
  Model m;
  m.architecture = Architecture::kMlp;
  m.layer_sizes = {2, 2, 2};
  m.batch_norm = true;
  BnState bn = BnState::initial(m);
  BnStats stats;
  stats.mean = {1.0, -1.0};
  stats.var = {2.0, 4.0};
  bn.apply_update(stats);
  CHECK(bn.running_mean[0] == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(bn.running_mean[1] == doctest::Approx(-0.1).epsilon(1e-15));
  CHECK(bn.running_var[0] == doctest::Approx(0.9 * 1.0 + 0.1 * 2.0).epsilon(1e-15));
  CHECK(bn.running_var[1] == doctest::Approx(0.9 * 1.0 + 0.1 * 4.0).epsilon(1e-15));

  BnStats wrong;
  wrong.mean = {0.0};
  wrong.var = {1.0};
  CHECK_THROWS_AS(bn.apply_update(wrong), InvalidArgument);
}

TEST_CASE("gradient oracles never touch the running statistics") {
  Model m;
  m.architecture = Architecture::kMlp;
  m.layer_sizes = {3, 4, 2};
  m.batch_norm = true;
  const BnState bn = BnState::initial(m);
  const std::vector<double> mean_before = bn.running_mean;
  const std::vector<double> var_before = bn.running_var;

  rng::Stream s(3);
  const ParamVector w = random_params(m, s);
  std::vector<Example> batch;
  for (int i = 0; i < 4; ++i) batch.push_back(random_example(3, 2, s));
  (void)batch_loss_grad(m, w, batch, BnMode::kTrain, bn);
  (void)batch_loss(m, w, batch, BnMode::kTrain, bn);
  CHECK(bn.running_mean == mean_before);
  CHECK(bn.running_var == var_before);
}

TEST_CASE("weight decay adds the quadratic penalty and its gradient") {
  Model base;
  base.architecture = Architecture::kMlp;
  base.layer_sizes = {3, 4, 2};
  Model decayed = base;
  decayed.weight_decay = 0.01;
  const BnState bn = BnState::initial(base);

  rng::Stream s(11);
  const ParamVector w = random_params(base, s);
  std::vector<Example> batch;
  for (int i = 0; i < 3; ++i) batch.push_back(random_example(3, 2, s));

  const GradResult plain = batch_loss_grad(base, w, batch, BnMode::kEval, bn);
  const GradResult with = batch_loss_grad(decayed, w, batch, BnMode::kEval, bn);
  CHECK(with.loss ==
        doctest::Approx(plain.loss + 0.005 * squared_norm(w)).epsilon(1e-14));
  for (std::size_t i = 0; i < w.size(); ++i)
    CHECK(with.grad[i] ==
          doctest::Approx(plain.grad[i] + 0.01 * w[i]).epsilon(1e-13));
}

TEST_CASE("analytic gradients match central finite differences") {
  struct Config {
    const char* name;
    Model model;
    BnMode mode;
    std::size_t classes;
  };
  std::vector<Config> configs;

  {
    Model m;
    m.architecture = Architecture::kLogistic;
    m.layer_sizes = {3, 1};
    configs.push_back({"logistic binary", m, BnMode::kEval, 2});
  }
  {
    Model m;
    m.architecture = Architecture::kLeastSquares;
    m.layer_sizes = {3, 1};
    m.bias = false;
    configs.push_back({"least squares sign target", m, BnMode::kEval, 2});
  }
  {
    Model m;
    m.architecture = Architecture::kLeastSquares;
    m.layer_sizes = {4, 3};
    m.weight_decay = 0.01;
    configs.push_back({"least squares one-hot", m, BnMode::kEval, 3});
  }
  {
    Model m;
    m.architecture = Architecture::kMlp;
    m.layer_sizes = {4, 6, 3};
    configs.push_back({"relu mlp", m, BnMode::kEval, 3});
  }
  {
    Model m;
    m.architecture = Architecture::kMlp;
    m.activation = Activation::kElu;
    m.layer_sizes = {4, 6, 5, 3};
    m.bias = false;
    m.weight_decay = 0.001;
    configs.push_back({"deep elu mlp", m, BnMode::kEval, 3});
  }
  {
    Model m;
    m.architecture = Architecture::kMlp;
    m.layer_sizes = {4, 5, 2};
    m.batch_norm = true;
    configs.push_back({"bn mlp train mode", m, BnMode::kTrain, 2});
  }
  {
    Model m;
    m.architecture = Architecture::kMlp;
    m.activation = Activation::kElu;
    m.layer_sizes = {4, 5, 2};
    m.batch_norm = true;
    m.bias = false;
    configs.push_back({"bn elu mlp train mode", m, BnMode::kTrain, 2});
  }
  {
    Model m;
    m.architecture = Architecture::kMlp;
    m.layer_sizes = {4, 5, 2};
    m.batch_norm = true;
    configs.push_back({"bn mlp eval mode", m, BnMode::kEval, 2});
  }

  for (const Config& cfg : configs) {
    CAPTURE(cfg.name);
    rng::Stream s(rng::split(2024, static_cast<std::uint64_t>(&cfg - configs.data())));
    BnState bn = BnState::initial(cfg.model);
    for (double& v : bn.running_mean) v = 0.2 * s.next_normal();
    for (double& v : bn.running_var) v = 1.0 + 0.5 * s.next_unit();

    for (int trial = 0; trial < 3; ++trial) {
      std::vector<Example> batch;
      for (int i = 0; i < 5; ++i)
        batch.push_back(random_example(cfg.model.input_dim(), cfg.classes, s));
      const ParamVector w = random_params(cfg.model, s);
      const GradResult r = batch_loss_grad(cfg.model, w, batch, cfg.mode, bn);
      const ParamVector fd = fd_gradient(cfg.model, w, batch, cfg.mode, bn);
      CHECK(vec_rel_error(r.grad, fd) < 1e-5);
    }
  }
}

TEST_CASE("initial parameters are seeded and structured") {
  Model m;
  m.architecture = Architecture::kMlp;
  m.layer_sizes = {4, 3, 2};
  m.batch_norm = true;

  const ParamVector a = initial_params(m, 7);
  const ParamVector b = initial_params(m, 7);
  const ParamVector c = initial_params(m, 8);
  CHECK(a == b);
  CHECK(a != c);
  REQUIRE(a.size() == m.parameter_count());

  // Layout: W1 (12), b1 (3), gamma (3), beta (3), W2 (6), b2 (2).
  for (std::size_t i = 12; i < 15; ++i) CHECK(a[i] == 0.0);   // b1
  for (std::size_t i = 15; i < 18; ++i) CHECK(a[i] == 1.0);   // gamma
  for (std::size_t i = 18; i < 21; ++i) CHECK(a[i] == 0.0);   // beta
  for (std::size_t i = 27; i < 29; ++i) CHECK(a[i] == 0.0);   // b2
  double weight_norm = 0.0;
  for (std::size_t i = 0; i < 12; ++i) weight_norm += a[i] * a[i];
  CHECK(weight_norm > 0.0);
}

TEST_CASE("predictions use argmax and the sign rule") {
  Model multi;
  multi.architecture = Architecture::kLogistic;
  multi.layer_sizes = {2, 3};
  multi.bias = false;
  const BnState bn_multi = BnState::initial(multi);
  // Rows of W send feature j to logit j: identity on the first two logits.
  const ParamVector w_multi{1, 0, 0, 1, 0, 0};
  Example ex;
  ex.shape = {2, 1, 1};
  ex.features = {0.2, 3.0};
  ex.label = 0;
  CHECK(batch_predictions(multi, w_multi, {ex}, BnMode::kEval, bn_multi) ==
        std::vector<int>{1});

  Model binary;
  binary.architecture = Architecture::kLogistic;
  binary.layer_sizes = {2, 1};
  binary.bias = false;
  const BnState bn_bin = BnState::initial(binary);
  const ParamVector w_bin{1.0, -1.0};
  Example pos = ex;          // logit 0.2 - 3.0 < 0
  CHECK(batch_predictions(binary, w_bin, {pos}, BnMode::kEval, bn_bin) ==
        std::vector<int>{0});
  pos.features = {3.0, 0.2};  // logit > 0
  CHECK(batch_predictions(binary, w_bin, {pos}, BnMode::kEval, bn_bin) ==
        std::vector<int>{1});
}

TEST_CASE("oracle input checking") {
  Model m;
  m.architecture = Architecture::kMlp;
  m.layer_sizes = {3, 4, 2};
  const BnState bn = BnState::initial(m);
  rng::Stream s(2);
  const ParamVector w = random_params(m, s);
  Example ex = random_example(3, 2, s);

  CHECK_THROWS_AS(
      batch_loss_grad(m, ParamVector(3, 0.0), {ex}, BnMode::kEval, bn),
      InvalidArgument);
  CHECK_THROWS_AS(batch_loss_grad(m, w, {}, BnMode::kEval, bn),
                  InvalidArgument);

  Example bad = ex;
  bad.features.pop_back();
  CHECK_THROWS_AS(batch_loss_grad(m, w, {bad}, BnMode::kEval, bn),
                  InvalidArgument);

  ParamVector w_bad = w;
  w_bad[0] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(batch_loss_grad(m, w_bad, {ex}, BnMode::kEval, bn),
                  NumericError);
}
