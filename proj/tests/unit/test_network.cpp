#include <doctest.h>

#include <cmath>
#include <numeric>

#include "gedfn/errors.hpp"
#include "gedfn/network.hpp"
#include "gedfn/trainer.hpp"
#include "support.hpp"

using namespace gedfn;

namespace {

AdjacencyMatrix identity_mask(int p) { return adjacency(FeatureGraph(p, {})); }

// Two separable Gaussian blobs in `p` dimensions.
Dataset blobs(int n, int p, std::uint64_t seed) {
  Dataset d;
  d.X = testing::random_matrix(n, p, seed, 0.5);
  d.y.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    d.y[i] = i % 2;
    d.X.row(i).array() += d.y[i] ? 1.5 : -1.5;
  }
  return d;
}

}  // namespace

TEST_SUITE("network") {

TEST_CASE("spec widths and validation") {
  auto spec = NetworkSpec::graph_embedded(identity_mask(5), {4, 3});
  CHECK(spec.widths() == std::vector<int>{5, 5, 4, 3, 2});
  CHECK(spec.layer_count() == 4);
  CHECK(NetworkSpec::dense(7, {3}).widths() == std::vector<int>{7, 3, 2});
  NetworkSpec bad = spec;
  bad.hidden[0] = 4;
  CHECK_THROWS_AS(bad.validate(), ContractError);
  NetworkSpec drop = NetworkSpec::dense(3, {2});
  drop.dropout_rate = 1.0;
  CHECK_THROWS_AS(drop.validate(), ContractError);
}

TEST_CASE("initialization is seeded") {
  Network net(NetworkSpec::dense(3, {2}));
  CHECK(net.init_params(5) == net.init_params(5));
  CHECK_FALSE(net.init_params(5) == net.init_params(6));
  for (const auto& l : net.init_params(5).layers) CHECK(l.bias.isZero(0.0));
}

TEST_CASE("identity mask zeroes off-diagonal weights at init") {
  Network net(NetworkSpec::graph_embedded(identity_mask(6), {3}));
  const auto w = net.init_params(1).layers[0].weight;
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j)
      if (i != j) CHECK(w(i, j) == 0.0);
  CHECK((w.diagonal().array() != 0.0).all());
}

TEST_CASE("init scale is sqrt(2 / fan-in)") {
  Network net(NetworkSpec::dense(5000, {64}));
  const Eigen::MatrixXd w = net.init_params(3).layers[0].weight;
  const double mean = w.mean();
  const double sd = std::sqrt((w.array() - mean).square().sum() / static_cast<double>(w.size() - 1));
  const double target = std::sqrt(2.0 / 5000.0);
  CHECK(std::abs(sd - target) < 0.1 * target);
}

TEST_CASE("masked pre-activation hand case") {
  Network net(NetworkSpec::graph_embedded(identity_mask(2), {}));
  auto params = net.init_params(0);
  params.layers[0].weight << 3, 5, 7, 11;
  params.layers[0].bias.setZero();
  Eigen::MatrixXd X(1, 2);
  X << 1, 2;
  Eigen::MatrixXd expected(1, 2);
  expected << 3, 22;
  CHECK(net.layer_preactivation(params, 0, X) == expected);
}

TEST_CASE("all-ones mask equals the dense layer") {
  Network masked(NetworkSpec::graph_embedded(AdjacencyMatrix::full(4), {3}));
  Network dense(NetworkSpec::dense(4, {4, 3}));
  auto params = dense.init_params(9);
  auto X = testing::random_matrix(6, 4, 2);
  CHECK(masked.forward(params, X).probabilities == dense.forward(params, X).probabilities);
}

TEST_CASE("equal logits give one half") {
  Network net(NetworkSpec::dense(3, {4}));
  auto params = net.init_params(1);
  params.layers[1].weight.setZero();
  params.layers[1].bias.setConstant(2.5);
  auto X = testing::random_matrix(5, 3, 1);
  CHECK((net.predict(params, X).array() == 0.5).all());
}

TEST_CASE("softmax rows sum to one") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto pr = testing::random_problem(seed, seed % 2 == 0);
    auto probs = pr.net.forward(pr.params, pr.X).probabilities;
    CHECK((probs.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
    CHECK((probs.array() > 0.0).all());
    CHECK((probs.array() < 1.0).all());
  }
}

TEST_CASE("cross-entropy examples") {
  std::vector<int> y{1, 0};
  Eigen::VectorXd half = Eigen::VectorXd::Constant(2, 0.5);
  CHECK(cross_entropy(half, y) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  Eigen::VectorXd p(2);
  p << 0.8, 0.3;
  const double expected = -(std::log(0.8) + std::log(0.7)) / 2.0;
  CHECK(cross_entropy(p, y) == doctest::Approx(expected).epsilon(1e-15));
  CHECK(cross_entropy(p, y) == doctest::Approx(0.2899).epsilon(1e-4));
  Eigen::VectorXd exact(2);
  exact << 1.0, 0.0;
  CHECK(cross_entropy(exact, y) < 3e-11);
  CHECK(cross_entropy(exact, y) > 0.0);
  Eigen::VectorXd wrong(2);
  wrong << 0.0, 1.0;
  CHECK(std::isfinite(cross_entropy(wrong, y)));
}

TEST_CASE("gradients match finite differences on a 6-feature network") {
  std::vector<Edge> e{{0, 1}, {1, 2}, {3, 4}, {2, 5}};
  Network net(NetworkSpec::graph_embedded(adjacency(FeatureGraph(6, e)), {5, 3}));
  auto params = net.init_params(4);
  for (auto& l : params.layers) l.bias.setConstant(0.05);
  auto X = testing::random_matrix(7, 6, 8);
  std::vector<int> y{0, 1, 1, 0, 1, 0, 1};
  REQUIRE(testing::kink_margin(net, params, X) > 1e-4);
  auto check = testing::gradient_check(net, params, X, y);
  CHECK(check.max_relative < 1e-5);
}

TEST_CASE("masked positions get exactly zero gradient") {
  std::vector<Edge> e{{0, 1}, {2, 3}};
  Network net(NetworkSpec::graph_embedded(adjacency(FeatureGraph(4, e)), {3}));
  auto params = net.init_params(1);
  auto X = testing::random_matrix(5, 4, 3);
  std::vector<int> y{0, 1, 0, 1, 1};
  auto g = net.backward(params, net.forward(params, X), y);
  const auto A = net.spec().mask->dense();
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      if (A(i, j) == 0.0) CHECK(g.layers[0].weight(i, j) == 0.0);
}

TEST_CASE("zero input and zero biases give zero weight gradients") {
  Network net(NetworkSpec::dense(4, {3, 2}));
  auto params = net.init_params(2);
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(3, 4);
  std::vector<int> y{1, 0, 1};
  auto g = net.backward(params, net.forward(params, X), y);
  for (const auto& l : g.layers) CHECK(l.weight.isZero(0.0));
}

TEST_CASE("sparse first layer agrees with the dense computation") {
  auto graph = generate_ba_graph(2500, 1, 5);
  Network sparse(NetworkSpec::graph_embedded(adjacency(graph), {4}));
  REQUIRE(sparse.sparse_first_layer());
  auto params = sparse.init_params(6);
  for (auto& l : params.layers) l.bias.setConstant(0.01);

  // Same model written as a dense network with W (.) A as its weight.
  Network dense(NetworkSpec::dense(2500, {2500, 4}));
  ModelParams dp = params;
  dp.layers[0].weight = sparse.effective_first_weight(params);
  dp.layers[0].values.resize(0);

  auto X = testing::random_matrix(6, 2500, 7);
  std::vector<int> y{0, 1, 1, 0, 0, 1};
  auto ts = sparse.forward(params, X);
  auto td = dense.forward(dp, X);
  CHECK((ts.probabilities - td.probabilities).cwiseAbs().maxCoeff() < 1e-13);

  auto gs = sparse.backward(params, ts, y);
  auto gd = dense.backward(dp, td, y);
  const auto& mask = *sparse.spec().mask;
  double worst = 0.0;
  for (int i = 0; i < mask.size(); ++i) {
    for (std::size_t k = mask.offsets()[i]; k < mask.offsets()[i + 1]; ++k) {
      worst = std::max(worst, std::abs(gs.layers[0].values(static_cast<Eigen::Index>(k)) -
                                       gd.layers[0].weight(i, mask.columns()[k])));
    }
  }
  CHECK(worst < 1e-14);
  CHECK((gs.layers[1].weight - gd.layers[1].weight).cwiseAbs().maxCoeff() < 1e-13);

  // Fan-out of a feature lists its graph neighbors and itself.
  const auto fan = sparse.first_layer_fanout(params, 0);
  CHECK(fan.size() == static_cast<std::size_t>(graph.degree(0) + 1));
}

TEST_CASE("Adam: zero gradient leaves parameters unchanged") {
  Network net(NetworkSpec::dense(3, {2}));
  auto params = net.init_params(1);
  const auto before = params;
  auto state = AdamState::zeros_like(params);
  adam_step(params, params.zeros_like(), state, AdamHyper{}, 1);
  CHECK(params == before);
  CHECK_THROWS_AS(adam_step(params, params.zeros_like(), state, AdamHyper{}, 0), ContractError);
}

TEST_CASE("Adam: first step moves every entry by about lr") {
  Network net(NetworkSpec::dense(3, {2}));
  auto params = net.init_params(1);
  const auto before = params;
  auto grads = params.zeros_like();
  for (auto& l : grads.layers) {
    l.weight.setConstant(0.37);
    l.bias.setConstant(-2.0);
  }
  AdamHyper hyper;
  hyper.lr = 1e-3;
  auto state = AdamState::zeros_like(params);
  adam_step(params, grads, state, hyper, 1);
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const Eigen::MatrixXd dw = before.layers[l].weight - params.layers[l].weight;
    const Eigen::VectorXd db = before.layers[l].bias - params.layers[l].bias;
    CHECK((dw.array() - hyper.lr).abs().maxCoeff() < 1e-7);
    CHECK((db.array() + hyper.lr).abs().maxCoeff() < 1e-7);
  }
}

TEST_CASE("Adam minimizes a scalar quadratic") {
  // f(w) = w^2 through a bias-only view: one layer whose bias is w.
  ModelParams params;
  params.layers.resize(1);
  params.layers[0].bias = Eigen::VectorXd::Constant(1, 1.0);
  auto state = AdamState::zeros_like(params);
  AdamHyper hyper;
  hyper.lr = 0.1;
  double previous = 1.0;
  for (std::size_t t = 1; t <= 10; ++t) {
    auto grads = params.zeros_like();
    grads.layers[0].bias(0) = 2.0 * params.layers[0].bias(0);
    adam_step(params, grads, state, hyper, t);
    const double w = std::abs(params.layers[0].bias(0));
    CHECK(w < previous);
    previous = w;
  }
}

TEST_CASE("L2 gradient skips biases") {
  Network net(NetworkSpec::dense(2, {2}));
  auto params = net.init_params(1);
  for (auto& l : params.layers) l.bias.setConstant(1.0);
  auto grads = params.zeros_like();
  add_l2_gradient(grads, params, 0.5);
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    CHECK(grads.layers[l].weight == 0.5 * params.layers[l].weight);
    CHECK(grads.layers[l].bias.isZero(0.0));
  }
}

TEST_CASE("full-batch loss decreases on a separable problem") {
  auto d = blobs(40, 2, 3);
  Network net(NetworkSpec::dense(2, {8, 4}));
  auto params = net.init_params(2);
  auto state = AdamState::zeros_like(params);
  AdamHyper hyper;
  hyper.lr = 1e-2;
  std::vector<double> losses;
  for (std::size_t t = 1; t <= 50; ++t) {
    auto trace = net.forward(params, d.X);
    losses.push_back(loss(trace, d.y));
    adam_step(params, net.backward(params, trace, d.y), state, hyper, t);
  }
  int decreases = 0;
  for (std::size_t k = 1; k < losses.size(); ++k) decreases += losses[k] < losses[k - 1];
  CHECK(decreases > 40);
  CHECK(losses.back() < 0.5 * losses.front());
}

TEST_CASE("dropout is seeded and inactive in eval mode") {
  auto spec = NetworkSpec::dense(5, {6, 4});
  spec.dropout_rate = 0.5;
  Network net(spec);
  auto params = net.init_params(3);
  auto X = testing::random_matrix(4, 5, 1);
  auto a = net.forward(params, X, Mode::train, 7);
  auto b = net.forward(params, X, Mode::train, 7);
  auto c = net.forward(params, X, Mode::train, 8);
  CHECK(a.probabilities == b.probabilities);
  CHECK(a.probabilities != c.probabilities);
  Network plain(NetworkSpec::dense(5, {6, 4}));
  CHECK(net.forward(params, X, Mode::eval).probabilities == plain.forward(params, X).probabilities);
}

}  // TEST_SUITE
