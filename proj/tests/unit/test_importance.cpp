#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "gedfn/errors.hpp"
#include "gedfn/importance.hpp"
#include "gedfn/trainer.hpp"
#include "support.hpp"

using namespace gedfn;

namespace {

// Full forward pass for every perturbed feature.
std::vector<double> brute_force_scores(const Network& net, const ModelParams& params,
                                       const Eigen::MatrixXd& X, double delta, double floor = 1e-6) {
  const Eigen::VectorXd base = net.predict(params, X);
  std::vector<double> s(static_cast<std::size_t>(X.cols()));
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    Eigen::MatrixXd Xp = X;
    Xp.col(j) *= 1.0 + delta;
    const Eigen::VectorXd p = net.predict(params, Xp);
    double sum = 0.0;
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      sum += (p(i) - base(i)) / std::max(std::abs(delta * X(i, j)), floor);
    }
    s[static_cast<std::size_t>(j)] = sum / static_cast<double>(X.rows());
  }
  return s;
}

// p -> 2 -> 2 network computing logit^-1(x' beta): the hidden pair holds
// ReLU(z) and ReLU(-z), and the output logit difference is their difference.
std::pair<Network, ModelParams> logistic_network(const Eigen::VectorXd& beta) {
  const int p = static_cast<int>(beta.size());
  Network net(NetworkSpec::dense(p, {2}));
  auto params = net.init_params(0);
  params.layers[0].weight.col(0) = beta;
  params.layers[0].weight.col(1) = -beta;
  params.layers[0].bias.setZero();
  params.layers[1].weight << 0, 1, 0, -1;
  params.layers[1].bias.setZero();
  return {std::move(net), std::move(params)};
}

}  // namespace

TEST_SUITE("importance") {

TEST_CASE("logistic surrogate matches the analytic derivative") {
  Eigen::VectorXd beta(5);
  beta << 0.15, -0.12, 0.18, 0.0, -0.2;
  auto [net, params] = logistic_network(beta);
  auto X = testing::random_matrix(40, 5, 3);
  const Eigen::VectorXd p = net.predict(params, X);
  const Eigen::VectorXd z = X * beta;
  REQUIRE((p.array() - (1.0 / (1.0 + (-z.array()).exp()))).abs().maxCoeff() < 1e-14);

  ImportanceOptions opts;
  opts.delta = 1e-4;
  auto report = importance_scores(net, params, X, opts);
  for (int j = 0; j < 5; ++j) {
    double expected = 0.0;
    for (int i = 0; i < 40; ++i) {
      const double step = opts.delta * X(i, j);
      expected += beta(j) * p(i) * (1.0 - p(i)) * step / std::max(std::abs(step), 1e-6);
    }
    expected /= 40.0;
    CHECK(report.scores[j] == doctest::Approx(expected).epsilon(1e-3));
  }
  CHECK(report.scores[3] == 0.0);
}

TEST_CASE("incremental scores equal full forward passes") {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    auto pr = testing::random_problem(seed, seed % 2 == 0);
    auto report = importance_scores(pr.net, pr.params, pr.X);
    auto oracle = brute_force_scores(pr.net, pr.params, pr.X, 0.05);
    for (std::size_t j = 0; j < oracle.size(); ++j) {
      CHECK(std::abs(report.scores[j] - oracle[j]) < 1e-9 * std::max(1.0, std::abs(oracle[j])));
    }
  }
}

TEST_CASE("incremental scores equal full passes on a sparse masked layer") {
  auto graph = generate_ba_graph(2100, 1, 2);
  Network net(NetworkSpec::graph_embedded(adjacency(graph), {8, 4}));
  REQUIRE(net.sparse_first_layer());
  auto params = net.init_params(3);
  for (auto& l : params.layers) l.bias.setConstant(0.02);
  auto X = testing::random_matrix(5, 2100, 4);
  auto report = importance_scores(net, params, X);
  auto oracle = brute_force_scores(net, params, X, 0.05);
  double worst = 0.0;
  for (std::size_t j = 0; j < oracle.size(); ++j) worst = std::max(worst, std::abs(report.scores[j] - oracle[j]));
  CHECK(worst < 1e-9);
}

TEST_CASE("a feature without outgoing weights scores zero") {
  std::vector<Edge> e{{0, 1}, {1, 2}, {2, 3}};
  Network net(NetworkSpec::graph_embedded(adjacency(FeatureGraph(4, e)), {3}));
  auto params = net.init_params(1);
  params.layers[0].weight.row(2).setZero();
  auto X = testing::random_matrix(10, 4, 2);
  auto report = importance_scores(net, params, X);
  CHECK(report.scores[2] == 0.0);
  CHECK(report.ranks()[2] == 4);
}

TEST_CASE("ranking does not depend on feature order") {
  auto pr = testing::random_problem(21, false);
  const int p = pr.net.spec().input_dim;
  std::vector<int> perm(static_cast<std::size_t>(p));
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(4);
  std::shuffle(perm.begin(), perm.end(), rng);
  // Feature j moves to position perm[j].
  Eigen::MatrixXd Xp(pr.X.rows(), p);
  ModelParams pp = pr.params;
  for (int j = 0; j < p; ++j) {
    Xp.col(perm[j]) = pr.X.col(j);
    pp.layers[0].weight.row(perm[j]) = pr.params.layers[0].weight.row(j);
  }
  auto a = importance_scores(pr.net, pr.params, pr.X);
  auto b = importance_scores(pr.net, pp, Xp);
  const auto ra = a.ranks();
  const auto rb = b.ranks();
  for (int j = 0; j < p; ++j) {
    CHECK(b.scores[perm[j]] == doctest::Approx(a.scores[j]).epsilon(1e-10));
    CHECK(rb[perm[j]] == ra[j]);
  }
}

TEST_CASE("large scores keep their sign when delta is halved") {
  SimulationConfig sim;
  sim.p = 300;
  sim.n = 200;
  sim.p0 = 20;
  sim.n_cores = 1;
  auto ds = generate_dataset(sim, 5);
  Network net(NetworkSpec::graph_embedded(adjacency(ds.graph)));
  TrainConfig cfg;
  cfg.epochs = 30;
  cfg.lr = 1e-3;
  cfg.seed = 1;
  auto trained = train_model(net, Dataset{ds.X, ds.y}, cfg);
  ImportanceOptions half;
  half.delta = 0.025;
  auto a = importance_scores(net, trained.params, ds.X);
  auto b = importance_scores(net, trained.params, ds.X, half);
  std::vector<double> sorted = a.abs_scores;
  std::sort(sorted.begin(), sorted.end());
  const double cut = sorted[static_cast<std::size_t>(0.9 * static_cast<double>(sorted.size()))];
  int checked = 0;
  for (std::size_t j = 0; j < a.scores.size(); ++j) {
    if (a.abs_scores[j] > cut) {
      CHECK((a.scores[j] > 0) == (b.scores[j] > 0));
      ++checked;
    }
  }
  CHECK(checked >= 20);
}

TEST_CASE("worker count does not change scores") {
  auto pr = testing::random_problem(8, true);
  ImportanceOptions many;
  many.workers = 3;
  auto a = importance_scores(pr.net, pr.params, pr.X);
  auto b = importance_scores(pr.net, pr.params, pr.X, many);
  CHECK(a.scores == b.scores);
  CHECK(a.ranking == b.ranking);
}

TEST_CASE("non-finite predictions name the feature") {
  auto pr = testing::random_problem(2, false);
  pr.params.layers.back().bias(0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_WITH_AS(importance_scores(pr.net, pr.params, pr.X),
                       doctest::Contains("feature 0"), ScoringError);
  ImportanceOptions bad;
  bad.delta = 0.0;
  auto ok = testing::random_problem(2, false);
  CHECK_THROWS_AS(importance_scores(ok.net, ok.params, ok.X, bad), ParameterError);
}

TEST_CASE("top fraction sizes") {
  ImportanceReport r;
  auto fill = [&](int p) {
    r.scores.assign(static_cast<std::size_t>(p), 0.0);
    r.ranking.resize(static_cast<std::size_t>(p));
    std::iota(r.ranking.begin(), r.ranking.end(), 0);
  };
  fill(100);
  CHECK(top_fraction(r, 0.05).size() == 5);
  CHECK(top_fraction(r, 1.0).size() == 100);
  CHECK(top_fraction(r, 1.0) == r.ranking);
  fill(9211);
  CHECK(top_fraction(r, 0.05).size() == 461);
}

TEST_CASE("default perturbation is five percent") {
  CHECK(ImportanceOptions{}.delta == 0.05);
}

}  // TEST_SUITE
