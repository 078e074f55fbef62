#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "gedfn/graph.hpp"
#include "gedfn/network.hpp"

namespace testing {

/// Fresh directory under the system temp path, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("gedfn-" + tag + "-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream(path, std::ios::binary) << text;
}

/// Erdos-Renyi graph with edge probability `q`.
inline gedfn::FeatureGraph random_graph(int p, double q, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(q);
  std::vector<gedfn::Edge> edges;
  for (int i = 0; i < p; ++i) {
    for (int j = i + 1; j < p; ++j) {
      if (coin(rng)) edges.emplace_back(i, j);
    }
  }
  return gedfn::FeatureGraph(p, edges);
}

inline Eigen::MatrixXd random_matrix(int rows, int cols, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, scale);
  Eigen::MatrixXd m(rows, cols);
  for (int j = 0; j < cols; ++j) {
    for (int i = 0; i < rows; ++i) m(i, j) = normal(rng);
  }
  return m;
}

struct GradientCheck {
  double max_relative = 0.0;
  double max_absolute = 0.0;
  int entries = 0;
};

/// Analytic gradients of the eval-mode loss against central differences
/// with step `h`. Relative error is |a - f| / max(|a|, |f|, floor).
inline GradientCheck gradient_check(const gedfn::Network& net, const gedfn::ModelParams& params,
                                    const Eigen::MatrixXd& X, const std::vector<int>& y,
                                    double h = 1e-5, double floor = 1e-6) {
  using gedfn::Mode;
  const auto trace = net.forward(params, X, Mode::eval);
  const auto grads = net.backward(params, trace, y);
  auto loss_at = [&](const gedfn::ModelParams& q) { return gedfn::loss(net.forward(q, X, Mode::eval), y); };

  GradientCheck out;
  auto compare = [&](double analytic, double numeric) {
    const double abs_err = std::abs(analytic - numeric);
    const double scale = std::max({std::abs(analytic), std::abs(numeric), floor});
    out.max_absolute = std::max(out.max_absolute, abs_err);
    out.max_relative = std::max(out.max_relative, abs_err / scale);
    ++out.entries;
  };
  auto probe = [&](auto member, std::size_t layer, Eigen::Index k) {
    gedfn::ModelParams plus = params, minus = params;
    (plus.layers[layer].*member)(k) += h;
    (minus.layers[layer].*member)(k) -= h;
    const double numeric = (loss_at(plus) - loss_at(minus)) / (2.0 * h);
    compare((grads.layers[layer].*member)(k), numeric);
  };
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    for (Eigen::Index k = 0; k < params.layers[l].weight.size(); ++k) probe(&gedfn::LayerParams::weight, l, k);
    for (Eigen::Index k = 0; k < params.layers[l].values.size(); ++k) probe(&gedfn::LayerParams::values, l, k);
    for (Eigen::Index k = 0; k < params.layers[l].bias.size(); ++k) probe(&gedfn::LayerParams::bias, l, k);
  }
  return out;
}

/// Smallest |pre-activation| over every hidden layer.
inline double kink_margin(const gedfn::Network& net, const gedfn::ModelParams& params,
                          const Eigen::MatrixXd& X) {
  const auto trace = net.forward(params, X, gedfn::Mode::eval);
  double margin = std::numeric_limits<double>::infinity();
  for (std::size_t l = 0; l + 1 < trace.pre.size(); ++l) {
    margin = std::min(margin, trace.pre[l].cwiseAbs().minCoeff());
  }
  return margin;
}

/// A random small classifier problem: p <= 10, widths <= 8, optionally
/// masked by a random graph, with random data and biases.
struct SmallProblem {
  gedfn::Network net;
  gedfn::ModelParams params;
  Eigen::MatrixXd X;
  std::vector<int> y;
};

inline SmallProblem random_problem(std::uint64_t seed, bool masked) {
  std::mt19937_64 rng(seed);
  auto uniform_int = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  const int p = uniform_int(2, 10);
  const int depth = uniform_int(1, 3);
  std::vector<int> rest;
  for (int k = 0; k < depth; ++k) rest.push_back(uniform_int(1, 8));
  gedfn::NetworkSpec spec;
  if (masked) {
    spec = gedfn::NetworkSpec::graph_embedded(gedfn::adjacency(random_graph(p, 0.3, seed ^ 0x9e37u)),
                                              std::vector<int>(rest.begin() + 1, rest.end()));
  } else {
    spec = gedfn::NetworkSpec::dense(p, rest);
  }
  gedfn::Network net(spec);
  auto params = net.init_params(seed + 1);
  std::normal_distribution<double> normal(0.0, 0.3);
  for (auto& l : params.layers)
    for (Eigen::Index k = 0; k < l.bias.size(); ++k) l.bias(k) = normal(rng);
  const int n = uniform_int(3, 8);
  Eigen::MatrixXd X = random_matrix(n, p, seed + 2);
  std::vector<int> y(static_cast<std::size_t>(n));
  for (auto& v : y) v = uniform_int(0, 1);
  return {std::move(net), std::move(params), std::move(X), std::move(y)};
}

}  // namespace testing
