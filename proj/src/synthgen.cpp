#include "gedfn/synthgen.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "gedfn/errors.hpp"
#include "gedfn/rng.hpp"

namespace gedfn {

CovarianceMatrix covariance_from_distances(const DistanceMatrix& distances, double base) {
  if (!(base > 0.0 && base < 1.0)) {
    throw ParameterError("covariance base must lie in (0,1), got " + std::to_string(base));
  }
  const int p = distances.size();
  int max_hop = 0;
  for (int i = 0; i < p; ++i) {
    for (int j = 0; j < p; ++j) max_hop = std::max(max_hop, distances(i, j));
  }
  std::vector<double> power(static_cast<std::size_t>(max_hop) + 1);
  for (int k = 0; k <= max_hop; ++k) power[k] = std::pow(base, k);

  CovarianceMatrix sigma{Eigen::MatrixXd(p, p), base};
  for (int j = 0; j < p; ++j) {
    for (int i = 0; i < p; ++i) {
      sigma.entries(i, j) = distances.reachable(i, j) ? power[distances(i, j)] : 0.0;
    }
  }
  return sigma;
}

GaussianSampler make_sampler(const CovarianceMatrix& sigma) {
  const auto& s = sigma.entries;
  if (s.rows() != s.cols()) throw ContractError("make_sampler: covariance must be square");
  constexpr std::array<double, 6> ladder{0.0, 1e-8, 1e-6, 1e-4, 1e-2, 1.0};
  for (double jitter : ladder) {
    Eigen::MatrixXd adjusted = s;
    adjusted.diagonal().array() += jitter;
    Eigen::LLT<Eigen::Ref<Eigen::MatrixXd>> llt(adjusted);  // factors in place
    if (llt.info() == Eigen::Success) {
      adjusted.triangularView<Eigen::StrictlyUpper>().setZero();
      if (adjusted.allFinite()) return GaussianSampler(std::move(adjusted), jitter);
    }
  }
  throw GenerationError("make_sampler: covariance not factorizable with jitter <= 1");
}

Eigen::MatrixXd sample_features(const GaussianSampler& sampler, int n, std::uint64_t seed) {
  if (n < 1) throw ParameterError("sample_features: n must be >= 1");
  const int p = sampler.dim();
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd z(n, p);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) z(i, j) = normal(rng);
  }
  // Rows x_i = L z_i, i.e. X = Z L'.
  return z * sampler.factor().transpose().triangularView<Eigen::Upper>();
}

Outcome outcome_from_coefficients(const Eigen::MatrixXd& X, const Eigen::VectorXd& beta,
                                  double beta0, BalanceMode mode, double threshold) {
  if (beta.size() != X.cols()) throw ContractError("outcome: beta length must equal p");
  Outcome out;
  Eigen::VectorXd eta = (X * beta).array() + beta0;
  out.probability = (1.0 + (-eta.array()).exp()).inverse().matrix();
  out.spec.beta = beta;
  out.spec.beta0 = beta0;
  out.spec.mode = mode;

  if (mode == BalanceMode::median) {
    std::vector<double> sorted(out.probability.data(),
                               out.probability.data() + out.probability.size());
    std::sort(sorted.begin(), sorted.end());
    if (sorted.empty() || sorted.front() == sorted.back()) {
      throw LabelDegeneracyError("outcome: all outcome probabilities are equal");
    }
    const std::size_t n = sorted.size();
    out.spec.threshold = n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  } else {
    if (!(threshold > 0.0 && threshold < 1.0)) {
      throw ParameterError("outcome: threshold must lie in (0,1)");
    }
    out.spec.threshold = threshold;
  }
  out.y.resize(static_cast<std::size_t>(X.rows()));
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    out.y[i] = out.probability(i) > out.spec.threshold ? 1 : 0;
  }
  return out;
}

Outcome generate_outcome(const Eigen::MatrixXd& X, const PredictorSet& predictors,
                         std::uint64_t seed, BalanceMode mode, double threshold,
                         double flip_probability) {
  if (!(flip_probability >= 0.0 && flip_probability <= 1.0)) {
    throw ParameterError("outcome: flip probability must lie in [0,1]");
  }
  Rng rng(seed);
  std::uniform_real_distribution<double> magnitude(0.1, 0.2);
  std::bernoulli_distribution flip(flip_probability);
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(X.cols());
  for (int v : predictors.all()) {
    if (v < 0 || v >= X.cols()) throw ContractError("outcome: predictor index out of range");
    double b = magnitude(rng);
    beta(v) = flip(rng) ? -b : b;
  }
  double beta0 = 0.0;
  if (mode == BalanceMode::fixed) beta0 = std::uniform_real_distribution<double>(-0.5, 0.5)(rng);
  return outcome_from_coefficients(X, beta, beta0, mode, threshold);
}

SyntheticDataset generate_dataset(const SimulationConfig& config, std::uint64_t seed,
                                  const FeatureGraph* graph) {
  SyntheticDataset ds;
  ds.seed = seed;
  ds.graph = graph ? *graph : generate_ba_graph(config.p, config.ba_m, derive_seed(seed, {1}));
  if (ds.graph.vertex_count() != config.p) {
    throw ParameterError("generate_dataset: supplied graph has wrong vertex count");
  }
  {
    auto sigma = covariance_from_distances(all_pairs_distances(ds.graph), config.covariance_base);
    auto sampler = make_sampler(sigma);
    ds.jitter = sampler.jitter();
    ds.X = sample_features(sampler, config.n, derive_seed(seed, {2}));
  }

  for (int draw = 0;; ++draw) {
    try {
      ds.predictors = select_predictors(ds.graph, config.p0, config.n_cores,
                                        config.singleton_fraction, derive_seed(seed, {3, std::uint64_t(draw)}));
      ds.core_draws = draw + 1;
      break;
    } catch (const GenerationError&) {
      if (draw + 1 >= config.max_core_draws) throw;
    }
  }

  if (config.p0 == 0) {
    std::vector<int> y(static_cast<std::size_t>(config.n), 0);
    std::fill(y.begin(), y.begin() + config.n / 2, 1);
    Rng rng(derive_seed(seed, {4}));
    std::shuffle(y.begin(), y.end(), rng);
    ds.y = std::move(y);
    ds.outcome.beta = Eigen::VectorXd::Zero(config.p);
    ds.outcome.mode = config.balance;
    return ds;
  }
  auto outcome = generate_outcome(ds.X, ds.predictors, derive_seed(seed, {4}), config.balance,
                                  config.threshold, config.flip_probability);
  ds.y = std::move(outcome.y);
  ds.outcome = std::move(outcome.spec);
  return ds;
}

}  // namespace gedfn
