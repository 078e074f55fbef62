#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "gedfn/graph.hpp"

namespace gedfn {

/// Sigma_ij = base^D_ij for reachable pairs, 0 otherwise.
struct CovarianceMatrix {
  Eigen::MatrixXd entries;
  double base = 0.7;
};

CovarianceMatrix covariance_from_distances(const DistanceMatrix& distances, double base = 0.7);

/// Lower Cholesky factor of Sigma + jitter * I.
class GaussianSampler {
 public:
  GaussianSampler(Eigen::MatrixXd factor, double jitter)
      : factor_(std::move(factor)), jitter_(jitter) {}

  int dim() const noexcept { return static_cast<int>(factor_.rows()); }
  const Eigen::MatrixXd& factor() const noexcept { return factor_; }
  /// Diagonal jitter that had to be added for the factorization to succeed.
  double jitter() const noexcept { return jitter_; }

 private:
  Eigen::MatrixXd factor_;
  double jitter_;
};

/// Tries jitter 0, 1e-8, 1e-6, 1e-4, 1e-2, 1 in turn; throws GenerationError
/// if none yields a Cholesky factor.
GaussianSampler make_sampler(const CovarianceMatrix& sigma);

/// n i.i.d. rows drawn from N(0, Sigma + jitter * I).
Eigen::MatrixXd sample_features(const GaussianSampler& sampler, int n, std::uint64_t seed);

enum class BalanceMode { median, fixed };

struct OutcomeSpec {
  Eigen::VectorXd beta;  // length p, zero off the predictor set
  double beta0 = 0.0;
  double threshold = 0.5;
  BalanceMode mode = BalanceMode::median;
};

struct Outcome {
  std::vector<int> y;
  Eigen::VectorXd probability;  // logit^-1(x_i' beta + beta0)
  OutcomeSpec spec;
};

/// Labels from fixed coefficients: y_i = 1 iff p_i > t, where t is the
/// median of p under BalanceMode::median and `threshold` otherwise.
/// Throws LabelDegeneracyError in median mode when every p_i is equal.
Outcome outcome_from_coefficients(const Eigen::MatrixXd& X, const Eigen::VectorXd& beta,
                                  double beta0, BalanceMode mode, double threshold = 0.5);

/// Samples |beta_j| ~ U(0.1, 0.2) for every predictor, flips each sign with
/// probability `flip_probability`, and draws beta0 ~ U(-0.5, 0.5) in fixed mode (0 under
/// median balancing), then labels via outcome_from_coefficients.
Outcome generate_outcome(const Eigen::MatrixXd& X, const PredictorSet& predictors,
                         std::uint64_t seed, BalanceMode mode = BalanceMode::median,
                         double threshold = 0.5, double flip_probability = 0.5);

struct SimulationConfig {
  int p = 5000;
  int n = 400;
  int p0 = 40;
  int n_cores = 2;
  double singleton_fraction = 0.0;
  int ba_m = 1;
  double covariance_base = 0.7;
  BalanceMode balance = BalanceMode::median;
  double threshold = 0.5;
  double flip_probability = 0.5;
  /// Core redraws attempted when the drawn cores cannot fill the clique quota.
  int max_core_draws = 32;
};

struct SyntheticDataset {
  Eigen::MatrixXd X;
  std::vector<int> y;
  FeatureGraph graph;
  PredictorSet predictors;
  OutcomeSpec outcome;
  double jitter = 0.0;
  int core_draws = 1;
  std::uint64_t seed = 0;

  int n() const noexcept { return static_cast<int>(X.rows()); }
  int p() const noexcept { return static_cast<int>(X.cols()); }
};

/// Full pipeline: BA graph -> distances -> covariance -> Gaussian features ->
/// predictor selection -> logistic labels. When `graph` is given it is reused
/// instead of generating a new one. With p0 = 0 there is no signal; labels
/// are then a seeded balanced random assignment.
SyntheticDataset generate_dataset(const SimulationConfig& config, std::uint64_t seed,
                                  const FeatureGraph* graph = nullptr);

}  // namespace gedfn
