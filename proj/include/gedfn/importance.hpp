#pragma once

#include <vector>

#include <Eigen/Dense>

#include "gedfn/network.hpp"

namespace gedfn {

struct ImportanceReport {
  std::vector<double> scores;      // signed s_j
  std::vector<double> abs_scores;  // |s_j|
  std::vector<int> ranking;        // by |s_j| descending, lower index first on ties
  double delta = 0.05;
  int n_eval = 0;

  int feature_count() const noexcept { return static_cast<int>(scores.size()); }
  /// 1-based rank of every feature.
  std::vector<int> ranks() const;
};

struct ImportanceOptions {
  double delta = 0.05;
  double epsilon_floor = 1e-6;
  int workers = 1;
};

/// Perturbation sensitivity of the class-1 probability: every feature j is
/// scaled by (1 + delta) on all evaluation rows with the others fixed, and
///   s_j = (1/n) sum_i (p~_ij - p^_i) / max(|delta x_ij|, epsilon_floor).
/// Throws ScoringError naming the feature if a perturbed prediction is not
/// finite.
ImportanceReport importance_scores(const Network& network, const ModelParams& params,
                                   const Eigen::MatrixXd& X_eval,
                                   const ImportanceOptions& options = {});

/// First ceil(fraction * p) entries of the ranking.
std::vector<int> top_fraction(const ImportanceReport& report, double fraction);

}  // namespace gedfn
