#include "gedfn/importance.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <string>
#include <thread>

#include "gedfn/errors.hpp"

namespace gedfn {

std::vector<int> ImportanceReport::ranks() const {
  std::vector<int> r(ranking.size());
  for (std::size_t k = 0; k < ranking.size(); ++k) r[ranking[k]] = static_cast<int>(k) + 1;
  return r;
}

namespace {

// Base quantities shared by every perturbation.
struct BasePass {
  Eigen::MatrixXd first_pre;   // mu of layer 0
  Eigen::MatrixXd first_act;   // ReLU(mu) of layer 0 when it is hidden
  Eigen::MatrixXd second_pre;  // mu of layer 1 when it exists
  Eigen::VectorXd positive;    // p^
};

// Class-1 probabilities with column j of X scaled by (1 + delta). Only the
// first-layer units fed by feature j change, so the second layer is updated
// incrementally and the rest of the network is re-run.
Eigen::VectorXd perturbed_positive(const Network& net, const ModelParams& params,
                                   const Eigen::MatrixXd& X, const BasePass& base, int j,
                                   double delta) {
  const auto fanout = net.first_layer_fanout(params, j);
  const Eigen::VectorXd shift = delta * X.col(j);
  if (net.spec().layer_count() == 1) {
    Eigen::MatrixXd pre = base.first_pre;
    for (const auto& [unit, w] : fanout) pre.col(unit) += w * shift;
    return net.positive_from(params, 0, std::move(pre));
  }
  Eigen::MatrixXd second = base.second_pre;
  const auto& w2 = params.layers[1].weight;
  for (const auto& [unit, w] : fanout) {
    Eigen::VectorXd changed = (base.first_pre.col(unit) + w * shift).cwiseMax(0.0);
    changed -= base.first_act.col(unit);
    second.noalias() += changed * w2.row(unit);
  }
  return net.positive_from(params, 1, std::move(second));
}

}  // namespace

ImportanceReport importance_scores(const Network& network, const ModelParams& params,
                                   const Eigen::MatrixXd& X_eval,
                                   const ImportanceOptions& options) {
  if (X_eval.rows() == 0) throw ContractError("importance: evaluation set is empty");
  if (X_eval.cols() != network.spec().input_dim) {
    throw ContractError("importance: evaluation set has the wrong number of features");
  }
  if (!(options.delta > 0.0)) throw ParameterError("importance: delta must be positive");
  network.check_params(params);

  const int p = static_cast<int>(X_eval.cols());
  const auto n = X_eval.rows();
  BasePass base;
  base.first_pre = network.layer_preactivation(params, 0, X_eval);
  if (network.spec().layer_count() > 1) {
    base.first_act = base.first_pre.cwiseMax(0.0);
    base.second_pre = network.layer_preactivation(params, 1, base.first_act);
    base.positive = network.positive_from(params, 1, base.second_pre);
  } else {
    base.positive = network.positive_from(params, 0, base.first_pre);
  }

  ImportanceReport report;
  report.delta = options.delta;
  report.n_eval = static_cast<int>(n);
  report.scores.assign(static_cast<std::size_t>(p), 0.0);

  std::atomic<int> next{0};
  std::atomic<int> failed{-1};
  auto work = [&] {
    for (int j; (j = next.fetch_add(1)) < p;) {
      if (failed.load() >= 0) return;
      const Eigen::VectorXd perturbed =
          perturbed_positive(network, params, X_eval, base, j, options.delta);
      if (!perturbed.allFinite()) {
        int expected = -1;
        failed.compare_exchange_strong(expected, j);
        return;
      }
      double sum = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double denom = std::max(std::abs(options.delta * X_eval(i, j)), options.epsilon_floor);
        sum += (perturbed(i) - base.positive(i)) / denom;
      }
      report.scores[j] = sum / static_cast<double>(n);
    }
  };
  const int workers = std::clamp(options.workers, 1, std::max(1, p));
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  if (failed.load() >= 0) {
    throw ScoringError("importance: non-finite prediction when perturbing feature " +
                       std::to_string(failed.load()));
  }

  report.abs_scores.resize(report.scores.size());
  std::transform(report.scores.begin(), report.scores.end(), report.abs_scores.begin(),
                 [](double s) { return std::abs(s); });
  report.ranking.resize(static_cast<std::size_t>(p));
  std::iota(report.ranking.begin(), report.ranking.end(), 0);
  std::stable_sort(report.ranking.begin(), report.ranking.end(), [&](int a, int b) {
    return report.abs_scores[a] > report.abs_scores[b];
  });
  return report;
}

std::vector<int> top_fraction(const ImportanceReport& report, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw ParameterError("top_fraction: fraction must lie in (0,1]");
  }
  const auto p = report.ranking.size();
  // Guard against 0.05 * 100 = 5.000000000000001 style round-up.
  const double raw = fraction * static_cast<double>(p);
  auto k = static_cast<std::size_t>(std::ceil(raw - 1e-9 * std::max(1.0, raw)));
  k = std::min(k, p);
  return {report.ranking.begin(), report.ranking.begin() + static_cast<std::ptrdiff_t>(k)};
}

}  // namespace gedfn
