#include "gedfn/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

#include "gedfn/errors.hpp"

namespace gedfn {

double auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw EvaluationError("auc: scores and labels differ in length");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Sum of mid-ranks (1-based) of the positives.
  double rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) {
        rank_sum += mid_rank;
        ++n_pos;
      } else if (labels[order[k]] != 0) {
        throw EvaluationError("auc: labels must be 0 or 1");
      }
    }
    i = j;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw EvaluationError("auc: both classes must be present");
  const double pos = static_cast<double>(n_pos);
  const double u = rank_sum - pos * (pos + 1.0) / 2.0;
  return u / (pos * static_cast<double>(n_neg));
}

EvalResult evaluate(std::span<const double> positive_probability, std::span<const int> labels) {
  EvalResult r;
  r.auc = auc(positive_probability, labels);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    (labels[i] == 1 ? r.n_pos : r.n_neg)++;
    if ((positive_probability[i] > 0.5 ? 1 : 0) == labels[i]) ++correct;
  }
  r.accuracy = static_cast<double>(correct) / static_cast<double>(labels.size());
  return r;
}

}  // namespace gedfn
