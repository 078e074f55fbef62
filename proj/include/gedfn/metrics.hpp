#pragma once

#include <span>

namespace gedfn {

struct EvalResult {
  double auc = 0.5;
  double accuracy = 0.0;  // threshold 0.5 on the class-1 probability
  int n_pos = 0;
  int n_neg = 0;
};

/// ROC AUC as the Mann-Whitney statistic: the fraction of (positive,
/// negative) pairs ranked correctly, ties counting one half. O(n log n).
/// Throws EvaluationError unless both classes are present.
double auc(std::span<const double> scores, std::span<const int> labels);

EvalResult evaluate(std::span<const double> positive_probability, std::span<const int> labels);

}  // namespace gedfn
