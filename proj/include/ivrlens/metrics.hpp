#pragma once

#include <span>
#include <utility>
#include <vector>

namespace ivrlens::metrics {

// Mean of sensitivity and specificity at a fixed decision threshold
// (prediction is positive when score >= threshold). Throws when only one
// class is present.
double balanced_accuracy(std::span<const int> labels, std::span<const double> scores,
                         double threshold = 0.5);

// Fraction of positives among the top ceil(n * k / 100) instances ranked by
// score, ties broken by input order. k must lie in (0, 100].
double precision_at_k(std::span<const int> labels, std::span<const double> scores,
                      double k_percent = 5.0);

// Area under the ROC curve via rank statistics; ties earn half credit
// (Mann-Whitney concordance). Throws when only one class is present.
double auc(std::span<const int> labels, std::span<const double> scores);

// ROC curve points (fpr, tpr) from (0,0) to (1,1), one step per distinct
// score threshold.
std::vector<std::pair<double, double>> roc_points(std::span<const int> labels,
                                                  std::span<const double> scores);

}  // namespace ivrlens::metrics
