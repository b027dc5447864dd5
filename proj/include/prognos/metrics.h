#pragma once

#include <span>
#include <string>
#include <vector>

namespace prognos {

struct MetricResult {
  std::string name;
  double value = 0.0;
  size_t n_effective = 0;  // pairs or samples actually used
};

// (concordant + 0.5 * tied) / (positives * negatives). Throws OneClassOnly.
MetricResult Auroc(std::span<const double> scores, std::span<const double> labels);

// Mean squared error of probabilities against 0/1 labels. Throws BadParam
// for probabilities outside [0, 1].
MetricResult Brier(std::span<const double> probs, std::span<const double> labels);

// Harrell's C. (i, j) is comparable iff t_i < t_j and subject i had the
// event; tied risks score one half. Throws NoComparablePairs.
MetricResult ConcordanceIndex(std::span<const double> risks, std::span<const double> times,
                              std::span<const int> events);

// Brier score at a horizon. Subjects censored before the horizon are
// dropped (no censoring weights); n_effective counts the rest.
MetricResult SurvivalBrier(std::span<const double> event_probs, std::span<const double> times,
                           std::span<const int> events, double horizon);

// 1 - SSE / SST. Throws DegenerateInput for a constant target.
MetricResult RSquared(std::span<const double> predictions, std::span<const double> targets);

struct NetBenefitCurve {
  std::vector<double> thresholds;
  std::vector<double> model_nb;
  std::vector<double> treat_all_nb;
  std::vector<double> treat_none_nb;
};

// Default decision-curve grid: 0.01, 0.02, ..., 0.50.
std::vector<double> DefaultNetBenefitThresholds();
std::vector<double> ThresholdGrid(double tmin, double tmax, double step);

// Positive prediction means prob >= t. Throws BadThreshold unless the
// thresholds are strictly ascending inside (0, 1).
NetBenefitCurve NetBenefit(std::span<const double> probs, std::span<const double> labels,
                           std::span<const double> thresholds);

// Standardized mean difference (group 1 minus group 0) with pooled sample
// standard deviation. Throws DegenerateGroups.
double CohensD(std::span<const double> values, std::span<const int> group);

}  // namespace prognos
