#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "prognos/ensemble.h"
#include "prognos/metrics.h"
#include "prognos/study.h"
#include "prognos/tabular.h"

namespace prognos {

enum class ExplainMethod { kEffectSize, kPermutation, kShapley };

std::string_view ToString(ExplainMethod m);
ExplainMethod ParseExplainMethod(std::string_view s);

struct Explanation {
  ExplainMethod method = ExplainMethod::kEffectSize;
  std::vector<std::string> features;
  std::vector<double> values;
  std::vector<double> std_errors;               // shapley: Monte-Carlo standard errors
  std::vector<std::vector<double>> per_repeat;  // permutation: repeats x features
  size_t n_samples = 0;
  uint64_t seed = 0;
  std::string metric;
  double baseline = 0.0;         // permutation: unpermuted metric
  double prediction = 0.0;       // shapley: f(x)
  double expected_value = 0.0;   // shapley: mean prediction over the background
  double total_std_error = 0.0;  // shapley: standard error of the summed attributions

  nlohmann::json ToJson() const;
};

// Risk of every row (class probability, regression value, or survival event
// probability at the horizon).
using RiskFunction = std::function<std::vector<double>(const Dataset&)>;

// |Cohen's d| of every encoded feature (categorical levels as indicators)
// between group 1 and group 0, observed cells only, sorted descending
// (schema order on ties). Features without variance score 0. Throws
// DegenerateGroups when either group has fewer than two rows.
Explanation EffectSizeRanking(const Dataset& d, std::span<const int> group);

// Outcome grouping used for rankings: the binary target, the survival event
// indicator, or a regression target above its median.
std::vector<int> OutcomeGroups(const Dataset& d, const TaskSpec& task);
// 1 for rows whose risk is above the median risk.
std::vector<int> RiskQuantileGroups(std::span<const double> risk);

// Mean drop of the task's primary metric when one feature column (values and
// missingness together) is shuffled. Repeat j of feature c uses a generator
// seeded from (seed, j, c), so results do not depend on the repeat count.
Explanation PermutationImportance(const RiskFunction& f, const Dataset& d, const TaskSpec& task,
                                  size_t repeats, uint64_t seed);
Explanation PermutationImportance(const EnsembleModel& model, const Dataset& d, size_t repeats,
                                  uint64_t seed);

// Monte-Carlo permutation Shapley values of `x` (one row) against
// `background`. Sample s pairs a random feature order with background row
// order[s mod n] of a seeded shuffle. Throws EmptyBackground, BadParam.
Explanation SampledShapley(const RiskFunction& f, const Dataset& x, const Dataset& background,
                           size_t n_samples, uint64_t seed);
Explanation SampledShapley(const EnsembleModel& model, const Dataset& x,
                           const Dataset& background, size_t n_samples, uint64_t seed);

struct VoiPoint {
  double threshold = 0.0;
  std::vector<std::string> features;
  double score = 0.0;  // best cross-validated mean score of the restricted study
};

struct VoiCurve {
  Explanation ranking;
  double full_score = 0.0;  // study on every feature
  std::vector<VoiPoint> points;

  nlohmann::json ToJson() const;
};

struct VoiOptions {
  size_t budget = 25;
  size_t folds = 3;
  size_t imputations = 1;
  SearchOptions search;
};

// Ranks features once by effect size, then runs one reduced study per
// threshold on the features whose |d| reaches it (a categorical column is
// kept when any of its levels does). Throws BadParam unless the thresholds
// descend, EmptyFeatureSet when a threshold keeps nothing.
VoiCurve ValueOfInformation(const Dataset& d, const TaskSpec& t, std::span<const double> thresholds,
                            uint64_t seed, const VoiOptions& opts = {});

struct SubgroupGroup {
  std::string label;
  size_t n = 0;
  std::vector<MetricResult> metrics;
  std::optional<Explanation> effect_sizes;
};

struct SubgroupResult {
  std::string feature;
  double split_value = 0.0;
  size_t excluded_missing = 0;  // rows without a value for the split feature
  SubgroupGroup below;          // feature < split_value
  SubgroupGroup at_or_above;    // feature >= split_value

  nlohmann::json ToJson() const;
};

// Task metrics (auroc + brier, r_squared, or c_index + survival brier) in
// each half of a split. Throws DegenerateSplit when a half cannot be scored.
SubgroupResult SubgroupReport(const EnsembleModel& model, const Dataset& d,
                              const std::string& feature, double split_value,
                              bool effect_sizes = false);

// Decision curve of the model's risk. Survival outcomes become "event by the
// horizon"; subjects censored earlier are dropped. Throws IncompatibleTask
// for regression.
NetBenefitCurve DecisionCurve(const EnsembleModel& model, const Dataset& d,
                              std::span<const double> thresholds);

}  // namespace prognos
