#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "prognos/pipeline.h"
#include "prognos/space.h"
#include "prognos/tabular.h"

namespace prognos {

inline constexpr const char* kFormatVersion = "1";
inline constexpr const char* kEngineVersion = "prognos 1.0.0";

struct TrialRecord {
  size_t trial_index = 0;
  PipelineConfig config;
  std::vector<std::vector<double>> fold_scores;  // imputations x folds
  double mean_score = 0.0;  // over all cells
  double sd_score = 0.0;    // population sd of the per-imputation means
  double wall_time = 0.0;   // seconds; not serialized
  uint64_t seed = 0;
  bool failed = false;
  std::string error;
};

nlohmann::json TrialToJson(const TrialRecord& t);
TrialRecord TrialFromJson(const nlohmann::json& j);

// Worst value of a primary metric, recorded for failed fits.
double FailureScore(Metric m);

// Score of held-out predictions under the task's primary metric. Survival
// pipelines are scored on their event probability at the horizon.
double PrimaryScore(const TaskSpec& task, std::span<const double> risk, const Outcome& y);

struct EvalOptions {
  size_t threads = 0;  // 0: hardware concurrency; ignored when auditing
  const FitAudit* audit = nullptr;
};

// For imputation i (seed + i) and each fold, fits the whole pipeline on the
// fold's training rows and scores the held-out rows. Failures are recorded
// in the returned trial, never thrown.
TrialRecord EvaluatePipeline(const PipelineConfig& c, const Dataset& d, const TaskSpec& t,
                             const FoldPlan& folds, size_t r, uint64_t seed,
                             const EvalOptions& opts = {});

struct SearchOptions {
  size_t n_init = 10;
  size_t n_candidates = 500;
  size_t surrogate_trees = 100;
  size_t threads = 0;
};

nlohmann::json SearchOptionsToJson(const SearchOptions& o);
SearchOptions SearchOptionsFromJson(const nlohmann::json& j);

// Expected improvement of a maximization problem; max(0, mu - best) when
// sd == 0.
double ExpectedImprovement(double mu, double sd, double best);

// Random configuration while the history is shorter than `n_init`; afterwards
// the candidate maximizing expected improvement under a bootstrap forest
// surrogate (argmax of the surrogate mean when every EI is zero). Ties go
// to the earliest sampled candidate.
PipelineConfig ProposeNext(const std::vector<TrialRecord>& history, const SearchSpace& space,
                           uint64_t seed, const SearchOptions& opts = {});

struct DataFingerprint {
  size_t rows = 0;
  size_t cols = 0;
  uint64_t content_hash = 0;

  static DataFingerprint Of(const Dataset& d);
  bool operator==(const DataFingerprint&) const = default;
};

struct EnsembleSummary {
  std::vector<size_t> members;  // trial indices
  std::vector<double> weights;
  double temperature = 0.1;
};

struct StudyReport {
  TaskSpec task;
  SearchSpace space;
  SearchOptions options;
  std::vector<TrialRecord> trials;
  size_t budget = 0;
  size_t folds = 0;
  size_t imputations = 0;
  uint64_t seed = 0;
  DataFingerprint data;
  std::optional<EnsembleSummary> ensemble;

  // Index of the best non-failed trial (highest mean, earliest on ties).
  std::optional<size_t> BestTrial() const;
  // Non-failed trials ordered by mean score, descending (index on ties).
  std::vector<size_t> Leaderboard() const;
};

nlohmann::json ReportToJson(const StudyReport& r);
StudyReport ReportFromJson(const nlohmann::json& j);

// Runs exactly `budget` trials. Fold plan and every per-trial seed derive
// from `seed`.
StudyReport RunStudy(const Dataset& d, const TaskSpec& t, const SearchSpace& space, size_t budget,
                     size_t k, size_t r, uint64_t seed, const SearchOptions& opts = {});

}  // namespace prognos
