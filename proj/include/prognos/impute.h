#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "prognos/learners.h"
#include "prognos/matrix.h"
#include "prognos/tabular.h"

namespace prognos {

enum class ImputeMethod { kMean, kMedian, kMostFrequent, kIterative, kAuto, kNone };
// Per-column models available to the iterative and auto methods.
enum class ColumnModel { kColumnMean, kRidgeLinear, kKnn, kTree };

std::string_view ToString(ImputeMethod m);
std::string_view ToString(ColumnModel m);
ImputeMethod ParseImputeMethod(std::string_view s);
ColumnModel ParseColumnModel(std::string_view s);

struct ImputerConfig {
  ImputeMethod method = ImputeMethod::kMean;
  size_t max_rounds = 10;
  double tol = 1e-3;  // on the standardized scale of each column
  std::vector<ColumnModel> candidate_models = {ColumnModel::kColumnMean, ColumnModel::kRidgeLinear,
                                               ColumnModel::kKnn, ColumnModel::kTree};

  // Throws BadParam.
  void Validate() const;
  bool operator==(const ImputerConfig&) const = default;
};

nlohmann::json ImputerConfigToJson(const ImputerConfig& c);
ImputerConfig ImputerConfigFromJson(const nlohmann::json& j);

// One fitted column model of the chained-equations sweep.
struct ImputeStep {
  size_t column = 0;  // index into the imputer's feature list
  ColumnModel model = ColumnModel::kColumnMean;
  std::vector<double> center;  // predictor standardization
  std::vector<double> scale;
  double fill = 0.0;                          // column_mean
  std::vector<std::vector<double>> linear;    // ridge: per output [intercept, w...]
  Matrix store;                               // knn: standardized predictors
  std::vector<double> store_y;                // knn: targets
  std::vector<Tree> trees;                    // tree: one per output
};

// Imputes feature-role columns only; other columns pass through untouched.
// Simple methods fill numeric columns with the mean / median / most frequent
// value; binary and categorical columns always take the mode (lowest level
// on ties). Iterative and auto initialize with mean / mode, then sweep the
// incomplete columns in descending missingness (ties by schema order),
// regressing each on all other features. Categorical targets use the
// argmax over per-level outputs.
class FittedImputer {
 public:
  FittedImputer() = default;

  // Throws AllMissingColumn, BadParam.
  static FittedImputer Fit(const Dataset& train, const ImputerConfig& cfg, uint64_t seed);

  // Replays the fitted sweep on `d`. Observed cells are never changed.
  // Throws SchemaMismatch.
  Dataset Transform(const Dataset& d) const;

  const ImputerConfig& config() const { return cfg_; }
  const Schema& features() const { return features_; }
  const std::vector<size_t>& visit_order() const { return order_; }
  size_t rounds_run() const { return rounds_run_; }
  bool converged() const { return converged_; }
  // Largest standardized change of the final sweep during fitting.
  double final_change() const { return final_change_; }
  // Model chosen for each imputed column in the final round, by name.
  std::vector<std::pair<std::string, ColumnModel>> SelectedModels() const;

  nlohmann::json ToJson() const;
  static FittedImputer FromJson(const nlohmann::json& j);

 private:
  std::vector<size_t> MapColumns(const Dataset& d) const;
  void Sweep(Matrix& work, const std::vector<std::vector<uint8_t>>& miss, double* change) const;

  ImputerConfig cfg_;
  Schema features_;
  std::vector<double> init_;    // mean or mode per feature
  std::vector<double> spread_;  // sd of observed values (1 when constant)
  std::vector<size_t> order_;
  std::vector<ImputeStep> steps_;  // final-round models in visit order
  size_t rounds_run_ = 0;
  bool converged_ = false;
  double final_change_ = 0.0;
};

inline FittedImputer FitImputer(const Dataset& train, const ImputerConfig& cfg, uint64_t seed) {
  return FittedImputer::Fit(train, cfg, seed);
}

// r completed copies of `train`, imputed with seeds base_seed .. base_seed + r - 1.
std::vector<Dataset> RepeatedImpute(const Dataset& train, const ImputerConfig& cfg, size_t r,
                                    uint64_t base_seed);

}  // namespace prognos
