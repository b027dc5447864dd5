#pragma once

#include <span>
#include <vector>

#include "json.hpp"
#include "prognos/impute.h"
#include "prognos/learners.h"
#include "prognos/preprocess.h"
#include "prognos/rng.h"
#include "prognos/tabular.h"

namespace prognos {

struct PipelineConfig {
  ImputerConfig imputer;
  StageConfig stage;
  LearnerConfig learner;

  bool operator==(const PipelineConfig&) const = default;
};

nlohmann::json PipelineConfigToJson(const PipelineConfig& c);
PipelineConfig PipelineConfigFromJson(const nlohmann::json& j);

// Sampled real values carry six significant digits, so a config survives
// encode/decode exactly.
double QuantizeReal(double v);

// Conditional pipeline space. Encoded layout, in order: one-hot imputer,
// one-hot scaler, one-hot dimred, variance threshold, PCA components,
// one-hot family, then every family's hyperparameters (family order, names
// ascending). Continuous dimensions are normalized to [0, 1] (log scale
// where declared); dimensions of inactive branches are fixed at 0.5.
class SearchSpace {
 public:
  std::vector<ImputeMethod> imputers;
  std::vector<Scaler> scalers;
  std::vector<DimRed> dimreds;
  std::vector<Family> families;
  size_t feature_dim = 1;           // width after one-hot; bounds PCA components
  double max_variance_threshold = 0.1;

  // Every family compatible with the task, every scaler and reducer. The
  // imputer choices are the five fitting methods when the data has missing
  // cells and `mean` alone (a no-op) otherwise.
  static SearchSpace Default(Task task, size_t feature_dim, bool has_missing);

  // Throws EmptySpace when a categorical dimension has no choices.
  void Validate() const;
  // Throws BadParam / IncompatibleTask when `c` lies outside the space.
  void Check(const PipelineConfig& c, Task task) const;

  size_t EncodedDim() const;
  std::vector<double> Encode(const PipelineConfig& c) const;
  PipelineConfig Decode(std::span<const double> v) const;
  PipelineConfig Sample(Rng& rng) const;

  nlohmann::json ToJson() const;
  static SearchSpace FromJson(const nlohmann::json& j);

  bool operator==(const SearchSpace&) const = default;
};

}  // namespace prognos
