#pragma once

#include <span>
#include <vector>

#include "json.hpp"
#include "prognos/pipeline.h"
#include "prognos/study.h"

namespace prognos {

struct EnsemblePrediction {
  std::vector<double> score;       // weighted member PredictScore
  std::vector<double> event_prob;  // survival: weighted event probability at the horizon
  std::vector<double> risk;        // event_prob for survival, score otherwise
};

// Convex combination of pipelines refitted on the full training data.
struct EnsembleModel {
  TaskSpec task;
  std::vector<FittedPipeline> members;
  std::vector<double> weights;
  std::vector<size_t> trial_indices;
  double temperature = 0.1;

  EnsemblePrediction Predict(const Dataset& d) const;
  // Shorthand for Predict(d).risk.
  std::vector<double> PredictRisk(const Dataset& d) const;
  // Feature schema shared by all members.
  const Schema& features() const;

  nlohmann::json ToJson() const;
  static EnsembleModel FromJson(const nlohmann::json& j);
};

// softmax(score / temperature), computed with the maximum subtracted.
std::vector<double> SoftmaxWeights(std::span<const double> scores, double temperature);

// Top-m distinct non-failed configurations by mean score, each refitted on
// `d` with its trial seed. Throws TooFewTrials, BadParam.
EnsembleModel BuildEnsemble(const StudyReport& report, const Dataset& d, size_t m,
                            double temperature = 0.1);

inline EnsemblePrediction PredictEnsemble(const EnsembleModel& e, const Dataset& d) {
  return e.Predict(d);
}

EnsembleSummary Summarize(const EnsembleModel& e);

}  // namespace prognos
