#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "prognos/impute.h"
#include "prognos/learners.h"
#include "prognos/preprocess.h"
#include "prognos/space.h"
#include "prognos/tabular.h"

namespace prognos {

// Maps the feature columns of a complete dataset to a numeric matrix.
// Numeric and binary columns pass through; categorical columns expand to
// one indicator per level.
class FeatureEncoder {
 public:
  FeatureEncoder() = default;
  explicit FeatureEncoder(Schema features) : features_(std::move(features)) {}

  const Schema& features() const { return features_; }
  size_t width() const;
  std::vector<std::string> OutputNames() const;
  // Output column range [first, last) of feature `i`.
  std::pair<size_t, size_t> Span(size_t i) const;

  // Columns are matched by name. Throws SchemaMismatch, or DegenerateInput
  // when a feature cell is still missing.
  Matrix Encode(const Dataset& d) const;

 private:
  Schema features_;
};

// Observers of every fit inside a pipeline, for leakage audits.
struct FitAudit {
  std::function<void(const Dataset&)> on_imputer_fit;
  std::function<void(const Matrix&)> on_stage_fit;
  std::function<void(const Matrix&)> on_learner_fit;
};

// imputer -> one-hot encoding -> scaler / reducer -> learner, fitted end to end.
class FittedPipeline {
 public:
  FittedPipeline() = default;

  // `train` must carry the outcome columns for `task`.
  static FittedPipeline Fit(const PipelineConfig& cfg, const Dataset& train, const TaskSpec& task,
                            uint64_t seed, const FitAudit* audit = nullptr);

  // Learner input for `d` (imputed, encoded, transformed).
  Matrix Features(const Dataset& d) const;
  std::vector<double> PredictScore(const Dataset& d) const;
  // Throws NotSurvivalModel.
  std::vector<double> PredictEventProb(const Dataset& d, double horizon) const;
  // Probability of the positive class, the regression prediction, or the
  // event probability at the task horizon.
  std::vector<double> PredictRisk(const Dataset& d) const;

  const PipelineConfig& config() const { return cfg_; }
  const TaskSpec& task() const { return task_; }
  const FittedImputer& imputer() const { return imputer_; }
  const FeatureEncoder& encoder() const { return encoder_; }
  const FittedStage& stage() const { return stage_; }
  const FittedLearner& learner() const { return *learner_; }

  nlohmann::json ToJson() const;
  static FittedPipeline FromJson(const nlohmann::json& j);

 private:
  PipelineConfig cfg_;
  TaskSpec task_;
  FittedImputer imputer_;
  FeatureEncoder encoder_;
  FittedStage stage_;
  std::shared_ptr<const FittedLearner> learner_;
};

}  // namespace prognos
