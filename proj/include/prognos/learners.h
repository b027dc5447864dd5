#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "prognos/matrix.h"
#include "prognos/rng.h"
#include "prognos/tabular.h"

namespace prognos {

enum class Family {
  kLogistic,
  kGaussianNb,
  kDecisionTree,
  kRandomForest,
  kGradientBoosting,
  kKnn,
  kLinearRidge,
  kCoxPh,
  kWeibullAft,
};

std::string_view ToString(Family f);
Family ParseFamily(std::string_view s);
const std::vector<Family>& AllFamilies();
bool FamilySupports(Family f, Task task);
std::vector<Family> FamiliesFor(Task task);

struct HyperparamRange {
  std::string name;
  double lo = 0.0;
  double hi = 0.0;
  bool log_scale = false;
  bool integer = false;
};

// Declared search ranges of each family, in a fixed order.
const std::vector<HyperparamRange>& HyperparamRanges(Family f);

struct LearnerConfig {
  Family family = Family::kLogistic;
  std::map<std::string, double> hyperparams;

  double Get(const std::string& name) const;
  bool operator==(const LearnerConfig&) const = default;
};

// Mid-range defaults for every declared hyperparameter.
LearnerConfig DefaultLearnerConfig(Family f);
// Throws IncompatibleTask or BadParam (unknown name, out of range,
// non-integer value for an integer parameter).
void ValidateLearnerConfig(const LearnerConfig& cfg, Task task);

nlohmann::json LearnerConfigToJson(const LearnerConfig& cfg);
LearnerConfig LearnerConfigFromJson(const nlohmann::json& j);

class FittedLearner {
 public:
  virtual ~FittedLearner() = default;

  Family family() const { return family_; }
  Task task() const { return task_; }
  size_t input_dim() const { return input_dim_; }

  // Classification: P(y = 1). Regression: the prediction. Survival: a
  // relative risk, higher meaning an earlier expected event.
  // Throws ShapeMismatch.
  std::vector<double> PredictScore(const Matrix& x) const;

  // P(event <= horizon | x). Throws NotSurvivalModel.
  std::vector<double> PredictEventProb(const Matrix& x, double horizon) const;

  // Training objective per iteration or boosting round, when the family
  // records one.
  virtual std::vector<double> TrainingLoss() const { return {}; }

  nlohmann::json ToJson() const;
  static std::shared_ptr<const FittedLearner> FromJson(const nlohmann::json& j);

 protected:
  FittedLearner(Family family, Task task, size_t input_dim)
      : family_(family), task_(task), input_dim_(input_dim) {}

  virtual std::vector<double> Score(const Matrix& x) const = 0;
  virtual std::vector<double> EventProb(const Matrix& x, double horizon) const;
  virtual nlohmann::json Params() const = 0;

 private:
  Family family_;
  Task task_;
  size_t input_dim_;
};

// Fits a learner. X must be complete. Throws IncompatibleTask, NoEvents,
// SingularUpdate, BadParam, DegenerateInput.
std::shared_ptr<const FittedLearner> FitLearner(const LearnerConfig& cfg, const Matrix& x,
                                                const Outcome& y, Task task, uint64_t seed);

// Training objective and its analytic gradient for the differentiable
// families. Parameter layouts:
//   logistic, linear_ridge: [intercept, beta_1..beta_p]
//   cox_ph:                 [beta_1..beta_p]
//   weibull_aft:            [mu, w_1..w_p, log_sigma]
// Objectives are per-sample means plus (l2 / 2) * |non-intercept coefs|^2:
//   logistic: mean log-loss; linear_ridge: half mean squared error;
//   cox_ph: negative Breslow partial log-likelihood; weibull_aft: negative
//   log-likelihood of log T = mu + w'x + sigma * (standard minimum-extreme
//   value noise).
// Throws NonDifferentiableFamily for the other families.
double LossValue(const LearnerConfig& cfg, std::span<const double> params, const Matrix& x,
                 const Outcome& y);
std::vector<double> LossGradient(const LearnerConfig& cfg, std::span<const double> params,
                                 const Matrix& x, const Outcome& y);
size_t ParameterCount(Family f, size_t n_features);

// Fitted parameters in the LossGradient layout.
std::vector<double> FittedParameters(const FittedLearner& f);

// ---------------------------------------------------------------------------
// Regression tree ensemble with bootstrap resampling; also the surrogate of
// the pipeline search.

struct TreeParams {
  size_t max_depth = 6;
  double min_leaf = 1.0;
  double feature_frac = 1.0;  // fraction of features drawn per split
};

// Flat node list. Leaves have feature == -1.
struct Tree {
  std::vector<int> feature;
  std::vector<double> threshold;
  std::vector<int> left;
  std::vector<int> right;
  std::vector<double> value;

  double Predict(std::span<const double> row) const;
  nlohmann::json ToJson() const;
  static Tree FromJson(const nlohmann::json& j);
};

// Greedy least-squares tree (equivalently Gini for 0/1 targets). Ties in
// gain keep the lowest feature index, then the lowest threshold.
// `weights` may be empty (all ones); rows with zero weight are ignored.
// `rng` is used only when feature_frac < 1.
Tree BuildTree(const Matrix& x, std::span<const double> target, std::span<const double> weights,
               const TreeParams& params, Rng* rng);

class RegressionForest {
 public:
  static RegressionForest Fit(const Matrix& x, std::span<const double> y, size_t n_trees,
                              const TreeParams& params, uint64_t seed);

  // Mean over trees and the across-tree standard deviation.
  void Predict(std::span<const double> row, double* mean, double* sd) const;

  const std::vector<Tree>& trees() const { return trees_; }

 private:
  std::vector<Tree> trees_;
};

}  // namespace prognos
