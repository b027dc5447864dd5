#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "internal.h"
#include "prognos/error.h"
#include "prognos/learners.h"

namespace prognos {

namespace li = learners_internal;

std::string_view ToString(Family f) {
  switch (f) {
    case Family::kLogistic: return "logistic";
    case Family::kGaussianNb: return "gaussian_nb";
    case Family::kDecisionTree: return "decision_tree";
    case Family::kRandomForest: return "random_forest";
    case Family::kGradientBoosting: return "gradient_boosting";
    case Family::kKnn: return "knn";
    case Family::kLinearRidge: return "linear_ridge";
    case Family::kCoxPh: return "cox_ph";
    case Family::kWeibullAft: return "weibull_aft";
  }
  return "logistic";
}

const std::vector<Family>& AllFamilies() {
  static const std::vector<Family> all = {
      Family::kLogistic,    Family::kGaussianNb, Family::kDecisionTree,
      Family::kRandomForest, Family::kGradientBoosting, Family::kKnn,
      Family::kLinearRidge, Family::kCoxPh,      Family::kWeibullAft};
  return all;
}

Family ParseFamily(std::string_view s) {
  for (Family f : AllFamilies()) {
    if (ToString(f) == s) return f;
  }
  throw BadParam("unknown learner family '" + std::string(s) + "'");
}

bool FamilySupports(Family f, Task task) {
  switch (f) {
    case Family::kCoxPh:
    case Family::kWeibullAft:
      return task == Task::kSurvival;
    case Family::kLogistic:
    case Family::kGaussianNb:
      return task == Task::kClassification;
    case Family::kLinearRidge:
      return task == Task::kRegression;
    case Family::kKnn:
    case Family::kDecisionTree:
    case Family::kRandomForest:
    case Family::kGradientBoosting:
      return task != Task::kSurvival;
  }
  return false;
}

std::vector<Family> FamiliesFor(Task task) {
  std::vector<Family> out;
  for (Family f : AllFamilies()) {
    if (FamilySupports(f, task)) out.push_back(f);
  }
  return out;
}

const std::vector<HyperparamRange>& HyperparamRanges(Family f) {
  static const std::vector<HyperparamRange> logistic = {{"iters", 50, 500, false, true},
                                                        {"l2", 1e-4, 10, true, false}};
  static const std::vector<HyperparamRange> nb = {};
  static const std::vector<HyperparamRange> tree = {{"max_depth", 1, 12, false, true},
                                                    {"min_leaf", 1, 50, false, true}};
  static const std::vector<HyperparamRange> forest = {{"feature_frac", 0.3, 1.0, false, false},
                                                      {"max_depth", 2, 12, false, true},
                                                      {"n_trees", 10, 300, false, true}};
  static const std::vector<HyperparamRange> boosting = {{"max_depth", 1, 6, false, true},
                                                        {"rate", 0.01, 0.5, true, false},
                                                        {"rounds", 10, 300, false, true}};
  static const std::vector<HyperparamRange> knn = {{"k", 1, 50, false, true}};
  static const std::vector<HyperparamRange> ridge = {{"l2", 1e-4, 10, true, false}};
  static const std::vector<HyperparamRange> survival = {{"l2", 0, 10, false, false}};
  switch (f) {
    case Family::kLogistic: return logistic;
    case Family::kGaussianNb: return nb;
    case Family::kDecisionTree: return tree;
    case Family::kRandomForest: return forest;
    case Family::kGradientBoosting: return boosting;
    case Family::kKnn: return knn;
    case Family::kLinearRidge: return ridge;
    case Family::kCoxPh:
    case Family::kWeibullAft: return survival;
  }
  return nb;
}

double LearnerConfig::Get(const std::string& name) const {
  const auto it = hyperparams.find(name);
  if (it == hyperparams.end()) {
    throw BadParam(std::string(ToString(family)) + " has no hyperparameter '" + name + "'");
  }
  return it->second;
}

LearnerConfig DefaultLearnerConfig(Family f) {
  LearnerConfig cfg{f, {}};
  for (const auto& r : HyperparamRanges(f)) {
    double v = r.log_scale ? std::sqrt(r.lo * r.hi) : 0.5 * (r.lo + r.hi);
    if (r.integer) v = std::round(v);
    cfg.hyperparams[r.name] = v;
  }
  if (f == Family::kCoxPh || f == Family::kWeibullAft) cfg.hyperparams["l2"] = 0.0;
  return cfg;
}

void ValidateLearnerConfig(const LearnerConfig& cfg, Task task) {
  if (!FamilySupports(cfg.family, task)) {
    throw IncompatibleTask(std::string(ToString(cfg.family)) + " does not support " +
                           std::string(ToString(task)));
  }
  const auto& ranges = HyperparamRanges(cfg.family);
  for (const auto& [name, value] : cfg.hyperparams) {
    const auto it = std::find_if(ranges.begin(), ranges.end(),
                                 [&](const HyperparamRange& r) { return r.name == name; });
    if (it == ranges.end()) {
      throw BadParam(std::string(ToString(cfg.family)) + " has no hyperparameter '" + name + "'");
    }
    if (!(value >= it->lo && value <= it->hi)) {
      throw BadParam(name + " = " + std::to_string(value) + " outside its declared range");
    }
    if (it->integer && value != std::round(value)) {
      throw BadParam(name + " must be an integer");
    }
  }
  for (const auto& r : ranges) {
    if (!cfg.hyperparams.contains(r.name)) throw BadParam("missing hyperparameter " + r.name);
  }
}

nlohmann::json LearnerConfigToJson(const LearnerConfig& cfg) {
  return {{"family", ToString(cfg.family)}, {"hyperparams", cfg.hyperparams}};
}

LearnerConfig LearnerConfigFromJson(const nlohmann::json& j) {
  LearnerConfig cfg;
  cfg.family = ParseFamily(j.at("family").get<std::string>());
  cfg.hyperparams = j.at("hyperparams").get<std::map<std::string, double>>();
  return cfg;
}

// ---------------------------------------------------------------------------

std::vector<double> FittedLearner::PredictScore(const Matrix& x) const {
  if (x.cols() != input_dim_) {
    throw ShapeMismatch(std::string(ToString(family_)) + " expects " +
                        std::to_string(input_dim_) + " columns, got " + std::to_string(x.cols()));
  }
  return Score(x);
}

std::vector<double> FittedLearner::PredictEventProb(const Matrix& x, double horizon) const {
  if (task_ != Task::kSurvival) {
    throw NotSurvivalModel(std::string(ToString(family_)) + " is not a survival model");
  }
  if (!(horizon > 0.0)) throw BadParam("horizon must be positive");
  if (x.cols() != input_dim_) {
    throw ShapeMismatch(std::string(ToString(family_)) + " expects " +
                        std::to_string(input_dim_) + " columns, got " + std::to_string(x.cols()));
  }
  return EventProb(x, horizon);
}

std::vector<double> FittedLearner::EventProb(const Matrix&, double) const {
  throw NotSurvivalModel(std::string(ToString(family_)) + " is not a survival model");
}

nlohmann::json FittedLearner::ToJson() const {
  return {{"family", ToString(family_)},
          {"task", ToString(task_)},
          {"input_dim", input_dim_},
          {"params", Params()}};
}

std::shared_ptr<const FittedLearner> FittedLearner::FromJson(const nlohmann::json& j) {
  const Family family = ParseFamily(j.at("family").get<std::string>());
  const Task task = ParseTask(j.at("task").get<std::string>());
  const auto dim = j.at("input_dim").get<size_t>();
  const auto& params = j.at("params");
  switch (family) {
    case Family::kLogistic:
    case Family::kLinearRidge:
      return li::LinearFromJson(family, task, dim, params);
    case Family::kGaussianNb:
    case Family::kKnn:
      return li::NeighborsFromJson(family, task, dim, params);
    case Family::kDecisionTree:
    case Family::kRandomForest:
    case Family::kGradientBoosting:
      return li::TreesFromJson(family, task, dim, params);
    case Family::kCoxPh:
    case Family::kWeibullAft:
      return li::SurvivalFromJson(family, task, dim, params);
  }
  throw BadParam("unknown family");
}

std::shared_ptr<const FittedLearner> FitLearner(const LearnerConfig& cfg, const Matrix& x,
                                                const Outcome& y, Task task, uint64_t seed) {
  ValidateLearnerConfig(cfg, task);
  if (x.rows() == 0 || x.cols() == 0) throw DegenerateInput("empty training matrix");
  if (y.size() != x.rows()) throw ShapeMismatch("outcome length differs from row count");
  for (double v : x.data()) {
    if (!std::isfinite(v)) throw DegenerateInput("training matrix has non-finite values");
  }
  if (task == Task::kClassification) {
    bool has0 = false, has1 = false;
    for (double v : y.y) (v > 0.5 ? has1 : has0) = true;
    if (!has0 || !has1) throw DegenerateInput("classification training data has one class");
  }
  if (task == Task::kSurvival) {
    for (double t : y.time) {
      if (!(t > 0.0)) throw BadParam("survival times must be positive");
    }
    if (std::none_of(y.event.begin(), y.event.end(), [](int e) { return e != 0; })) {
      throw NoEvents("survival training data has no events");
    }
  }
  switch (cfg.family) {
    case Family::kLogistic: return li::FitLogistic(cfg, x, y);
    case Family::kLinearRidge: return li::FitLinearRidge(cfg, x, y);
    case Family::kGaussianNb: return li::FitGaussianNb(x, y);
    case Family::kKnn: return li::FitKnn(cfg, x, y, task);
    case Family::kDecisionTree: return li::FitDecisionTree(cfg, x, y, task);
    case Family::kRandomForest: return li::FitRandomForest(cfg, x, y, task, seed);
    case Family::kGradientBoosting: return li::FitGradientBoosting(cfg, x, y, task, seed);
    case Family::kCoxPh: return li::FitCoxPh(cfg, x, y);
    case Family::kWeibullAft: return li::FitWeibullAft(cfg, x, y);
  }
  throw BadParam("unknown family");
}

size_t ParameterCount(Family f, size_t n_features) {
  switch (f) {
    case Family::kLogistic:
    case Family::kLinearRidge:
      return n_features + 1;
    case Family::kCoxPh:
      return n_features;
    case Family::kWeibullAft:
      return n_features + 2;
    default:
      throw NonDifferentiableFamily(std::string(ToString(f)) + " has no analytic gradient");
  }
}

namespace {

double Loss(const LearnerConfig& cfg, std::span<const double> params, const Matrix& x,
            const Outcome& y, std::vector<double>* grad) {
  if (params.size() != ParameterCount(cfg.family, x.cols())) {
    throw ShapeMismatch("parameter vector has the wrong length");
  }
  if (y.size() != x.rows()) throw ShapeMismatch("outcome length differs from row count");
  const double l2 = cfg.Get("l2");
  switch (cfg.family) {
    case Family::kLogistic: return li::LogisticLoss(l2, params, x, y.y, grad);
    case Family::kLinearRidge: return li::RidgeLoss(l2, params, x, y.y, grad);
    case Family::kCoxPh: return li::CoxLoss(l2, params, x, y.time, y.event, grad);
    case Family::kWeibullAft: return li::WeibullLoss(l2, params, x, y.time, y.event, grad);
    default:
      throw NonDifferentiableFamily(std::string(ToString(cfg.family)) + " has no analytic gradient");
  }
}

}  // namespace

double LossValue(const LearnerConfig& cfg, std::span<const double> params, const Matrix& x,
                 const Outcome& y) {
  return Loss(cfg, params, x, y, nullptr);
}

std::vector<double> LossGradient(const LearnerConfig& cfg, std::span<const double> params,
                                 const Matrix& x, const Outcome& y) {
  std::vector<double> grad;
  Loss(cfg, params, x, y, &grad);
  return grad;
}

std::vector<double> FittedParameters(const FittedLearner& f) {
  switch (f.family()) {
    case Family::kLogistic:
    case Family::kLinearRidge:
      return li::LinearParameters(f);
    case Family::kCoxPh:
    case Family::kWeibullAft:
      return li::SurvivalParameters(f);
    default:
      throw NonDifferentiableFamily(std::string(ToString(f.family())) + " has no parameter vector");
  }
}

// ---------------------------------------------------------------------------

namespace learners_internal {

Eigen::MatrixXd ToEigen(const Matrix& x) {
  Eigen::MatrixXd m(x.rows(), x.cols());
  for (size_t r = 0; r < x.rows(); ++r) {
    for (size_t c = 0; c < x.cols(); ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = x(r, c);
    }
  }
  return m;
}

Eigen::MatrixXd DesignWithIntercept(const Matrix& x) {
  Eigen::MatrixXd m(x.rows(), x.cols() + 1);
  for (size_t r = 0; r < x.rows(); ++r) {
    const auto i = static_cast<Eigen::Index>(r);
    m(i, 0) = 1.0;
    for (size_t c = 0; c < x.cols(); ++c) m(i, static_cast<Eigen::Index>(c + 1)) = x(r, c);
  }
  return m;
}

NewtonResult MinimizeNewton(const NewtonProblem& problem, Eigen::VectorXd theta, int max_iter,
                            double grad_tol) {
  NewtonResult result;
  double f = problem.value(theta);
  if (!std::isfinite(f)) throw SingularUpdate("objective is not finite at the starting point");
  result.trace.push_back(f);
  const auto n = theta.size();
  Eigen::VectorXd g(n);
  Eigen::MatrixXd h(n, n);

  auto line_search = [&](const Eigen::VectorXd& dir, double slope, Eigen::VectorXd* out,
                         double* f_out) {
    double step = 1.0;
    for (int k = 0; k < 60; ++k) {
      Eigen::VectorXd cand = theta + step * dir;
      const double fc = problem.value(cand);
      if (std::isfinite(fc) && fc <= f + 1e-4 * step * slope) {
        *out = std::move(cand);
        *f_out = fc;
        return true;
      }
      step *= 0.5;
    }
    return false;
  };

  for (int it = 0; it < max_iter; ++it) {
    problem.grad_hess(theta, &g, &h);
    if (!g.allFinite()) throw SingularUpdate("gradient is not finite");
    if (g.norm() < grad_tol) {
      result.converged = true;
      break;
    }
    Eigen::VectorXd next;
    double f_next = f;
    bool moved = false;
    for (double shift : {0.0, 1e-8, 1e-6, 1e-4, 1e-2, 1.0, 1e2}) {
      Eigen::MatrixXd hs = h;
      hs.diagonal().array() += shift * std::max(1.0, h.diagonal().cwiseAbs().maxCoeff());
      Eigen::LDLT<Eigen::MatrixXd> ldlt(hs);
      if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) continue;
      const Eigen::VectorXd dir = ldlt.solve(-g);
      const double slope = g.dot(dir);
      if (!dir.allFinite() || !(slope < 0.0)) continue;
      if (line_search(dir, slope, &next, &f_next)) {
        moved = true;
        break;
      }
    }
    if (!moved) {
      const Eigen::VectorXd dir = -g;
      moved = line_search(dir, -g.squaredNorm(), &next, &f_next);
    }
    if (!moved) break;  // stagnated at numerical precision
    const double change = f - f_next;
    theta = std::move(next);
    f = f_next;
    result.trace.push_back(f);
    if (change <= 1e-15 * (1.0 + std::abs(f))) {
      problem.grad_hess(theta, &g, &h);
      result.converged = g.norm() < grad_tol;
      break;
    }
  }
  result.theta = std::move(theta);
  return result;
}

}  // namespace learners_internal
}  // namespace prognos
