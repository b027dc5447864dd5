#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "prognos/learners.h"

namespace prognos::learners_internal {

using FittedPtr = std::shared_ptr<const FittedLearner>;

// Damped Newton minimisation with Armijo backtracking. When the Newton
// direction fails, the Hessian is shifted by increasing multiples of the
// identity, then a plain gradient step is tried. Throws SingularUpdate only
// when the objective becomes non-finite at the starting point.
struct NewtonProblem {
  std::function<double(const Eigen::VectorXd&)> value;
  std::function<void(const Eigen::VectorXd&, Eigen::VectorXd*, Eigen::MatrixXd*)> grad_hess;
};

struct NewtonResult {
  Eigen::VectorXd theta;
  bool converged = false;
  std::vector<double> trace;
};

NewtonResult MinimizeNewton(const NewtonProblem& problem, Eigen::VectorXd theta, int max_iter,
                            double grad_tol);

// Row-major matrix with a leading column of ones.
Eigen::MatrixXd DesignWithIntercept(const Matrix& x);
Eigen::MatrixXd ToEigen(const Matrix& x);

FittedPtr FitLogistic(const LearnerConfig& cfg, const Matrix& x, const Outcome& y);
FittedPtr FitLinearRidge(const LearnerConfig& cfg, const Matrix& x, const Outcome& y);
FittedPtr FitGaussianNb(const Matrix& x, const Outcome& y);
FittedPtr FitKnn(const LearnerConfig& cfg, const Matrix& x, const Outcome& y, Task task);
FittedPtr FitDecisionTree(const LearnerConfig& cfg, const Matrix& x, const Outcome& y, Task task);
FittedPtr FitRandomForest(const LearnerConfig& cfg, const Matrix& x, const Outcome& y, Task task,
                          uint64_t seed);
FittedPtr FitGradientBoosting(const LearnerConfig& cfg, const Matrix& x, const Outcome& y,
                              Task task, uint64_t seed);
FittedPtr FitCoxPh(const LearnerConfig& cfg, const Matrix& x, const Outcome& y);
FittedPtr FitWeibullAft(const LearnerConfig& cfg, const Matrix& x, const Outcome& y);

FittedPtr LinearFromJson(Family family, Task task, size_t dim, const nlohmann::json& params);
FittedPtr NeighborsFromJson(Family family, Task task, size_t dim, const nlohmann::json& params);
FittedPtr TreesFromJson(Family family, Task task, size_t dim, const nlohmann::json& params);
FittedPtr SurvivalFromJson(Family family, Task task, size_t dim, const nlohmann::json& params);

// Objectives and gradients in the public parameter layouts.
double LogisticLoss(double l2, std::span<const double> params, const Matrix& x,
                    std::span<const double> y, std::vector<double>* grad);
double RidgeLoss(double l2, std::span<const double> params, const Matrix& x,
                 std::span<const double> y, std::vector<double>* grad);
double CoxLoss(double l2, std::span<const double> params, const Matrix& x,
               std::span<const double> time, std::span<const int> event,
               std::vector<double>* grad);
double WeibullLoss(double l2, std::span<const double> params, const Matrix& x,
                   std::span<const double> time, std::span<const int> event,
                   std::vector<double>* grad);

std::vector<double> LinearParameters(const FittedLearner& f);
std::vector<double> SurvivalParameters(const FittedLearner& f);

}  // namespace prognos::learners_internal
