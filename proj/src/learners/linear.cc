#include <Eigen/Dense>
#include <cmath>

#include "internal.h"
#include "prognos/error.h"
#include "prognos/kernels.h"

namespace prognos::learners_internal {
namespace {

// log(1 + exp(z)) without overflow.
double Softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double Sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// Intercept followed by one coefficient per column.
class LinearModel : public FittedLearner {
 public:
  LinearModel(Family family, Task task, size_t dim, double intercept, std::vector<double> coef,
              std::vector<double> trace)
      : FittedLearner(family, task, dim),
        intercept_(intercept),
        coef_(std::move(coef)),
        trace_(std::move(trace)) {}

  std::vector<double> TrainingLoss() const override { return trace_; }

  std::vector<double> Parameters() const {
    std::vector<double> p{intercept_};
    p.insert(p.end(), coef_.begin(), coef_.end());
    return p;
  }

 protected:
  std::vector<double> Score(const Matrix& x) const override {
    std::vector<double> out(x.rows());
    kernels::Gemv(x.data(), x.rows(), x.cols(), coef_, out);
    for (double& v : out) {
      v += intercept_;
      if (family() == Family::kLogistic) v = Sigmoid(v);
    }
    return out;
  }

  nlohmann::json Params() const override {
    return {{"intercept", intercept_}, {"coef", coef_}, {"trace", trace_}};
  }

 private:
  double intercept_;
  std::vector<double> coef_;
  std::vector<double> trace_;
};

}  // namespace

double LogisticLoss(double l2, std::span<const double> params, const Matrix& x,
                    std::span<const double> y, std::vector<double>* grad) {
  const size_t n = x.rows(), p = x.cols();
  const auto coef = params.subspan(1);
  double loss = 0.0;
  if (grad) grad->assign(p + 1, 0.0);
  for (size_t r = 0; r < n; ++r) {
    const double z = params[0] + kernels::Dot(x.row(r), coef);
    loss += Softplus(z) - y[r] * z;
    if (grad) {
      const double resid = Sigmoid(z) - y[r];
      (*grad)[0] += resid;
      for (size_t c = 0; c < p; ++c) (*grad)[c + 1] += resid * x(r, c);
    }
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  double penalty = 0.0;
  for (double b : coef) penalty += b * b;
  if (grad) {
    for (auto& g : *grad) g *= inv_n;
    for (size_t c = 0; c < p; ++c) (*grad)[c + 1] += l2 * coef[c];
  }
  return loss * inv_n + 0.5 * l2 * penalty;
}

double RidgeLoss(double l2, std::span<const double> params, const Matrix& x,
                 std::span<const double> y, std::vector<double>* grad) {
  const size_t n = x.rows(), p = x.cols();
  const auto coef = params.subspan(1);
  double loss = 0.0;
  if (grad) grad->assign(p + 1, 0.0);
  for (size_t r = 0; r < n; ++r) {
    const double resid = params[0] + kernels::Dot(x.row(r), coef) - y[r];
    loss += 0.5 * resid * resid;
    if (grad) {
      (*grad)[0] += resid;
      for (size_t c = 0; c < p; ++c) (*grad)[c + 1] += resid * x(r, c);
    }
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  double penalty = 0.0;
  for (double b : coef) penalty += b * b;
  if (grad) {
    for (auto& g : *grad) g *= inv_n;
    for (size_t c = 0; c < p; ++c) (*grad)[c + 1] += l2 * coef[c];
  }
  return loss * inv_n + 0.5 * l2 * penalty;
}

FittedPtr FitLogistic(const LearnerConfig& cfg, const Matrix& x, const Outcome& y) {
  const double l2 = cfg.Get("l2");
  const int iters = static_cast<int>(cfg.Get("iters"));
  const Eigen::MatrixXd design = DesignWithIntercept(x);
  const auto n = design.rows(), k = design.cols();
  const Eigen::Map<const Eigen::VectorXd> target(y.y.data(), n);
  const double inv_n = 1.0 / static_cast<double>(n);

  auto penalty_diag = [&]() {
    Eigen::VectorXd d = Eigen::VectorXd::Constant(k, l2);
    d(0) = 0.0;
    return d;
  }();

  NewtonProblem problem;
  problem.value = [&](const Eigen::VectorXd& theta) {
    const Eigen::VectorXd z = design * theta;
    double loss = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) loss += Softplus(z(i)) - target(i) * z(i);
    return loss * inv_n + 0.5 * theta.cwiseProduct(penalty_diag).dot(theta);
  };
  problem.grad_hess = [&](const Eigen::VectorXd& theta, Eigen::VectorXd* g, Eigen::MatrixXd* h) {
    const Eigen::VectorXd z = design * theta;
    Eigen::VectorXd resid(n), w(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double pi = Sigmoid(z(i));
      resid(i) = pi - target(i);
      w(i) = pi * (1.0 - pi);
    }
    *g = design.transpose() * resid * inv_n + penalty_diag.cwiseProduct(theta);
    *h = design.transpose() * w.asDiagonal() * design * inv_n;
    h->diagonal() += penalty_diag;
  };
  const auto result = MinimizeNewton(problem, Eigen::VectorXd::Zero(k), iters, 1e-6);
  std::vector<double> coef(result.theta.data() + 1, result.theta.data() + k);
  return std::make_shared<LinearModel>(Family::kLogistic, Task::kClassification, x.cols(),
                                       result.theta(0), std::move(coef), result.trace);
}

FittedPtr FitLinearRidge(const LearnerConfig& cfg, const Matrix& x, const Outcome& y) {
  const double l2 = cfg.Get("l2");
  const size_t n = x.rows(), p = x.cols();
  // Closed-form minimiser of the half-MSE + ridge objective: centre, solve
  // (Xc'Xc / n + l2 I) beta = Xc'yc / n, recover the intercept.
  Eigen::MatrixXd xc = ToEigen(x);
  const Eigen::VectorXd mean = xc.colwise().mean();
  xc.rowwise() -= mean.transpose();
  const Eigen::Map<const Eigen::VectorXd> target(y.y.data(), static_cast<Eigen::Index>(n));
  const double ybar = target.mean();
  const double inv_n = 1.0 / static_cast<double>(n);
  Eigen::MatrixXd gram = xc.transpose() * xc * inv_n;
  gram.diagonal().array() += l2;
  const Eigen::VectorXd rhs = xc.transpose() * (target.array() - ybar).matrix() * inv_n;
  const Eigen::VectorXd beta = gram.ldlt().solve(rhs);
  if (!beta.allFinite()) throw SingularUpdate("ridge normal equations are singular");
  std::vector<double> coef(beta.data(), beta.data() + p);
  const double intercept = ybar - mean.dot(beta);
  std::vector<double> params{intercept};
  params.insert(params.end(), coef.begin(), coef.end());
  const double loss = RidgeLoss(l2, params, x, y.y, nullptr);
  return std::make_shared<LinearModel>(Family::kLinearRidge, Task::kRegression, p, intercept,
                                       std::move(coef), std::vector<double>{loss});
}

FittedPtr LinearFromJson(Family family, Task task, size_t dim, const nlohmann::json& params) {
  auto coef = params.at("coef").get<std::vector<double>>();
  if (coef.size() != dim) throw ShapeMismatch("coefficient count differs from input_dim");
  return std::make_shared<LinearModel>(family, task, dim, params.at("intercept").get<double>(),
                                       std::move(coef),
                                       params.at("trace").get<std::vector<double>>());
}

std::vector<double> LinearParameters(const FittedLearner& f) {
  return dynamic_cast<const LinearModel&>(f).Parameters();
}

}  // namespace prognos::learners_internal
