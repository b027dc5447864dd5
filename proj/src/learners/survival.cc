#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "internal.h"
#include "prognos/error.h"
#include "prognos/kernels.h"

namespace prognos::learners_internal {
namespace {

// Subjects ordered by decreasing time, grouped into runs of equal times.
struct RiskOrder {
  std::vector<size_t> order;
  std::vector<size_t> group_end;  // exclusive end index of each tie group

  explicit RiskOrder(std::span<const double> time) : order(time.size()) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return time[a] > time[b]; });
    for (size_t i = 0; i < order.size();) {
      size_t j = i;
      while (j < order.size() && time[order[j]] == time[order[i]]) ++j;
      group_end.push_back(j);
      i = j;
    }
  }
};

// Negative Breslow partial log-likelihood (sum, not mean) with its
// gradient and Hessian, on an already-centred design.
double CoxTerms(const Eigen::MatrixXd& x, std::span<const int> event, const RiskOrder& ro,
                const Eigen::VectorXd& beta, Eigen::VectorXd* grad, Eigen::MatrixXd* hess) {
  const auto p = x.cols();
  const Eigen::VectorXd eta = x * beta;
  const double shift = eta.size() ? eta.maxCoeff() : 0.0;
  double s0 = 0.0;
  Eigen::VectorXd s1 = Eigen::VectorXd::Zero(p);
  Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(hess ? p : 0, hess ? p : 0);
  if (grad) grad->setZero(p);
  if (hess) hess->setZero(p, p);
  double nll = 0.0;
  size_t start = 0;
  for (size_t end : ro.group_end) {
    for (size_t m = start; m < end; ++m) {
      const auto i = static_cast<Eigen::Index>(ro.order[m]);
      const double w = std::exp(eta(i) - shift);
      s0 += w;
      if (grad || hess) s1 += w * x.row(i).transpose();
      if (hess) s2 += w * x.row(i).transpose() * x.row(i);
    }
    double d = 0.0;
    for (size_t m = start; m < end; ++m) {
      const auto i = static_cast<Eigen::Index>(ro.order[m]);
      if (!event[ro.order[m]]) continue;
      d += 1.0;
      nll -= eta(i);
      if (grad) *grad -= x.row(i).transpose();
    }
    if (d > 0.0) {
      nll += d * (std::log(s0) + shift);
      const Eigen::VectorXd mean = s1 / s0;
      if (grad) *grad += d * mean;
      if (hess) *hess += d * (s2 / s0 - mean * mean.transpose());
    }
    start = end;
  }
  return nll;
}

class CoxModel : public FittedLearner {
 public:
  CoxModel(size_t dim, std::vector<double> beta, std::vector<double> center,
           std::vector<double> event_times, std::vector<double> cum_hazard,
           std::vector<double> trace)
      : FittedLearner(Family::kCoxPh, Task::kSurvival, dim),
        beta_(std::move(beta)),
        center_(std::move(center)),
        event_times_(std::move(event_times)),
        cum_hazard_(std::move(cum_hazard)),
        trace_(std::move(trace)) {
    offset_ = kernels::Dot(beta_, center_);
  }

  std::vector<double> TrainingLoss() const override { return trace_; }
  const std::vector<double>& beta() const { return beta_; }

 protected:
  std::vector<double> Score(const Matrix& x) const override {
    std::vector<double> out(x.rows());
    kernels::Gemv(x.data(), x.rows(), x.cols(), beta_, out);
    for (double& v : out) v = std::exp(v);
    return out;
  }

  std::vector<double> EventProb(const Matrix& x, double horizon) const override {
    // Breslow cumulative baseline hazard at the horizon, for centred
    // covariates: a right-continuous step function of the event times.
    const auto it = std::upper_bound(event_times_.begin(), event_times_.end(), horizon);
    const double h0 = it == event_times_.begin() ? 0.0 : cum_hazard_[it - event_times_.begin() - 1];
    std::vector<double> out(x.rows());
    kernels::Gemv(x.data(), x.rows(), x.cols(), beta_, out);
    for (double& v : out) v = -std::expm1(-h0 * std::exp(v - offset_));
    return out;
  }

  nlohmann::json Params() const override {
    return {{"beta", beta_},
            {"center", center_},
            {"event_times", event_times_},
            {"cum_hazard", cum_hazard_},
            {"trace", trace_}};
  }

 private:
  std::vector<double> beta_;
  std::vector<double> center_;
  std::vector<double> event_times_;
  std::vector<double> cum_hazard_;
  std::vector<double> trace_;
  double offset_ = 0.0;
};

// log T = mu + w'x + sigma * eps, eps ~ standard minimum extreme value.
class WeibullModel : public FittedLearner {
 public:
  WeibullModel(size_t dim, double mu, std::vector<double> w, double log_sigma,
               std::vector<double> trace)
      : FittedLearner(Family::kWeibullAft, Task::kSurvival, dim),
        mu_(mu),
        w_(std::move(w)),
        log_sigma_(log_sigma),
        trace_(std::move(trace)) {}

  std::vector<double> TrainingLoss() const override { return trace_; }

  std::vector<double> Parameters() const {
    std::vector<double> p{mu_};
    p.insert(p.end(), w_.begin(), w_.end());
    p.push_back(log_sigma_);
    return p;
  }

 protected:
  // Hazard ratio form: Weibull AFT is also proportional hazards with
  // relative risk exp(-(mu + w'x) / sigma).
  std::vector<double> Score(const Matrix& x) const override {
    std::vector<double> out(x.rows());
    kernels::Gemv(x.data(), x.rows(), x.cols(), w_, out);
    const double sigma = std::exp(log_sigma_);
    for (double& v : out) v = std::exp(-(mu_ + v) / sigma);
    return out;
  }

  std::vector<double> EventProb(const Matrix& x, double horizon) const override {
    std::vector<double> out(x.rows());
    kernels::Gemv(x.data(), x.rows(), x.cols(), w_, out);
    const double sigma = std::exp(log_sigma_);
    const double log_h = std::log(horizon);
    for (double& v : out) v = -std::expm1(-std::exp((log_h - mu_ - v) / sigma));
    return out;
  }

  nlohmann::json Params() const override {
    return {{"mu", mu_}, {"w", w_}, {"log_sigma", log_sigma_}, {"trace", trace_}};
  }

 private:
  double mu_;
  std::vector<double> w_;
  double log_sigma_;
  std::vector<double> trace_;
};

}  // namespace

double CoxLoss(double l2, std::span<const double> params, const Matrix& x,
               std::span<const double> time, std::span<const int> event,
               std::vector<double>* grad) {
  const Eigen::MatrixXd design = ToEigen(x);
  const Eigen::VectorXd beta = Eigen::Map<const Eigen::VectorXd>(
      params.data(), static_cast<Eigen::Index>(params.size()));
  const RiskOrder ro(time);
  Eigen::VectorXd g;
  const double inv_n = 1.0 / static_cast<double>(x.rows());
  const double nll = CoxTerms(design, event, ro, beta, grad ? &g : nullptr, nullptr);
  if (grad) {
    g = g * inv_n + l2 * beta;
    grad->assign(g.data(), g.data() + g.size());
  }
  return nll * inv_n + 0.5 * l2 * beta.squaredNorm();
}

double WeibullLoss(double l2, std::span<const double> params, const Matrix& x,
                   std::span<const double> time, std::span<const int> event,
                   std::vector<double>* grad) {
  const size_t n = x.rows(), p = x.cols();
  const double mu = params[0];
  const auto w = params.subspan(1, p);
  const double s = params[p + 1];
  const double inv_sigma = std::exp(-s);
  double nll = 0.0;
  if (grad) grad->assign(p + 2, 0.0);
  for (size_t r = 0; r < n; ++r) {
    const double a = mu + kernels::Dot(x.row(r), w);
    const double z = (std::log(time[r]) - a) * inv_sigma;
    const double ez = std::exp(z);
    const double delta = event[r] ? 1.0 : 0.0;
    nll -= delta * (-s - std::log(time[r]) + z) - ez;
    if (grad) {
      const double dl_da = (ez - delta) * inv_sigma;
      const double dl_ds = -delta + z * (ez - delta);
      (*grad)[0] -= dl_da;
      for (size_t c = 0; c < p; ++c) (*grad)[c + 1] -= dl_da * x(r, c);
      (*grad)[p + 1] -= dl_ds;
    }
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  double penalty = 0.0;
  for (double v : w) penalty += v * v;
  if (grad) {
    for (auto& g : *grad) g *= inv_n;
    for (size_t c = 0; c < p; ++c) (*grad)[c + 1] += l2 * w[c];
  }
  return nll * inv_n + 0.5 * l2 * penalty;
}

FittedPtr FitCoxPh(const LearnerConfig& cfg, const Matrix& x, const Outcome& y) {
  const double l2 = cfg.Get("l2");
  const size_t n = x.rows(), p = x.cols();
  Eigen::MatrixXd design = ToEigen(x);
  const Eigen::VectorXd center = design.colwise().mean();
  design.rowwise() -= center.transpose();
  const RiskOrder ro(y.time);
  const double inv_n = 1.0 / static_cast<double>(n);

  NewtonProblem problem;
  problem.value = [&](const Eigen::VectorXd& beta) {
    return CoxTerms(design, y.event, ro, beta, nullptr, nullptr) * inv_n +
           0.5 * l2 * beta.squaredNorm();
  };
  problem.grad_hess = [&](const Eigen::VectorXd& beta, Eigen::VectorXd* g, Eigen::MatrixXd* h) {
    CoxTerms(design, y.event, ro, beta, g, h);
    *g = *g * inv_n + l2 * beta;
    *h = *h * inv_n;
    h->diagonal().array() += l2;
  };
  const auto result =
      MinimizeNewton(problem, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p)), 100, 1e-9);
  const Eigen::VectorXd& beta = result.theta;

  // Breslow baseline cumulative hazard at centred covariates.
  const Eigen::VectorXd eta = design * beta;
  std::vector<double> event_times, cum_hazard;
  {
    std::vector<double> risk_sum(ro.group_end.size());
    double s0 = 0.0;
    size_t start = 0;
    for (size_t g = 0; g < ro.group_end.size(); ++g) {
      for (size_t m = start; m < ro.group_end[g]; ++m) {
        s0 += std::exp(eta(static_cast<Eigen::Index>(ro.order[m])));
      }
      risk_sum[g] = s0;
      start = ro.group_end[g];
    }
    // Accumulate forward in time (groups are stored latest first).
    double h = 0.0;
    for (size_t g = ro.group_end.size(); g-- > 0;) {
      const size_t begin = g == 0 ? 0 : ro.group_end[g - 1];
      double d = 0.0;
      for (size_t m = begin; m < ro.group_end[g]; ++m) d += y.event[ro.order[m]] ? 1.0 : 0.0;
      if (d == 0.0) continue;
      h += d / risk_sum[g];
      event_times.push_back(y.time[ro.order[begin]]);
      cum_hazard.push_back(h);
    }
  }
  return std::make_shared<CoxModel>(
      p, std::vector<double>(beta.data(), beta.data() + p),
      std::vector<double>(center.data(), center.data() + p), std::move(event_times),
      std::move(cum_hazard), result.trace);
}

FittedPtr FitWeibullAft(const LearnerConfig& cfg, const Matrix& x, const Outcome& y) {
  const double l2 = cfg.Get("l2");
  const size_t n = x.rows(), p = x.cols();
  const Eigen::MatrixXd design = DesignWithIntercept(x);  // [1, x]
  Eigen::VectorXd log_t(n);
  Eigen::VectorXd delta(n);
  for (size_t r = 0; r < n; ++r) {
    log_t(static_cast<Eigen::Index>(r)) = std::log(y.time[r]);
    delta(static_cast<Eigen::Index>(r)) = y.event[r] ? 1.0 : 0.0;
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  const auto k = static_cast<Eigen::Index>(p + 1);  // linear block size

  // theta = [mu, w, s]
  auto value = [&](const Eigen::VectorXd& theta) {
    const Eigen::VectorXd a = design * theta.head(k);
    const double s = theta(k);
    const double inv_sigma = std::exp(-s);
    double nll = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      const double z = (log_t(i) - a(i)) * inv_sigma;
      nll -= delta(i) * (-s - log_t(i) + z) - std::exp(z);
    }
    return nll * inv_n + 0.5 * l2 * theta.segment(1, static_cast<Eigen::Index>(p)).squaredNorm();
  };
  NewtonProblem problem;
  problem.value = value;
  problem.grad_hess = [&](const Eigen::VectorXd& theta, Eigen::VectorXd* g, Eigen::MatrixXd* h) {
    const Eigen::VectorXd a = design * theta.head(k);
    const double s = theta(k);
    const double inv_sigma = std::exp(-s);
    g->setZero(k + 1);
    h->setZero(k + 1, k + 1);
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      const double z = (log_t(i) - a(i)) * inv_sigma;
      const double ez = std::exp(z);
      const double d = delta(i);
      const double dl_da = (ez - d) * inv_sigma;
      const double dl_ds = -d + z * (ez - d);
      const double d2_aa = -ez * inv_sigma * inv_sigma;
      const double d2_as = -(z * ez + ez - d) * inv_sigma;
      const double d2_ss = -z * (ez - d) - z * z * ez;
      const auto row = design.row(i).transpose();
      g->head(k) -= dl_da * row;
      (*g)(k) -= dl_ds;
      h->topLeftCorner(k, k) -= d2_aa * row * row.transpose();
      h->col(k).head(k) -= d2_as * row;
      (*h)(k, k) -= d2_ss;
    }
    h->row(k).head(k) = h->col(k).head(k).transpose();
    *g *= inv_n;
    *h *= inv_n;
    for (Eigen::Index c = 1; c < k; ++c) {
      (*g)(c) += l2 * theta(c);
      (*h)(c, c) += l2;
    }
  };

  Eigen::VectorXd theta = Eigen::VectorXd::Zero(k + 1);
  theta(0) = log_t.mean();
  const double sd = std::sqrt((log_t.array() - log_t.mean()).square().mean());
  theta(k) = sd > 1e-8 ? std::log(sd) : 0.0;
  const auto result = MinimizeNewton(problem, theta, 200, 1e-9);
  const Eigen::VectorXd& t = result.theta;
  return std::make_shared<WeibullModel>(p, t(0), std::vector<double>(t.data() + 1, t.data() + k),
                                        t(k), result.trace);
}

FittedPtr SurvivalFromJson(Family family, Task task, size_t dim, const nlohmann::json& params) {
  if (task != Task::kSurvival) throw BadParam("survival learner stored with a non-survival task");
  if (family == Family::kCoxPh) {
    auto beta = params.at("beta").get<std::vector<double>>();
    if (beta.size() != dim) throw ShapeMismatch("coefficient count differs from input_dim");
    return std::make_shared<CoxModel>(dim, std::move(beta),
                                      params.at("center").get<std::vector<double>>(),
                                      params.at("event_times").get<std::vector<double>>(),
                                      params.at("cum_hazard").get<std::vector<double>>(),
                                      params.at("trace").get<std::vector<double>>());
  }
  auto w = params.at("w").get<std::vector<double>>();
  if (w.size() != dim) throw ShapeMismatch("coefficient count differs from input_dim");
  return std::make_shared<WeibullModel>(dim, params.at("mu").get<double>(), std::move(w),
                                        params.at("log_sigma").get<double>(),
                                        params.at("trace").get<std::vector<double>>());
}

std::vector<double> SurvivalParameters(const FittedLearner& f) {
  if (f.family() == Family::kCoxPh) return dynamic_cast<const CoxModel&>(f).beta();
  return dynamic_cast<const WeibullModel&>(f).Parameters();
}

}  // namespace prognos::learners_internal
