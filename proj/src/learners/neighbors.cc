#include <algorithm>
#include <cmath>
#include <numeric>

#include "internal.h"
#include "prognos/error.h"
#include "prognos/kernels.h"

namespace prognos::learners_internal {
namespace {

// Stores the training set; predicts the mean target of the k nearest rows
// (Euclidean, ties by row index).
class KnnModel : public FittedLearner {
 public:
  KnnModel(Task task, size_t k, Matrix x, std::vector<double> y)
      : FittedLearner(Family::kKnn, task, x.cols()), k_(k), x_(std::move(x)), y_(std::move(y)) {}

 protected:
  std::vector<double> Score(const Matrix& q) const override {
    const size_t n = x_.rows();
    const size_t k = std::min(k_, n);
    std::vector<std::pair<double, size_t>> dist(n);
    std::vector<double> out(q.rows());
    for (size_t r = 0; r < q.rows(); ++r) {
      for (size_t i = 0; i < n; ++i) dist[i] = {kernels::SquaredDistance(q.row(r), x_.row(i)), i};
      std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
      double s = 0.0;
      for (size_t j = 0; j < k; ++j) s += y_[dist[j].second];
      out[r] = s / static_cast<double>(k);
    }
    return out;
  }

  nlohmann::json Params() const override {
    return {{"k", k_}, {"rows", x_.rows()}, {"x", x_.data()}, {"y", y_}};
  }

 private:
  size_t k_;
  Matrix x_;
  std::vector<double> y_;
};

class GaussianNbModel : public FittedLearner {
 public:
  GaussianNbModel(size_t dim, std::vector<double> log_prior, std::vector<std::vector<double>> mean,
                  std::vector<std::vector<double>> var)
      : FittedLearner(Family::kGaussianNb, Task::kClassification, dim),
        log_prior_(std::move(log_prior)),
        mean_(std::move(mean)),
        var_(std::move(var)) {}

 protected:
  std::vector<double> Score(const Matrix& x) const override {
    std::vector<double> out(x.rows());
    for (size_t r = 0; r < x.rows(); ++r) {
      double ll[2];
      for (int c = 0; c < 2; ++c) {
        double s = log_prior_[static_cast<size_t>(c)];
        for (size_t j = 0; j < x.cols(); ++j) {
          const double v = var_[static_cast<size_t>(c)][j];
          const double d = x(r, j) - mean_[static_cast<size_t>(c)][j];
          s -= 0.5 * (std::log(2.0 * M_PI * v) + d * d / v);
        }
        ll[c] = s;
      }
      // P(1) = 1 / (1 + exp(ll0 - ll1))
      const double z = ll[1] - ll[0];
      out[r] = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
    }
    return out;
  }

  nlohmann::json Params() const override {
    return {{"log_prior", log_prior_}, {"mean", mean_}, {"var", var_}};
  }

 private:
  std::vector<double> log_prior_;
  std::vector<std::vector<double>> mean_;
  std::vector<std::vector<double>> var_;
};

}  // namespace

FittedPtr FitKnn(const LearnerConfig& cfg, const Matrix& x, const Outcome& y, Task task) {
  return std::make_shared<KnnModel>(task, static_cast<size_t>(cfg.Get("k")), x, y.y);
}

FittedPtr FitGaussianNb(const Matrix& x, const Outcome& y) {
  const size_t n = x.rows(), p = x.cols();
  std::vector<std::vector<double>> mean(2, std::vector<double>(p, 0.0));
  std::vector<std::vector<double>> var(2, std::vector<double>(p, 0.0));
  double count[2] = {0.0, 0.0};
  for (size_t r = 0; r < n; ++r) {
    const int c = y.y[r] > 0.5 ? 1 : 0;
    count[c] += 1.0;
    for (size_t j = 0; j < p; ++j) mean[static_cast<size_t>(c)][j] += x(r, j);
  }
  if (count[0] == 0.0 || count[1] == 0.0) throw DegenerateInput("gaussian_nb needs both classes");
  for (int c = 0; c < 2; ++c) {
    for (double& m : mean[static_cast<size_t>(c)]) m /= count[c];
  }
  for (size_t r = 0; r < n; ++r) {
    const auto c = static_cast<size_t>(y.y[r] > 0.5 ? 1 : 0);
    for (size_t j = 0; j < p; ++j) {
      const double d = x(r, j) - mean[c][j];
      var[c][j] += d * d;
    }
  }
  // Variance floor relative to the widest feature, as in common NB
  // implementations.
  double widest = 0.0;
  for (size_t j = 0; j < p; ++j) {
    double s = 0.0, ss = 0.0;
    for (size_t r = 0; r < n; ++r) {
      s += x(r, j);
      ss += x(r, j) * x(r, j);
    }
    widest = std::max(widest, ss / static_cast<double>(n) - (s / static_cast<double>(n)) * (s / static_cast<double>(n)));
  }
  const double floor = 1e-9 * std::max(widest, 1.0);
  for (int c = 0; c < 2; ++c) {
    for (double& v : var[static_cast<size_t>(c)]) v = v / count[c] + floor;
  }
  std::vector<double> log_prior = {std::log(count[0] / static_cast<double>(n)),
                                   std::log(count[1] / static_cast<double>(n))};
  return std::make_shared<GaussianNbModel>(p, std::move(log_prior), std::move(mean),
                                           std::move(var));
}

FittedPtr NeighborsFromJson(Family family, Task task, size_t dim, const nlohmann::json& params) {
  if (family == Family::kKnn) {
    const auto rows = params.at("rows").get<size_t>();
    auto data = params.at("x").get<std::vector<double>>();
    auto y = params.at("y").get<std::vector<double>>();
    if (y.size() != rows || rows == 0) throw ShapeMismatch("knn store is inconsistent");
    return std::make_shared<KnnModel>(task, params.at("k").get<size_t>(),
                                      Matrix(rows, dim, std::move(data)), std::move(y));
  }
  auto mean = params.at("mean").get<std::vector<std::vector<double>>>();
  auto var = params.at("var").get<std::vector<std::vector<double>>>();
  auto log_prior = params.at("log_prior").get<std::vector<double>>();
  if (mean.size() != 2 || var.size() != 2 || log_prior.size() != 2 || mean[0].size() != dim ||
      mean[1].size() != dim || var[0].size() != dim || var[1].size() != dim) {
    throw ShapeMismatch("gaussian_nb parameters are inconsistent");
  }
  return std::make_shared<GaussianNbModel>(dim, std::move(log_prior), std::move(mean),
                                           std::move(var));
}

}  // namespace prognos::learners_internal
