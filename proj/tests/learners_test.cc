#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "prognos/error.h"
#include "prognos/learners.h"
#include "prognos/metrics.h"
#include "test_util.h"

namespace prognos {
namespace {

struct Problem {
  Matrix x;
  Outcome y;
};

Problem Classification(size_t n, uint64_t seed) {
  Rng rng(seed);
  Problem p{testing::RandomMatrix(n, 3, rng), {}};
  for (size_t r = 0; r < n; ++r) {
    const double lp = 0.5 + 1.5 * p.x(r, 0) - p.x(r, 1);
    p.y.y.push_back(rng.Uniform() < 1.0 / (1.0 + std::exp(-lp)) ? 1.0 : 0.0);
  }
  return p;
}

Problem Regression(size_t n, uint64_t seed) {
  Rng rng(seed);
  Problem p{testing::RandomMatrix(n, 3, rng), {}};
  for (size_t r = 0; r < n; ++r) {
    p.y.y.push_back(1.0 + 2.0 * p.x(r, 0) - p.x(r, 2) + 0.1 * rng.Normal());
  }
  return p;
}

Problem Survival(size_t n, uint64_t seed, bool weibull = false) {
  Rng rng(seed);
  Problem p{testing::RandomMatrix(n, 2, rng), {}};
  for (size_t r = 0; r < n; ++r) {
    double u;
    do u = rng.Uniform(); while (u <= 0.0);
    double t;
    if (weibull) {
      // log T = 1 + 0.5 x0 - 0.3 x1 + 0.5 W, W standard minimum extreme value.
      const double w = std::log(-std::log(u));
      t = std::exp(1.0 + 0.5 * p.x(r, 0) - 0.3 * p.x(r, 1) + 0.5 * w);
    } else {
      t = -std::log(u) / std::exp(0.8 * p.x(r, 0) - 0.5 * p.x(r, 1));
    }
    const double c = rng.Uniform() * (weibull ? 20.0 : 3.0);
    p.y.time.push_back(std::max(std::min(t, c), 1e-9));
    p.y.event.push_back(t <= c);
  }
  return p;
}

LearnerConfig WithL2(Family f, double l2) {
  auto cfg = DefaultLearnerConfig(f);
  cfg.hyperparams["l2"] = l2;
  return cfg;
}

void CheckGradient(const LearnerConfig& cfg, const Problem& p, uint64_t seed) {
  Rng rng(seed);
  const size_t k = ParameterCount(cfg.family, p.x.cols());
  for (int rep = 0; rep < 5; ++rep) {
    std::vector<double> theta(k);
    for (auto& v : theta) v = 0.5 * rng.Normal();
    const auto g = LossGradient(cfg, theta, p.x, p.y);
    ASSERT_EQ(g.size(), k);
    for (size_t i = 0; i < k; ++i) {
      auto up = theta, dn = theta;
      up[i] += 1e-5;
      dn[i] -= 1e-5;
      const double fd = (LossValue(cfg, up, p.x, p.y) - LossValue(cfg, dn, p.x, p.y)) / 2e-5;
      EXPECT_LE(std::abs(fd - g[i]), 1e-5 * std::max(1.0, std::abs(g[i])))
          << ToString(cfg.family) << " param " << i;
    }
  }
}

TEST(Gradients, MatchFiniteDifferences) {
  CheckGradient(WithL2(Family::kLogistic, 0.1), Classification(80, 1), 10);
  CheckGradient(WithL2(Family::kLinearRidge, 0.1), Regression(80, 2), 11);
  CheckGradient(WithL2(Family::kCoxPh, 0.1), Survival(80, 3), 12);
  CheckGradient(WithL2(Family::kWeibullAft, 0.1), Survival(80, 4, true), 13);
  EXPECT_THROW(LossValue(DefaultLearnerConfig(Family::kKnn), std::vector<double>{}, Matrix(1, 1),
                         Outcome{}),
               NonDifferentiableFamily);
}

TEST(Logistic, LearnsSignalAndLossDecreases) {
  const auto p = Classification(500, 5);
  const auto m = FitLearner(WithL2(Family::kLogistic, 1e-3), p.x, p.y, Task::kClassification, 1);
  const auto s = m->PredictScore(p.x);
  EXPECT_GT(Auroc(s, p.y.y).value, 0.8);
  for (double v : s) {
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
  const auto theta = FittedParameters(*m);
  EXPECT_NEAR(theta[1], 1.5, 0.35);
  EXPECT_NEAR(theta[2], -1.0, 0.35);
}

TEST(Ridge, RecoversCoefficients) {
  const auto p = Regression(400, 6);
  const auto m = FitLearner(WithL2(Family::kLinearRidge, 1e-4), p.x, p.y, Task::kRegression, 1);
  const auto theta = FittedParameters(*m);
  EXPECT_NEAR(theta[0], 1.0, 0.03);
  EXPECT_NEAR(theta[1], 2.0, 0.03);
  EXPECT_NEAR(theta[2], 0.0, 0.03);
  EXPECT_NEAR(theta[3], -1.0, 0.03);
}

TEST(Cox, RecoversCoefficients) {
  const auto p = Survival(3000, 7);
  const auto m = FitLearner(WithL2(Family::kCoxPh, 0.0), p.x, p.y, Task::kSurvival, 1);
  const auto beta = FittedParameters(*m);
  EXPECT_NEAR(beta[0], 0.8, 0.08);
  EXPECT_NEAR(beta[1], -0.5, 0.05);
  const auto ev = m->PredictEventProb(p.x, 0.5);
  for (double v : ev) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Cox, NoEventsThrows) {
  auto p = Survival(20, 8);
  std::fill(p.y.event.begin(), p.y.event.end(), 0);
  EXPECT_THROW(FitLearner(DefaultLearnerConfig(Family::kCoxPh), p.x, p.y, Task::kSurvival, 1),
               NoEvents);
}

TEST(Weibull, MedianSurvivalTime) {
  const auto p = Survival(4000, 9, true);
  const auto m = FitLearner(WithL2(Family::kWeibullAft, 0.0), p.x, p.y, Task::kSurvival, 1);
  const auto theta = FittedParameters(*m);  // mu, w0, w1, log sigma
  EXPECT_NEAR(theta[0], 1.0, 0.05);
  EXPECT_NEAR(theta[1], 0.5, 0.05);
  EXPECT_NEAR(theta[2], -0.3, 0.05);
  EXPECT_NEAR(std::exp(theta[3]), 0.5, 0.03);
  // At the fitted median, exp(mu + w'x + sigma ln ln 2), the event
  // probability is one half.
  Matrix row(1, 2, std::vector<double>{0.4, -1.0});
  const double median = std::exp(theta[0] + theta[1] * 0.4 - theta[2] +
                                 std::exp(theta[3]) * std::log(std::log(2.0)));
  EXPECT_NEAR(m->PredictEventProb(row, median)[0], 0.5, 1e-9);
}

TEST(Trees, DecisionTreeFitsStepFunction) {
  Matrix x(100, 1);
  std::vector<double> y(100);
  for (size_t r = 0; r < 100; ++r) {
    x(r, 0) = static_cast<double>(r);
    y[r] = r < 37 ? 1.0 : 5.0;
  }
  const Tree t = BuildTree(x, y, {}, {3, 1.0, 1.0}, nullptr);
  EXPECT_EQ(t.feature[0], 0);
  EXPECT_EQ(t.threshold[0], 36.5);
  EXPECT_EQ(t.Predict(std::vector<double>{10.0}), 1.0);
  EXPECT_EQ(t.Predict(std::vector<double>{80.0}), 5.0);
  EXPECT_EQ(Tree::FromJson(t.ToJson()).ToJson(), t.ToJson());
}

TEST(Trees, ForestUncertaintyShrinksOnTrainingData) {
  Rng rng(10);
  const Matrix x = testing::RandomMatrix(200, 2, rng);
  std::vector<double> y(200);
  for (size_t r = 0; r < 200; ++r) y[r] = x(r, 0) > 0 ? 1.0 : 0.0;
  const auto f = RegressionForest::Fit(x, y, 50, {8, 1.0, 1.0}, 3);
  double mean, sd;
  f.Predict(std::vector<double>{2.0, 0.0}, &mean, &sd);
  EXPECT_NEAR(mean, 1.0, 0.05);
  f.Predict(std::vector<double>{-2.0, 0.0}, &mean, &sd);
  EXPECT_NEAR(mean, 0.0, 0.05);
}

class EveryFamily : public ::testing::TestWithParam<Family> {};

TEST_P(EveryFamily, FitPredictAndJsonRoundTrip) {
  const Family f = GetParam();
  Problem p;
  Task task;
  if (FamilySupports(f, Task::kSurvival)) {
    p = Survival(200, 11);
    task = Task::kSurvival;
  } else if (FamilySupports(f, Task::kClassification)) {
    p = Classification(200, 11);
    task = Task::kClassification;
  } else {
    p = Regression(200, 11);
    task = Task::kRegression;
  }
  const auto m = FitLearner(DefaultLearnerConfig(f), p.x, p.y, task, 4);
  const auto again = FitLearner(DefaultLearnerConfig(f), p.x, p.y, task, 4);
  const auto s = m->PredictScore(p.x);
  EXPECT_EQ(s, again->PredictScore(p.x));
  const auto back = FittedLearner::FromJson(m->ToJson());
  EXPECT_EQ(back->PredictScore(p.x), s);
  EXPECT_THROW(m->PredictScore(Matrix(1, p.x.cols() + 1)), ShapeMismatch);
  if (task == Task::kClassification) {
    EXPECT_GT(Auroc(s, p.y.y).value, 0.7);
    for (double v : s) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  } else if (task == Task::kSurvival) {
    EXPECT_GT(ConcordanceIndex(s, p.y.time, p.y.event).value, 0.6);
    EXPECT_EQ(back->PredictEventProb(p.x, 0.7), m->PredictEventProb(p.x, 0.7));
  } else {
    EXPECT_GT(RSquared(s, p.y.y).value, 0.5);
  }
}

INSTANTIATE_TEST_SUITE_P(Learners, EveryFamily, ::testing::ValuesIn(AllFamilies()),
                         [](const auto& info) { return std::string(ToString(info.param)); });

TEST(Learners, IncompatibleTaskAndBadParam) {
  const auto p = Classification(30, 12);
  EXPECT_THROW(FitLearner(DefaultLearnerConfig(Family::kCoxPh), p.x, p.y, Task::kClassification, 1),
               IncompatibleTask);
  auto cfg = DefaultLearnerConfig(Family::kKnn);
  cfg.hyperparams["k"] = 2.5;
  EXPECT_THROW(ValidateLearnerConfig(cfg, Task::kClassification), BadParam);
  cfg.hyperparams["bogus"] = 1;
  EXPECT_THROW(ValidateLearnerConfig(cfg, Task::kClassification), BadParam);
}

TEST(Boosting, TrainingLossDecreases) {
  const auto p = Classification(300, 13);
  const auto m =
      FitLearner(DefaultLearnerConfig(Family::kGradientBoosting), p.x, p.y, Task::kClassification, 1);
  const auto loss = m->TrainingLoss();
  ASSERT_FALSE(loss.empty());
  for (size_t i = 1; i < loss.size(); ++i) EXPECT_LE(loss[i], loss[i - 1] + 1e-12);
}

}  // namespace
}  // namespace prognos
