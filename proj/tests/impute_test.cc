#include <gtest/gtest.h>

#include <cmath>

#include "prognos/error.h"
#include "prognos/impute.h"
#include "test_util.h"

namespace prognos {
namespace {

using testing::Col;

// Three correlated Gaussians with MCAR holes in the first two.
Dataset Correlated(size_t n, uint64_t seed, double rate, Dataset* truth = nullptr) {
  Schema s = {Col("a"), Col("b"), Col("c")};
  Dataset full(s, n), d(s, n);
  Rng rng(seed);
  for (size_t r = 0; r < n; ++r) {
    const double z = rng.Normal();
    const double v[] = {z + 0.3 * rng.Normal(), -z + 0.3 * rng.Normal(), z + 0.5 * rng.Normal()};
    for (size_t c = 0; c < 3; ++c) {
      full.set(r, c, v[c]);
      if (c < 2 && rng.Uniform() < rate) continue;
      d.set(r, c, v[c]);
    }
  }
  if (truth) *truth = full;
  return d;
}

double MaskedRmse(const Dataset& imputed, const Dataset& truth, const Dataset& holes) {
  double ss = 0.0;
  size_t n = 0;
  for (size_t r = 0; r < holes.n_rows(); ++r) {
    for (size_t c = 0; c < holes.n_cols(); ++c) {
      if (!holes.is_missing(r, c)) continue;
      const double e = imputed.value(r, c) - truth.value(r, c);
      ss += e * e;
      ++n;
    }
  }
  return std::sqrt(ss / n);
}

TEST(Impute, SimpleMethodsFillWithColumnStatistic) {
  Schema s = {Col("x"), Col("c", ColumnKind::kCategorical, ColumnRole::kFeature, {"p", "q", "r"})};
  Dataset d(s, 5);
  const double xs[] = {1, 2, 10, 4};
  for (size_t r = 0; r < 4; ++r) d.set(r, 0, xs[r]);
  d.set(0, 1, 2);
  d.set(1, 1, 1);
  d.set(2, 1, 1);
  d.set(3, 1, 2);
  const auto mean = FitImputer(d, {ImputeMethod::kMean}, 0).Transform(d);
  const auto median = FitImputer(d, {ImputeMethod::kMedian}, 0).Transform(d);
  EXPECT_EQ(mean.value(4, 0), 4.25);
  EXPECT_EQ(median.value(4, 0), 3.0);
  EXPECT_EQ(mean.value(4, 1), 1.0);  // tie between q and r: lowest level
  EXPECT_EQ(mean.MissingCount(), 0u);
}

TEST(Impute, ObservedCellsUnchangedAndNonFeaturesUntouched) {
  const Dataset d = testing::LogisticData(150, 1, 0.2);
  for (auto m : {ImputeMethod::kMean, ImputeMethod::kMostFrequent, ImputeMethod::kIterative,
                 ImputeMethod::kAuto}) {
    const Dataset out = FitImputer(d, {m}, 3).Transform(d);
    for (size_t r = 0; r < d.n_rows(); ++r) {
      for (size_t c = 0; c < d.n_cols(); ++c) {
        if (!d.is_missing(r, c)) {
          EXPECT_EQ(out.value(r, c), d.value(r, c));
        } else {
          EXPECT_FALSE(out.is_missing(r, c));
        }
      }
      // Categorical fills are valid levels; binary fills are 0/1.
      EXPECT_TRUE(out.value(r, 3) == 0.0 || out.value(r, 3) == 1.0);
      const double c = out.value(r, 4);
      EXPECT_TRUE(c == 0.0 || c == 1.0 || c == 2.0);
    }
  }
}

TEST(Impute, IterativeBeatsMeanOnCorrelatedData) {
  int wins = 0;
  for (uint64_t seed = 0; seed < 5; ++seed) {
    Dataset truth;
    const Dataset d = Correlated(300, seed, 0.2, &truth);
    const double mean = MaskedRmse(FitImputer(d, {ImputeMethod::kMean}, seed).Transform(d), truth, d);
    const double it =
        MaskedRmse(FitImputer(d, {ImputeMethod::kIterative}, seed).Transform(d), truth, d);
    wins += it < mean;
  }
  EXPECT_EQ(wins, 5);
}

TEST(Impute, IterativeConvergesAndIsDeterministic) {
  const Dataset d = Correlated(200, 4, 0.2);
  // Rows missing both strongly correlated columns contract slowly; allow
  // enough sweeps to reach the tolerance.
  ImputerConfig cfg{ImputeMethod::kIterative};
  cfg.max_rounds = 60;
  const auto a = FitImputer(d, cfg, 1);
  const auto b = FitImputer(d, cfg, 1);
  EXPECT_EQ(a.Transform(d), b.Transform(d));
  EXPECT_TRUE(a.converged());
  EXPECT_LT(a.final_change(), cfg.tol);
  EXPECT_LE(a.rounds_run(), cfg.max_rounds);
  // Columns with more holes are visited first.
  EXPECT_EQ(a.visit_order().size(), 2u);
}

TEST(Impute, AutoSelectsAModelPerColumn) {
  const Dataset d = Correlated(200, 5, 0.2);
  const auto imp = FitImputer(d, {ImputeMethod::kAuto}, 2);
  const auto sel = imp.SelectedModels();
  ASSERT_EQ(sel.size(), 2u);
  // Strongly linear relations: the column mean is never the best choice.
  for (const auto& [name, model] : sel) EXPECT_NE(model, ColumnModel::kColumnMean) << name;
}

TEST(Impute, JsonRoundTripAndTransformOfNewRows) {
  const Dataset d = Correlated(200, 6, 0.2);
  const Dataset fresh = Correlated(50, 7, 0.3);
  for (auto m : {ImputeMethod::kMedian, ImputeMethod::kIterative, ImputeMethod::kAuto}) {
    const auto imp = FitImputer(d, {m}, 9);
    const auto back = FittedImputer::FromJson(imp.ToJson());
    EXPECT_EQ(back.Transform(fresh), imp.Transform(fresh));
  }
}

TEST(Impute, AllMissingColumnThrows) {
  Schema s = {Col("a"), Col("b")};
  Dataset d(s, 4);
  for (size_t r = 0; r < 4; ++r) d.set(r, 0, r);
  EXPECT_THROW(FitImputer(d, {ImputeMethod::kMean}, 0), AllMissingColumn);
}

TEST(Impute, RepeatedImputeCount) {
  const Dataset d = Correlated(60, 8, 0.2);
  const auto copies = RepeatedImpute(d, {ImputeMethod::kAuto}, 3, 10);
  ASSERT_EQ(copies.size(), 3u);
  for (const auto& c : copies) EXPECT_EQ(c.MissingCount(), 0u);
}

TEST(Impute, ConfigValidation) {
  ImputerConfig cfg{ImputeMethod::kIterative};
  cfg.max_rounds = 0;
  EXPECT_THROW(cfg.Validate(), BadParam);
  cfg = ImputerConfig{ImputeMethod::kAuto};
  cfg.candidate_models.clear();
  EXPECT_THROW(cfg.Validate(), BadParam);
  EXPECT_EQ(ImputerConfigFromJson(ImputerConfigToJson(ImputerConfig{ImputeMethod::kAuto})),
            ImputerConfig{ImputeMethod::kAuto});
}

}  // namespace
}  // namespace prognos
