#include <gtest/gtest.h>

#include <cmath>

#include "prognos/error.h"
#include "prognos/space.h"
#include "prognos/study.h"
#include "test_util.h"

namespace prognos {
namespace {

TEST(Space, DecodeOfEncodeIsExact) {
  for (Task task : {Task::kClassification, Task::kRegression, Task::kSurvival}) {
    const auto space = SearchSpace::Default(task, 7, true);
    Rng rng(1);
    for (int i = 0; i < 300; ++i) {
      const auto c = space.Sample(rng);
      EXPECT_NO_THROW(space.Check(c, task));
      const auto v = space.Encode(c);
      ASSERT_EQ(v.size(), space.EncodedDim());
      for (double u : v) {
        EXPECT_GE(u, 0.0);
        EXPECT_LE(u, 1.0);
      }
      EXPECT_EQ(space.Decode(v), c);
      EXPECT_EQ(PipelineConfigFromJson(PipelineConfigToJson(c)), c);
    }
  }
}

TEST(Space, InactiveDimensionsAreHalf) {
  const auto space = SearchSpace::Default(Task::kClassification, 4, false);
  PipelineConfig c;
  c.learner = DefaultLearnerConfig(Family::kGaussianNb);
  const auto v = space.Encode(c);
  // Every hyperparameter dimension belongs to an inactive family.
  const size_t hp_dims = [&] {
    size_t n = 0;
    for (Family f : space.families) n += HyperparamRanges(f).size();
    return n;
  }();
  for (size_t i = v.size() - hp_dims; i < v.size(); ++i) EXPECT_EQ(v[i], 0.5);
}

TEST(Space, DefaultImputers) {
  EXPECT_EQ(SearchSpace::Default(Task::kClassification, 3, false).imputers,
            std::vector<ImputeMethod>{ImputeMethod::kMean});
  EXPECT_EQ(SearchSpace::Default(Task::kClassification, 3, true).imputers.size(), 5u);
  const auto surv = SearchSpace::Default(Task::kSurvival, 3, false);
  for (Family f : surv.families) EXPECT_TRUE(FamilySupports(f, Task::kSurvival));
}

TEST(Space, CheckRejectsOutOfSpace) {
  const auto space = SearchSpace::Default(Task::kClassification, 3, false);
  PipelineConfig c;
  c.learner = DefaultLearnerConfig(Family::kCoxPh);
  EXPECT_ANY_THROW(space.Check(c, Task::kClassification));
  c.learner = DefaultLearnerConfig(Family::kLogistic);
  c.stage = {Scaler::kNone, DimRed::kPca, 4};
  EXPECT_THROW(space.Check(c, Task::kClassification), BadParam);
  SearchSpace empty = space;
  empty.families.clear();
  EXPECT_THROW(empty.Validate(), EmptySpace);
  EXPECT_EQ(SearchSpace::FromJson(space.ToJson()), space);
}

TEST(QuantizeReal, SixSignificantDigitsIdempotent) {
  EXPECT_EQ(QuantizeReal(0.123456789), 0.123457);
  EXPECT_EQ(QuantizeReal(QuantizeReal(3.14159265)), QuantizeReal(3.14159265));
}

TEST(ExpectedImprovement, ClosedForm) {
  EXPECT_EQ(ExpectedImprovement(0.5, 0.0, 0.4), 0.5 - 0.4);
  EXPECT_EQ(ExpectedImprovement(0.3, 0.0, 0.4), 0.0);
  // mu == best: EI = sd * phi(0).
  EXPECT_NEAR(ExpectedImprovement(1.0, 0.2, 1.0), 0.2 / std::sqrt(2.0 * M_PI), 1e-15);
  EXPECT_GT(ExpectedImprovement(0.0, 1.0, 5.0), 0.0);
}

std::vector<TrialRecord> History(const SearchSpace& space, size_t n, uint64_t seed,
                                 double (*score)(const PipelineConfig&)) {
  std::vector<TrialRecord> h;
  Rng rng(seed);
  for (size_t i = 0; i < n; ++i) {
    TrialRecord t;
    t.trial_index = i;
    t.config = space.Sample(rng);
    t.mean_score = score(t.config);
    h.push_back(t);
  }
  return h;
}

TEST(Propose, RandomPhaseIsSeededSample) {
  const auto space = SearchSpace::Default(Task::kClassification, 5, true);
  Rng rng(42);
  EXPECT_EQ(ProposeNext({}, space, 42), space.Sample(rng));
}

TEST(Propose, FlatSurrogateFallsBackToMeanArgmax) {
  // Every observed score equal: the surrogate is constant with zero spread,
  // all expected improvements vanish and the first candidate wins.
  const auto space = SearchSpace::Default(Task::kClassification, 5, true);
  const auto h = History(space, 12, 3, [](const PipelineConfig&) { return 0.7; });
  SearchOptions o;
  o.n_init = 10;
  o.n_candidates = 50;
  o.surrogate_trees = 20;
  Rng rng(99);
  EXPECT_EQ(ProposeNext(h, space, 99, o), space.Sample(rng));
}

TEST(Propose, SurrogateFollowsTheScore) {
  const auto space = SearchSpace::Default(Task::kClassification, 5, true);
  auto score = [](const PipelineConfig& c) {
    return c.learner.family == Family::kGaussianNb ? 0.9 : 0.5;
  };
  const auto h = History(space, 40, 4, score);
  SearchOptions o;
  o.n_init = 10;
  o.n_candidates = 300;
  o.surrogate_trees = 50;
  int hits = 0;
  for (uint64_t seed = 0; seed < 10; ++seed) {
    hits += ProposeNext(h, space, seed, o).learner.family == Family::kGaussianNb;
  }
  EXPECT_GE(hits, 8);
}

TEST(Evaluate, NoLeakageAcrossFolds) {
  const Dataset d = testing::LogisticData(90, 5, 0.1);
  const auto task = TaskSpec::Classification();
  const auto folds = MakeFolds(d, 3, 1, task);
  PipelineConfig c;
  c.imputer.method = ImputeMethod::kIterative;
  c.stage = {Scaler::kStandard, DimRed::kNone, 0};
  c.learner = DefaultLearnerConfig(Family::kLogistic);
  std::vector<size_t> imputer_rows, stage_rows;
  FitAudit audit;
  audit.on_imputer_fit = [&](const Dataset& t) { imputer_rows.push_back(t.n_rows()); };
  audit.on_stage_fit = [&](const Matrix& m) { stage_rows.push_back(m.rows()); };
  EvalOptions opts;
  opts.audit = &audit;
  const auto rec = EvaluatePipeline(c, d, task, folds, 2, 7, opts);
  EXPECT_FALSE(rec.failed) << rec.error;
  ASSERT_EQ(imputer_rows.size(), 6u);
  for (size_t i = 0; i < 6; ++i) {
    EXPECT_EQ(imputer_rows[i], folds.TrainRows(i % 3).size());
    EXPECT_EQ(stage_rows[i], imputer_rows[i]);
  }
  EXPECT_EQ(rec.fold_scores.size(), 2u);
  EXPECT_EQ(rec.fold_scores[0].size(), 3u);
}

TEST(Evaluate, FailureIsRecordedNotThrown) {
  const Dataset d = testing::LogisticData(60, 6);
  const auto task = TaskSpec::Classification();
  PipelineConfig c;
  c.stage = {Scaler::kNone, DimRed::kVarianceThreshold, 1e9};
  c.learner = DefaultLearnerConfig(Family::kLogistic);
  const auto rec = EvaluatePipeline(c, d, task, MakeFolds(d, 3, 1, task), 1, 1);
  EXPECT_TRUE(rec.failed);
  EXPECT_FALSE(rec.error.empty());
  EXPECT_EQ(rec.mean_score, FailureScore(Metric::kAuroc));
  EXPECT_EQ(FailureScore(Metric::kRSquared), -1.0);
}

TEST(Study, DeterministicAndJsonRoundTrip) {
  const Dataset d = testing::LogisticData(120, 7, 0.05);
  const auto task = TaskSpec::Classification();
  const auto space = SearchSpace::Default(task.task, 7, true);
  SearchOptions o;
  o.n_init = 4;
  o.n_candidates = 40;
  o.surrogate_trees = 10;
  const auto a = RunStudy(d, task, space, 7, 3, 1, 5, o);
  o.threads = 1;
  const auto b = RunStudy(d, task, space, 7, 3, 1, 5, o);
  EXPECT_EQ(a.trials.size(), 7u);
  EXPECT_EQ(ReportToJson(a), ReportToJson(b));
  EXPECT_EQ(ReportToJson(ReportFromJson(ReportToJson(a))), ReportToJson(a));
  const auto board = a.Leaderboard();
  for (size_t i = 1; i < board.size(); ++i) {
    EXPECT_GE(a.trials[board[i - 1]].mean_score, a.trials[board[i]].mean_score);
  }
  EXPECT_EQ(*a.BestTrial(), board.front());
}

TEST(Study, SurvivalStudyRuns) {
  const Dataset d = testing::SurvivalData(150, 8);
  const auto task = TaskSpec::Survival(1.0);
  const auto space = SearchSpace::Default(task.task, 2, false);
  SearchOptions o;
  o.n_init = 3;
  o.n_candidates = 20;
  o.surrogate_trees = 10;
  const auto r = RunStudy(d, task, space, 4, 3, 1, 2, o);
  ASSERT_TRUE(r.BestTrial());
  EXPECT_GT(r.trials[*r.BestTrial()].mean_score, 0.6);
}

}  // namespace
}  // namespace prognos
