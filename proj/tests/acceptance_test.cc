// Acceptance suite: one PASS/FAIL line per criterion, with the measured
// quantities next to the pinned tolerances. Exit status is nonzero when any
// criterion fails.

#include <sys/stat.h>

#include <algorithm>
#include <chrono>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "httplib.h"
#include "prognos/ensemble.h"
#include "prognos/error.h"
#include "prognos/explain.h"
#include "prognos/learners.h"
#include "prognos/metrics.h"
#include "prognos/serve.h"
#include "prognos/studio.h"
#include "prognos/study.h"
#include "prognos/tabular.h"

namespace {

using namespace prognos;
namespace fs = std::filesystem;

// ---- pinned tolerances -----------------------------------------------------
constexpr double kMetricTol = 1e-12;
constexpr double kMetricSeconds = 10.0;
constexpr double kFdStep = 1e-5;
constexpr double kGradRelTol = 1e-5;
constexpr double kGradSeconds = 30.0;
constexpr double kCoxRelTol = 0.10;
constexpr double kCoxCIndexTol = 0.02;
constexpr double kCoxSeconds = 60.0;
constexpr double kValueOfMlMargin = 0.05;
constexpr double kValueOfMlSeconds = 300.0;
constexpr int kImputeWinsNeeded = 18;
constexpr double kImputeSeconds = 60.0;
constexpr double kShapleyRelTol = 0.10;
constexpr double kShapleyMinTrue = 0.1;
constexpr double kShapleySeconds = 30.0;
constexpr double kVoiTol = 0.02;
constexpr double kWeightSumTol = 1e-12;

struct Outcome_ {
  bool pass = false;
  std::string detail;
};

double Seconds(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string Fmt(const char* fmt, ...) __attribute__((format(printf, 1, 2)));
std::string Fmt(const char* fmt, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, fmt);
  std::vsnprintf(buf, sizeof buf, fmt, ap);
  va_end(ap);
  return buf;
}

ColumnSchema Col(std::string name, ColumnKind kind = ColumnKind::kNumeric,
                 ColumnRole role = ColumnRole::kFeature, std::vector<std::string> cats = {}) {
  return {std::move(name), kind, role, std::move(cats)};
}

// ---- 1: metric oracles -----------------------------------------------------

Outcome_ MetricOracles() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(20240101);
  double auc_err = 0.0, c_err = 0.0;
  size_t brier_mismatch = 0, instances = 0;
  for (int rep = 0; rep < 200; ++rep) {
    const size_t n = 2 + rng.Below(49);  // n <= 50
    std::vector<double> s(n), y(n), t(n);
    std::vector<int> e(n);
    for (size_t i = 0; i < n; ++i) {
      s[i] = rng.Below(4) == 0 ? 0.5 : std::round(rng.Uniform() * 10.0) / 10.0;  // ties
      y[i] = static_cast<double>(rng.Below(2));
      t[i] = 1.0 + static_cast<double>(rng.Below(n / 2 + 1));  // tied times
      e[i] = rng.Uniform() < 0.6 ? 1 : 0;                      // censoring
    }
    y[0] = 1.0;
    y[n - 1] = 0.0;
    e[0] = 1;
    t[0] = 0.5;
    double num = 0.0, den = 0.0;
    for (size_t i = 0; i < n; ++i) {
      for (size_t j = 0; j < n; ++j) {
        if (y[i] == 1.0 && y[j] == 0.0) {
          den += 1.0;
          num += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
        }
      }
    }
    auc_err = std::max(auc_err, std::abs(Auroc(s, y).value - num / den));
    num = den = 0.0;
    for (size_t i = 0; i < n; ++i) {
      for (size_t j = 0; j < n; ++j) {
        if (e[i] == 1 && t[i] < t[j]) {
          den += 1.0;
          num += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
        }
      }
    }
    c_err = std::max(c_err, std::abs(ConcordanceIndex(s, t, e).value - num / den));
    double sum = 0.0;
    for (size_t i = 0; i < n; ++i) sum += (s[i] - y[i]) * (s[i] - y[i]);
    brier_mismatch += Brier(s, y).value != sum / static_cast<double>(n);
    ++instances;
  }
  const double secs = Seconds(t0);
  const bool ok = auc_err <= kMetricTol && c_err <= kMetricTol && brier_mismatch == 0 &&
                  secs < kMetricSeconds;
  return {ok, Fmt("%zu instances; max |auroc - oracle| = %.3g, max |c_index - oracle| = %.3g "
                  "(tol %.0e); brier mismatches = %zu; %.2f s (limit %.0f s)",
                  instances, auc_err, c_err, kMetricTol, brier_mismatch, secs, kMetricSeconds)};
}

// ---- 2: gradient checks ----------------------------------------------------

Matrix RandomMatrix(size_t n, size_t p, Rng& rng) {
  Matrix m(n, p);
  for (auto& v : m.data()) v = rng.Normal();
  return m;
}

Outcome_ GradientChecks() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(77);
  const size_t n = 60, p = 3;
  const Matrix x = RandomMatrix(n, p, rng);
  Outcome cls, reg, surv;
  for (size_t i = 0; i < n; ++i) {
    cls.y.push_back(rng.Below(2));
    reg.y.push_back(x(i, 0) - 0.5 * x(i, 1) + rng.Normal());
    surv.time.push_back(0.1 + rng.Uniform() * 5.0);
    surv.event.push_back(rng.Uniform() < 0.7);
  }
  struct Case {
    Family family;
    const Outcome* y;
  };
  const Case cases[] = {{Family::kLogistic, &cls},
                        {Family::kLinearRidge, &reg},
                        {Family::kCoxPh, &surv},
                        {Family::kWeibullAft, &surv}};
  std::string detail;
  bool ok = true;
  for (const auto& c : cases) {
    auto cfg = DefaultLearnerConfig(c.family);
    cfg.hyperparams["l2"] = 0.3;
    const size_t k = ParameterCount(c.family, p);
    double worst = 0.0;
    for (int point = 0; point < 10; ++point) {
      std::vector<double> theta(k);
      for (auto& v : theta) v = 0.5 * rng.Normal();
      const auto g = LossGradient(cfg, theta, x, *c.y);
      double diff2 = 0.0, g2 = 0.0, fd2 = 0.0;
      for (size_t i = 0; i < k; ++i) {
        auto up = theta, dn = theta;
        up[i] += kFdStep;
        dn[i] -= kFdStep;
        const double fd =
            (LossValue(cfg, up, x, *c.y) - LossValue(cfg, dn, x, *c.y)) / (2.0 * kFdStep);
        diff2 += (fd - g[i]) * (fd - g[i]);
        g2 += g[i] * g[i];
        fd2 += fd * fd;
      }
      const double rel = std::sqrt(diff2) / std::max({std::sqrt(g2), std::sqrt(fd2), 1e-300});
      worst = std::max(worst, rel);
    }
    ok = ok && worst <= kGradRelTol;
    detail += Fmt("%s %.2g; ", std::string(ToString(c.family)).c_str(), worst);
  }
  const double secs = Seconds(t0);
  ok = ok && secs < kGradSeconds;
  return {ok, "max relative error over 10 points: " + detail +
                  Fmt("(tol %.0e, h = %.0e); %.2f s (limit %.0f s)", kGradRelTol, kFdStep, secs,
                      kGradSeconds)};
}

// ---- 3: Cox recovery -------------------------------------------------------

Outcome_ CoxRecovery() {
  const auto t0 = std::chrono::steady_clock::now();
  const size_t n = 5000;
  const double beta[2] = {0.8, -0.5};
  Rng rng(31337);
  Matrix x = RandomMatrix(n, 2, rng);
  std::vector<double> t_event(n), u_censor(n), lp(n);
  for (size_t i = 0; i < n; ++i) {
    lp[i] = beta[0] * x(i, 0) + beta[1] * x(i, 1);
    double u;
    do u = rng.Uniform(); while (u <= 0.0);
    t_event[i] = -std::log(u) / std::exp(lp[i]);  // unit exponential baseline
    u_censor[i] = rng.Uniform();
  }
  // Uniform censoring on (0, c_max); c_max bisected so 30% are censored.
  auto censored_fraction = [&](double cmax) {
    size_t c = 0;
    for (size_t i = 0; i < n; ++i) c += u_censor[i] * cmax < t_event[i];
    return static_cast<double>(c) / n;
  };
  double lo = 0.01, hi = 1000.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = std::sqrt(lo * hi);
    (censored_fraction(mid) > 0.30 ? lo : hi) = mid;
  }
  const double cmax = hi;
  Outcome y;
  for (size_t i = 0; i < n; ++i) {
    const double c = u_censor[i] * cmax;
    y.time.push_back(std::max(std::min(t_event[i], c), 1e-12));
    y.event.push_back(t_event[i] <= c);
  }
  auto cfg = DefaultLearnerConfig(Family::kCoxPh);
  cfg.hyperparams["l2"] = 0.0;
  const auto model = FitLearner(cfg, x, y, Task::kSurvival, 1);
  const auto b = FittedParameters(*model);
  const double rel0 = std::abs(b[0] - beta[0]) / std::abs(beta[0]);
  const double rel1 = std::abs(b[1] - beta[1]) / std::abs(beta[1]);
  const double c_model = ConcordanceIndex(model->PredictScore(x), y.time, y.event).value;
  const double c_oracle = ConcordanceIndex(lp, y.time, y.event).value;
  const double secs = Seconds(t0);
  const bool ok = rel0 <= kCoxRelTol && rel1 <= kCoxRelTol &&
                  std::abs(c_model - c_oracle) <= kCoxCIndexTol && secs < kCoxSeconds;
  return {ok, Fmt("censored %.3f; beta_hat = (%.4f, %.4f), rel err (%.3f, %.3f) (tol %.2f); "
                  "c_index model %.4f vs oracle %.4f (tol %.2f); %.2f s (limit %.0f s)",
                  censored_fraction(cmax), b[0], b[1], rel0, rel1, kCoxRelTol, c_model, c_oracle,
                  kCoxCIndexTol, secs, kCoxSeconds)};
}

// ---- 4: value of ML --------------------------------------------------------

Dataset XorData(size_t n, uint64_t seed) {
  Schema s = {Col("x1"), Col("x2"), Col("z1"), Col("z2"), Col("z3"),
              Col("y", ColumnKind::kBinary, ColumnRole::kTarget)};
  Dataset d(s, n);
  Rng rng(seed);
  for (size_t r = 0; r < n; ++r) {
    const double x1 = rng.Normal(), x2 = rng.Normal();
    double y = (x1 > 0) != (x2 > 0) ? 1.0 : 0.0;
    if (rng.Uniform() < 0.1) y = 1.0 - y;  // label noise
    d.set(r, 0, x1);
    d.set(r, 1, x2);
    for (size_t j = 2; j < 5; ++j) d.set(r, j, rng.Normal());
    d.set(r, 5, y);
  }
  return d;
}

Outcome_ ValueOfMl() {
  const auto t0 = std::chrono::steady_clock::now();
  const Dataset d = XorData(2000, 4242);
  const auto split = SplitHoldout(d, 0.25, 1, true);
  const auto task = TaskSpec::Classification();
  const SearchSpace full = SearchSpace::Default(task.task, 5, false);
  SearchSpace logistic = full;
  logistic.families = {Family::kLogistic};
  auto held_out = [&](const SearchSpace& space, std::string* what) {
    const auto report = RunStudy(split.train, task, space, 50, 3, 1, 99);
    const auto& best = report.trials[report.BestTrial().value()];
    *what = std::string(ToString(best.config.learner.family));
    const auto model = FittedPipeline::Fit(best.config, split.train, task, best.seed);
    return Auroc(model.PredictRisk(split.test), ExtractOutcome(split.test, task).y).value;
  };
  std::string best_family, logistic_family;
  const double auc_full = held_out(full, &best_family);
  const double auc_logistic = held_out(logistic, &logistic_family);
  const double secs = Seconds(t0);
  const bool ok = auc_full - auc_logistic >= kValueOfMlMargin && secs < kValueOfMlSeconds;
  return {ok, Fmt("held-out auroc: best pipeline (%s) %.4f vs best logistic-only %.4f, "
                  "margin %.4f (need >= %.2f); %.1f s (limit %.0f s)",
                  best_family.c_str(), auc_full, auc_logistic, auc_full - auc_logistic,
                  kValueOfMlMargin, secs, kValueOfMlSeconds)};
}

// ---- 5: imputation value ---------------------------------------------------

Outcome_ ImputationValue() {
  const auto t0 = std::chrono::steady_clock::now();
  const size_t n = 500, p = 5;
  int wins = 0;
  std::string detail;
  for (uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(1000 + seed);
    // Equicorrelated Gaussian, rho = 0.7: x_j = sqrt(rho) z + sqrt(1 - rho) e_j.
    Schema s;
    for (size_t j = 0; j < p; ++j) s.push_back(Col("v" + std::to_string(j)));
    Dataset truth(s, n), holes(s, n);
    for (size_t r = 0; r < n; ++r) {
      const double z = rng.Normal();
      for (size_t j = 0; j < p; ++j) {
        const double v = std::sqrt(0.7) * z + std::sqrt(0.3) * rng.Normal();
        truth.set(r, j, v);
        if (rng.Uniform() >= 0.2) holes.set(r, j, v);  // 20% MCAR
      }
    }
    auto rmse = [&](ImputeMethod m) {
      const Dataset out = FitImputer(holes, ImputerConfig{m}, seed).Transform(holes);
      double ss = 0.0;
      size_t k = 0;
      for (size_t r = 0; r < n; ++r) {
        for (size_t j = 0; j < p; ++j) {
          if (!holes.is_missing(r, j)) continue;
          ss += (out.value(r, j) - truth.value(r, j)) * (out.value(r, j) - truth.value(r, j));
          ++k;
        }
      }
      return std::sqrt(ss / k);
    };
    const double mean = rmse(ImputeMethod::kMean);
    const double iter = rmse(ImputeMethod::kIterative);
    wins += iter < mean;
    if (seed == 0) detail = Fmt("seed 0 rmse iterative %.4f vs mean %.4f; ", iter, mean);
  }
  const double secs = Seconds(t0);
  const bool ok = wins >= kImputeWinsNeeded && secs < kImputeSeconds;
  return {ok, detail + Fmt("iterative wins %d/20 (need >= %d); %.2f s (limit %.0f s)", wins,
                           kImputeWinsNeeded, secs, kImputeSeconds)};
}

// ---- 6: reproducibility ----------------------------------------------------

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Dataset MixedData(size_t n, uint64_t seed, double missing) {
  Schema s = {Col("age"), Col("bmi"), Col("sex", ColumnKind::kBinary),
              Col("smoking", ColumnKind::kCategorical, ColumnRole::kFeature,
                  {"current", "former", "never"}),
              Col("outcome", ColumnKind::kBinary, ColumnRole::kTarget)};
  Dataset d(s, n);
  Rng rng(seed);
  for (size_t r = 0; r < n; ++r) {
    const double age = 40 + 10 * rng.Normal(), bmi = 27 + 4 * rng.Normal();
    const double sex = rng.Below(2), smoke = rng.Below(3);
    const double lp = 0.08 * (age - 40) + 0.1 * (bmi - 27) + 0.6 * (smoke == 0) - 0.3 * sex;
    const double vals[] = {age, bmi, sex, smoke,
                           rng.Uniform() < 1 / (1 + std::exp(-lp)) ? 1.0 : 0.0};
    for (size_t j = 0; j < 5; ++j) {
      if (j < 4 && rng.Uniform() < missing) continue;
      d.set(r, j, vals[j]);
    }
  }
  return d;
}

Outcome_ Reproducibility(const fs::path& work) {
  const auto t0 = std::chrono::steady_clock::now();
  fs::create_directories(work);
  const Dataset d = MixedData(300, 5, 0.1);
  SaveCsv(work / "cohort.csv", d);
  std::ofstream(work / "schema.json") << SchemaToJson(d.schema()).dump(2);
  auto train = [&](const std::string& out) {
    fs::remove_all(work / out);
    const std::string cmd = std::string(PROGNOS_CLI_PATH) + " train --data " +
                            (work / "cohort.csv").string() + " --schema " +
                            (work / "schema.json").string() +
                            " --task classification --target outcome --budget 14 --folds 3"
                            " --imputations 2 --seed 11 --out " +
                            (work / out).string() + " 2>/dev/null";
    return std::system(cmd.c_str());
  };
  const int rc1 = train("run_a");
  const int rc2 = train("run_b");
  if (rc1 != 0 || rc2 != 0) return {false, Fmt("train exited with %d / %d", rc1, rc2)};
  const std::string sa = Slurp(work / "run_a/study.json"), sb = Slurp(work / "run_b/study.json");
  const std::string ma = Slurp(work / "run_a/model.json"), mb = Slurp(work / "run_b/model.json");
  const bool ok = !sa.empty() && !ma.empty() && sa == sb && ma == mb;
  return {ok, Fmt("two `train` runs: study.json %s (%zu bytes), model.json %s (%zu bytes); %.1f s",
                  sa == sb ? "identical" : "DIFFERENT", sa.size(),
                  ma == mb ? "identical" : "DIFFERENT", ma.size(), Seconds(t0))};
}

// ---- 7: Shapley fidelity ---------------------------------------------------

Outcome_ ShapleyFidelity() {
  const auto t0 = std::chrono::steady_clock::now();
  const size_t n = 400, p = 6;
  Schema s;
  for (size_t j = 0; j < p; ++j) s.push_back(Col("f" + std::to_string(j)));
  s.push_back(Col("y", ColumnKind::kNumeric, ColumnRole::kTarget));
  Dataset d(s, n);
  Rng rng(7);
  const double beta[p] = {1.5, -1.0, 0.5, 0.25, 0.0, -2.0};
  for (size_t r = 0; r < n; ++r) {
    double y = 0.3;
    for (size_t j = 0; j < p; ++j) {
      const double v = rng.Normal();
      d.set(r, j, v);
      y += beta[j] * v;
    }
    d.set(r, p, y + 0.2 * rng.Normal());
  }
  const auto task = TaskSpec::Regression();
  PipelineConfig cfg;
  cfg.learner = DefaultLearnerConfig(Family::kLinearRidge);
  cfg.learner.hyperparams["l2"] = 1e-4;
  EnsembleModel model;
  model.task = task;
  model.members.push_back(FittedPipeline::Fit(cfg, d, task, 1));
  model.weights = {1.0};
  model.trial_indices = {0};
  // Analytic attributions use the fitted coefficients.
  const auto theta = FittedParameters(model.members[0].learner());
  const Dataset background = SampleBackground(d, d.FeaturesOnly().schema(), 3, 100);
  std::vector<double> bg_mean(p, 0.0);
  for (size_t r = 0; r < background.n_rows(); ++r) {
    for (size_t j = 0; j < p; ++j) bg_mean[j] += background.value(r, j) / background.n_rows();
  }
  double worst_rel = 0.0, worst_la = 0.0;
  size_t checked = 0;
  bool ok = true;
  for (size_t row : {0, 17, 123, 256, 399}) {
    const Dataset x = d.SelectRows(std::vector<size_t>{row});
    const auto e = SampledShapley(model, x, background, 2000, 2024);
    double total = 0.0;
    for (size_t j = 0; j < p; ++j) {
      const double truth = theta[1 + j] * (x.value(0, j) - bg_mean[j]);
      total += e.values[j];
      if (std::abs(truth) > kShapleyMinTrue) {
        const double rel = std::abs(e.values[j] - truth) / std::abs(truth);
        worst_rel = std::max(worst_rel, rel);
        ok = ok && rel <= kShapleyRelTol;
        ++checked;
      }
    }
    const double gap = std::abs(total - (e.prediction - e.expected_value));
    const double allowed = 3.0 * e.total_std_error;
    worst_la = std::max(worst_la, gap - allowed);
    ok = ok && gap <= allowed + 1e-12;
  }
  const double secs = Seconds(t0);
  ok = ok && secs < kShapleySeconds;
  return {ok, Fmt("%zu components with |true| > %.1f, worst relative error %.3g (tol %.2f); "
                  "local accuracy worst (gap - 3 SE) %.3g (<= 0); %.2f s (limit %.0f s)",
                  checked, kShapleyMinTrue, worst_rel, kShapleyRelTol, worst_la, secs,
                  kShapleySeconds)};
}

// ---- 8: VoI curve ----------------------------------------------------------

Outcome_ VoiCurveCheck() {
  const auto t0 = std::chrono::steady_clock::now();
  const size_t n = 600, p = 20;
  // Class-conditional Gaussians: x_j | y ~ N(mu_j * y, 1), so Cohen's d of
  // feature j is mu_j in expectation. Three informative features.
  const double mu[3] = {1.3, 0.85, 0.65};
  Schema s;
  for (size_t j = 0; j < p; ++j) s.push_back(Col("f" + std::to_string(j)));
  s.push_back(Col("y", ColumnKind::kBinary, ColumnRole::kTarget));
  Dataset d(s, n);
  Rng rng(808);
  for (size_t r = 0; r < n; ++r) {
    const double y = r % 2;
    for (size_t j = 0; j < p; ++j) d.set(r, j, rng.Normal() + (j < 3 ? mu[j] * y : 0.0));
    d.set(r, p, y);
  }
  const std::vector<double> thresholds = {1.0, 0.9, 0.8, 0.7, 0.6, 0.5};
  VoiOptions opts;
  const auto curve = ValueOfInformation(d, TaskSpec::Classification(), thresholds, 5, opts);
  bool nested = true;
  for (size_t i = 1; i < curve.points.size(); ++i) {
    const auto& small = curve.points[i - 1].features;
    const auto& big = curve.points[i].features;
    nested = nested && small.size() <= big.size();
    for (const auto& f : small) {
      nested = nested && std::find(big.begin(), big.end(), f) != big.end();
    }
  }
  std::vector<std::string> informative = {"f0", "f1", "f2"};
  const VoiPoint* exact = nullptr;
  std::string counts;
  for (const auto& pt : curve.points) {
    auto f = pt.features;
    std::sort(f.begin(), f.end());
    if (!exact && f == informative) exact = &pt;
    counts += Fmt("%.1f:%zu(%.3f) ", pt.threshold, pt.features.size(), pt.score);
  }
  const double secs = Seconds(t0);
  if (!exact) {
    return {false, "no threshold selects exactly the informative set; counts " + counts};
  }
  const double gap = std::abs(exact->score - curve.full_score);
  const bool ok = nested && gap <= kVoiTol;
  return {ok, Fmt("nested %s; threshold %.1f selects {f0,f1,f2}: auroc %.4f vs full %.4f, "
                  "|diff| %.4f (tol %.2f); thresholds ", nested ? "yes" : "NO",
                  exact->threshold, exact->score, curve.full_score, gap, kVoiTol) +
                  counts + Fmt("; %.1f s", secs)};
}

// ---- 9: DCA closed forms ---------------------------------------------------

Outcome_ DcaClosedForms() {
  Rng rng(9);
  const auto ts = DefaultNetBenefitThresholds();
  size_t none_bad = 0, all_bad = 0, perfect_bad = 0, checks = 0;
  for (int rep = 0; rep < 50; ++rep) {
    const size_t n = 20 + rng.Below(300);
    std::vector<double> probs(n), labels(n);
    double pos = 0.0;
    for (size_t i = 0; i < n; ++i) {
      labels[i] = rng.Uniform() < 0.05 + 0.5 * rng.Uniform() ? 1.0 : 0.0;
      probs[i] = rng.Uniform();
      pos += labels[i];
    }
    const double p = pos / static_cast<double>(n);
    const auto c = NetBenefit(probs, labels, ts);
    const auto perfect = NetBenefit(labels, labels, ts);
    for (size_t i = 0; i < ts.size(); ++i) {
      none_bad += c.treat_none_nb[i] != 0.0;
      all_bad += c.treat_all_nb[i] != p - (1.0 - p) * ts[i] / (1.0 - ts[i]);
      perfect_bad += perfect.model_nb[i] != p;
      ++checks;
    }
  }
  const bool ok = none_bad == 0 && all_bad == 0 && perfect_bad == 0;
  return {ok, Fmt("%zu threshold checks over 50 cohorts; exact mismatches: treat-none %zu, "
                  "treat-all %zu, perfect classifier %zu",
                  checks, none_bad, all_bad, perfect_bad)};
}

// ---- 10: ensemble properties -----------------------------------------------

Outcome_ EnsembleProperties() {
  const auto t0 = std::chrono::steady_clock::now();
  const Dataset d = MixedData(400, 10, 0.05);
  const auto task = TaskSpec::Classification();
  const auto report = RunStudy(d, task, SearchSpace::Default(task.task, 6, true), 16, 3, 1, 21);
  const auto e = BuildEnsemble(report, d, 5);
  double wsum = 0.0;
  for (double w : e.weights) wsum += w;
  const auto risk = e.PredictRisk(d);
  std::vector<std::vector<double>> member_risk;
  for (const auto& m : e.members) member_risk.push_back(m.PredictRisk(d));
  size_t outside = 0;
  for (size_t r = 0; r < d.n_rows(); ++r) {
    double lo = INFINITY, hi = -INFINITY;
    for (const auto& mr : member_risk) {
      lo = std::min(lo, mr[r]);
      hi = std::max(hi, mr[r]);
    }
    outside += !(risk[r] >= lo && risk[r] <= hi);
  }
  const auto single = BuildEnsemble(report, d, 1);
  const auto& best = report.trials[report.BestTrial().value()];
  const auto alone = FittedPipeline::Fit(best.config, d, task, best.seed);
  const bool same = single.PredictRisk(d) == alone.PredictRisk(d) && single.weights[0] == 1.0;
  const bool ok = std::abs(wsum - 1.0) <= kWeightSumTol && outside == 0 && same;
  return {ok, Fmt("m = %zu: |sum w - 1| = %.2g (tol %.0e); rows outside member hull %zu/%zu; "
                  "m = 1 equals best pipeline exactly: %s; %.1f s",
                  e.members.size(), std::abs(wsum - 1.0), kWeightSumTol, outside, d.n_rows(),
                  same ? "yes" : "NO", Seconds(t0))};
}

// ---- 11: serving contract --------------------------------------------------

std::vector<std::pair<std::string, std::string>> Snapshot(const fs::path& dir) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    out.emplace_back(entry.path().filename().string(), HashHex(Slurp(entry.path())));
  }
  std::sort(out.begin(), out.end());
  return out;
}

Outcome_ ServingContract(const fs::path& work) {
  const auto t0 = std::chrono::steady_clock::now();
  const Dataset d = MixedData(300, 12, 0.1);
  const auto task = TaskSpec::Classification();
  auto report = RunStudy(d, task, SearchSpace::Default(task.task, 6, true), 10, 3, 1, 3);
  const auto model = BuildEnsemble(report, d, 3);
  report.ensemble = Summarize(model);
  const fs::path dir = work / "serve_bundle";
  fs::remove_all(dir);
  SaveStudy(report, model, d, dir);
  for (const auto& entry : fs::directory_iterator(dir)) {
    fs::permissions(entry.path(), fs::perms::owner_read | fs::perms::group_read |
                                      fs::perms::others_read);
  }
  const auto before = Snapshot(dir);
  const Service svc = Service::FromBundle(dir);
  if (!svc.loaded()) return {false, "bundle failed to load: " + svc.load_error()};
  const auto offline = LoadStudy(dir);

  using nlohmann::json;
  std::vector<std::string> failures;
  Rng rng(4);
  size_t requests = 0;
  for (int i = 0; i < 25; ++i) {
    json f = {{"age", 30 + 25 * rng.Uniform()},
              {"bmi", 20 + 12 * rng.Uniform()},
              {"sex", static_cast<int>(rng.Below(2))},
              {"smoking", std::vector<std::string>{"current", "former", "never"}[rng.Below(3)]}};
    const std::string body = json{{"features", f}}.dump();
    const auto a = svc.Predict(body);
    const auto b = svc.Predict(body);
    requests += 2;
    if (a.status != 200 || a.body != b.body) failures.push_back("predict not deterministic");
    const double risk = json::parse(a.body)["risk"];
    const double lib = offline.model.PredictRisk(svc.RowFromFeatures(f))[0];
    if (risk != lib) failures.push_back("predict differs from the library");

    json over = {{"age", 30 + 25 * rng.Uniform()}, {"smoking", "never"}};
    const auto w = json::parse(svc.WhatIf(json{{"features", f}, {"overrides", over}}.dump()).body);
    json merged = f;
    for (const auto& [k, v] : over.items()) merged[k] = v;
    const double base = json::parse(svc.Predict(body).body)["risk"];
    const double now = json::parse(svc.Predict(json{{"features", merged}}.dump()).body)["risk"];
    requests += 3;
    if (w["delta"].get<double>() != now - base || w["base_risk"].get<double>() != base ||
        w["new_risk"].get<double>() != now) {
      failures.push_back("whatif delta is not predict(merged) - predict(base)");
    }

    // Omitted feature vs its imputed value supplied explicitly, one member
    // at a time (every member carries its own fitted imputer).
    json omitted = f;
    omitted.erase("bmi");
    const Dataset row = svc.RowFromFeatures(omitted);
    for (const auto& m : offline.model.members) {
      const Dataset filled = m.imputer().Transform(row);
      json given = omitted;
      given["bmi"] = filled.value(0, filled.ColumnIndex("bmi"));
      const Dataset explicit_row = svc.RowFromFeatures(given);
      if (m.PredictRisk(row) != m.PredictRisk(explicit_row)) {
        failures.push_back("member imputation differs from explicit value");
      }
    }
    const double served = json::parse(svc.Predict(json{{"features", omitted}}.dump()).body)["risk"];
    ++requests;
    if (served != offline.model.PredictRisk(row)[0]) {
      failures.push_back("served risk with a missing feature differs from the library");
    }
  }
  // The same contract over a real socket.
  HttpServer server(svc);
  const int port = server.Bind("127.0.0.1", 0);
  std::thread th([&] { server.Listen(); });
  httplib::Client cli("127.0.0.1", port);
  httplib::Result h;
  for (int i = 0; i < 100 && !(h = cli.Get("/health")); ++i) {
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
  const std::string probe = R"({"features":{"age":44.0,"smoking":"former"}})";
  const auto r1 = cli.Post("/predict", probe, "application/json");
  const auto r2 = cli.Post("/predict", probe, "application/json");
  server.Stop();
  th.join();
  if (!h || h->status != 200 || !r1 || !r2 || r1->body != r2->body ||
      r1->body != svc.Predict(probe).body) {
    failures.push_back("http round trip mismatch");
  }
  const bool unchanged = Snapshot(dir) == before;
  if (!unchanged) failures.push_back("bundle files changed");
  const bool ok = failures.empty();
  return {ok, Fmt("%zu handler requests + http round trip; bundle files read-only and unchanged: "
                  "%s; failures %zu%s; %.1f s",
                  requests, unchanged ? "yes" : "NO", failures.size(),
                  failures.empty() ? "" : (" (first: " + failures[0] + ")").c_str(),
                  Seconds(t0))};
}

}  // namespace

int main() {
  const fs::path work = fs::temp_directory_path() / "prognos_acceptance";
  fs::create_directories(work);
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome_()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "metric oracles", MetricOracles},
      {2, "gradient checks", GradientChecks},
      {3, "cox recovery", CoxRecovery},
      {4, "value of ML", ValueOfMl},
      {5, "imputation value", ImputationValue},
      {6, "reproducibility", [&] { return Reproducibility(work / "repro"); }},
      {7, "shapley fidelity", ShapleyFidelity},
      {8, "voi curve", VoiCurveCheck},
      {9, "dca closed forms", DcaClosedForms},
      {10, "ensemble properties", EnsembleProperties},
      {11, "serving contract", [&] { return ServingContract(work); }},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    Outcome_ o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("criterion %2d %s  [%s] %s\n", c.id, o.pass ? "PASS" : "FAIL", c.name,
                o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed,
              criteria.size());
  return failed == 0 ? 0 : 1;
}
