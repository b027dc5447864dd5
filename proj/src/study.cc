#include "prognos/study.h"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <thread>

#include "prognos/error.h"
#include "prognos/metrics.h"
#include "prognos/rng.h"

namespace prognos {

nlohmann::json TrialToJson(const TrialRecord& t) {
  return {{"trial_index", t.trial_index}, {"config", PipelineConfigToJson(t.config)},
          {"fold_scores", t.fold_scores}, {"mean_score", t.mean_score},
          {"sd_score", t.sd_score},       {"seed", t.seed},
          {"failed", t.failed},           {"error", t.error}};
}

TrialRecord TrialFromJson(const nlohmann::json& j) {
  TrialRecord t;
  t.trial_index = j.at("trial_index").get<size_t>();
  t.config = PipelineConfigFromJson(j.at("config"));
  t.fold_scores = j.at("fold_scores").get<std::vector<std::vector<double>>>();
  t.mean_score = j.at("mean_score").get<double>();
  t.sd_score = j.at("sd_score").get<double>();
  t.seed = j.at("seed").get<uint64_t>();
  t.failed = j.at("failed").get<bool>();
  t.error = j.at("error").get<std::string>();
  return t;
}

double FailureScore(Metric m) {
  switch (m) {
    case Metric::kAuroc:
    case Metric::kCIndex: return 0.0;
    case Metric::kRSquared: return -1.0;
  }
  return 0.0;
}

double PrimaryScore(const TaskSpec& task, std::span<const double> risk, const Outcome& y) {
  switch (task.primary_metric) {
    case Metric::kAuroc: return Auroc(risk, y.y).value;
    case Metric::kRSquared: return RSquared(risk, y.y).value;
    case Metric::kCIndex: return ConcordanceIndex(risk, y.time, y.event).value;
  }
  return 0.0;
}

namespace {

size_t ThreadCount(size_t requested, size_t jobs) {
  size_t n = requested ? requested : std::max(1u, std::thread::hardware_concurrency());
  return std::max<size_t>(1, std::min(n, jobs));
}

// Runs job(i) for i in [0, n) on up to `threads` workers.
template <typename F>
void ParallelFor(size_t n, size_t threads, F job) {
  if (threads <= 1) {
    for (size_t i = 0; i < n; ++i) job(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::vector<std::thread> pool;
  for (size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (size_t i = next++; i < n; i = next++) job(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace

TrialRecord EvaluatePipeline(const PipelineConfig& c, const Dataset& d, const TaskSpec& t,
                             const FoldPlan& folds, size_t r, uint64_t seed,
                             const EvalOptions& opts) {
  if (r < 1) throw BadParam("evaluation needs at least one imputation");
  if (folds.assignment.size() != d.n_rows()) throw ShapeMismatch("fold plan does not match data");
  const auto start = std::chrono::steady_clock::now();
  const size_t k = folds.k;
  TrialRecord rec;
  rec.config = c;
  rec.seed = seed;
  rec.fold_scores.assign(r, std::vector<double>(k, 0.0));
  std::vector<std::string> errors(r * k);

  auto cell = [&](size_t idx) {
    const size_t i = idx / k, f = idx % k;
    try {
      const auto train_rows = folds.TrainRows(f);
      const auto test_rows = folds.TestRows(f);
      const Dataset train = d.SelectRows(train_rows);
      const Dataset test = d.SelectRows(test_rows);
      const auto pipe = FittedPipeline::Fit(c, train, t, seed + i, opts.audit);
      const auto risk = pipe.PredictRisk(test);
      for (double v : risk) {
        if (!std::isfinite(v)) throw DegenerateInput("non-finite prediction");
      }
      rec.fold_scores[i][f] = PrimaryScore(t, risk, ExtractOutcome(test, t));
    } catch (const std::exception& e) {
      errors[idx] = e.what();
    }
  };
  ParallelFor(r * k, opts.audit ? 1 : ThreadCount(opts.threads, r * k), cell);

  for (const auto& e : errors) {
    if (!e.empty()) {
      rec.failed = true;
      rec.error = e;
      break;
    }
  }
  if (rec.failed) {
    const double worst = FailureScore(t.primary_metric);
    for (auto& row : rec.fold_scores) std::fill(row.begin(), row.end(), worst);
  }
  double total = 0.0;
  std::vector<double> means(r);
  for (size_t i = 0; i < r; ++i) {
    double s = 0.0;
    for (double v : rec.fold_scores[i]) s += v;
    means[i] = s / static_cast<double>(k);
    total += s;
  }
  rec.mean_score = total / static_cast<double>(r * k);
  double var = 0.0;
  for (double m : means) {
    double mm = 0.0;
    for (double v : means) mm += v;
    mm /= static_cast<double>(r);
    var += (m - mm) * (m - mm);
  }
  rec.sd_score = std::sqrt(var / static_cast<double>(r));
  rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

nlohmann::json SearchOptionsToJson(const SearchOptions& o) {
  return {{"n_init", o.n_init},
          {"n_candidates", o.n_candidates},
          {"surrogate_trees", o.surrogate_trees}};
}

SearchOptions SearchOptionsFromJson(const nlohmann::json& j) {
  SearchOptions o;
  o.n_init = j.at("n_init").get<size_t>();
  o.n_candidates = j.at("n_candidates").get<size_t>();
  o.surrogate_trees = j.at("surrogate_trees").get<size_t>();
  return o;
}

double ExpectedImprovement(double mu, double sd, double best) {
  if (!(sd > 0.0)) return std::max(0.0, mu - best);
  const double z = (mu - best) / sd;
  const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
  const double cdf = 0.5 * std::erfc(-z / std::numbers::sqrt2);
  return std::max(0.0, (mu - best) * cdf + sd * pdf);
}

PipelineConfig ProposeNext(const std::vector<TrialRecord>& history, const SearchSpace& space,
                           uint64_t seed, const SearchOptions& opts) {
  space.Validate();
  Rng rng(seed);
  if (history.size() < std::max<size_t>(1, opts.n_init)) return space.Sample(rng);

  const size_t dim = space.EncodedDim();
  Matrix x(history.size(), dim);
  std::vector<double> y(history.size());
  double best = -std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < history.size(); ++i) {
    const auto enc = space.Encode(history[i].config);
    std::copy(enc.begin(), enc.end(), x.row(i).begin());
    y[i] = history[i].mean_score;
    best = std::max(best, y[i]);
  }
  TreeParams params;
  params.max_depth = 16;
  const auto forest = RegressionForest::Fit(x, y, std::max<size_t>(1, opts.surrogate_trees),
                                            params, DeriveSeed(seed, 1));

  PipelineConfig best_ei, best_mu;
  double top_ei = 0.0, top_mu = -std::numeric_limits<double>::infinity();
  bool have_ei = false;
  const size_t n_cand = std::max<size_t>(1, opts.n_candidates);
  for (size_t c = 0; c < n_cand; ++c) {
    PipelineConfig cand = space.Sample(rng);
    const auto enc = space.Encode(cand);
    double mu, sd;
    forest.Predict(enc, &mu, &sd);
    const double ei = ExpectedImprovement(mu, sd, best);
    if (ei > top_ei) {
      top_ei = ei;
      best_ei = cand;
      have_ei = true;
    }
    if (mu > top_mu) {
      top_mu = mu;
      best_mu = std::move(cand);
    }
  }
  return have_ei ? best_ei : best_mu;
}

DataFingerprint DataFingerprint::Of(const Dataset& d) {
  return {d.n_rows(), d.n_cols(), d.ContentHash()};
}

std::optional<size_t> StudyReport::BestTrial() const {
  const auto board = Leaderboard();
  if (board.empty()) return std::nullopt;
  return board.front();
}

std::vector<size_t> StudyReport::Leaderboard() const {
  std::vector<size_t> idx;
  for (size_t i = 0; i < trials.size(); ++i) {
    if (!trials[i].failed) idx.push_back(i);
  }
  std::stable_sort(idx.begin(), idx.end(), [&](size_t a, size_t b) {
    return trials[a].mean_score > trials[b].mean_score;
  });
  return idx;
}

namespace {

std::string Hex(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

uint64_t ParseHex(const std::string& s) {
  if (s.size() != 16) throw BadParam("malformed hash '" + s + "'");
  return std::stoull(s, nullptr, 16);
}

nlohmann::json MethodNotes() {
  return {
      {"acquisition", "expected improvement over the best observed mean score"},
      {"surrogate", "bootstrap regression forest; across-tree sd as uncertainty"},
      {"ensemble_weights", "softmax of cross-validated mean score divided by temperature"},
      {"imputation_protocol",
       "r seeds (seed+i) of the configured imputer, fitted inside each training fold"},
      {"failed_trial_score", "worst metric value (0 for auroc and c_index, -1 for r_squared)"},
      {"survival_scoring", "c_index of the event probability at the task horizon"},
  };
}

}  // namespace

nlohmann::json ReportToJson(const StudyReport& r) {
  nlohmann::json trials = nlohmann::json::array();
  for (const auto& t : r.trials) trials.push_back(TrialToJson(t));
  nlohmann::json j = {{"format_version", kFormatVersion},
                      {"engine_version", kEngineVersion},
                      {"task", TaskToJson(r.task)},
                      {"space", r.space.ToJson()},
                      {"options", SearchOptionsToJson(r.options)},
                      {"trials", trials},
                      {"budget", r.budget},
                      {"folds", r.folds},
                      {"imputations", r.imputations},
                      {"seed", r.seed},
                      {"data",
                       {{"rows", r.data.rows},
                        {"cols", r.data.cols},
                        {"content_hash", Hex(r.data.content_hash)}}},
                      {"method", MethodNotes()}};
  const auto best = r.BestTrial();
  j["best_trial"] = best ? nlohmann::json(*best) : nlohmann::json(nullptr);
  if (r.ensemble) {
    j["ensemble"] = {{"members", r.ensemble->members},
                     {"weights", r.ensemble->weights},
                     {"temperature", r.ensemble->temperature}};
  } else {
    j["ensemble"] = nullptr;
  }
  return j;
}

StudyReport ReportFromJson(const nlohmann::json& j) {
  StudyReport r;
  r.task = TaskFromJson(j.at("task"));
  r.space = SearchSpace::FromJson(j.at("space"));
  r.options = SearchOptionsFromJson(j.at("options"));
  for (const auto& t : j.at("trials")) r.trials.push_back(TrialFromJson(t));
  r.budget = j.at("budget").get<size_t>();
  r.folds = j.at("folds").get<size_t>();
  r.imputations = j.at("imputations").get<size_t>();
  r.seed = j.at("seed").get<uint64_t>();
  const auto& data = j.at("data");
  r.data = {data.at("rows").get<size_t>(), data.at("cols").get<size_t>(),
            ParseHex(data.at("content_hash").get<std::string>())};
  if (!j.at("ensemble").is_null()) {
    const auto& e = j.at("ensemble");
    r.ensemble = EnsembleSummary{e.at("members").get<std::vector<size_t>>(),
                                 e.at("weights").get<std::vector<double>>(),
                                 e.at("temperature").get<double>()};
  }
  return r;
}

StudyReport RunStudy(const Dataset& d, const TaskSpec& t, const SearchSpace& space, size_t budget,
                     size_t k, size_t r, uint64_t seed, const SearchOptions& opts) {
  if (budget < 1) throw BadParam("budget must be at least 1");
  t.Validate();
  ValidateRoles(d.schema(), t);
  space.Validate();
  StudyReport report;
  report.task = t;
  report.space = space;
  report.options = opts;
  report.budget = budget;
  report.folds = k;
  report.imputations = r;
  report.seed = seed;
  report.data = DataFingerprint::Of(d);
  const FoldPlan folds = MakeFolds(d, k, seed, t);
  EvalOptions eval;
  eval.threads = opts.threads;
  for (size_t i = 0; i < budget; ++i) {
    const auto cfg = ProposeNext(report.trials, space, DeriveSeed(seed, 2 * i + 1), opts);
    auto rec = EvaluatePipeline(cfg, d, t, folds, r, DeriveSeed(seed, 2 * i + 2), eval);
    rec.trial_index = i;
    report.trials.push_back(std::move(rec));
  }
  return report;
}

}  // namespace prognos
