// prognos: command-line front end (train, evaluate, explain, voi, subgroup,
// dca, serve, export-demo).

#include <algorithm>
#include <charconv>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "prognos/ensemble.h"
#include "prognos/error.h"
#include "prognos/explain.h"
#include "prognos/metrics.h"
#include "prognos/pipeline.h"
#include "prognos/serve.h"
#include "prognos/studio.h"
#include "prognos/study.h"
#include "prognos/tabular.h"

namespace {

using namespace prognos;

struct TaskArgs {
  std::string data;
  std::string schema;
  std::string task = "classification";
  std::string target;
  std::string time_col;
  std::string event_col;
  double horizon = 0.0;
  size_t budget = 50;
  size_t folds = 3;
  size_t imputations = 1;
  uint64_t seed = 0;
  size_t n_init = 10;
  size_t n_cand = 500;
  size_t surrogate_trees = 100;
  size_t threads = 0;
};

void AddTaskOptions(CLI::App* cmd, TaskArgs& a) {
  cmd->add_option("--data", a.data, "CSV file")->required();
  cmd->add_option("--schema", a.schema, "schema JSON")->required();
  cmd->add_option("--task", a.task)
      ->check(CLI::IsMember({"classification", "regression", "survival"}));
  cmd->add_option("--target", a.target, "outcome column (classification, regression)");
  cmd->add_option("--time-col", a.time_col);
  cmd->add_option("--event-col", a.event_col);
  cmd->add_option("--horizon", a.horizon, "survival horizon, time-column units");
  cmd->add_option("--budget", a.budget, "number of trials");
  cmd->add_option("--folds", a.folds);
  cmd->add_option("--imputations", a.imputations);
  cmd->add_option("--seed", a.seed);
  cmd->add_option("--n-init", a.n_init, "random trials before the surrogate takes over");
  cmd->add_option("--n-cand", a.n_cand, "candidates scored per proposal");
  cmd->add_option("--surrogate-trees", a.surrogate_trees);
  cmd->add_option("--threads", a.threads, "0: all cores");
}

TaskSpec MakeTask(const TaskArgs& a) {
  const Task t = ParseTask(a.task);
  if (t == Task::kSurvival) return TaskSpec::Survival(a.horizon);
  return t == Task::kRegression ? TaskSpec::Regression() : TaskSpec::Classification();
}

// Command-line outcome columns override the roles in the schema file; other
// outcome-role columns are then ignored.
Schema ApplyRoles(Schema schema, const TaskArgs& a, const TaskSpec& task) {
  auto assign = [&](const std::string& name, ColumnRole role) {
    if (name.empty()) return;
    for (auto& c : schema) {
      if (c.role == role) c.role = ColumnRole::kIgnore;
    }
    bool found = false;
    for (auto& c : schema) {
      if (c.name == name) {
        c.role = role;
        found = true;
      }
    }
    if (!found) throw UnknownColumn("no column named '" + name + "' in the schema");
  };
  if (task.task == Task::kSurvival) {
    assign(a.time_col, ColumnRole::kTime);
    assign(a.event_col, ColumnRole::kEvent);
    for (auto& c : schema) {
      if (c.role == ColumnRole::kTarget) c.role = ColumnRole::kIgnore;
    }
  } else {
    assign(a.target, ColumnRole::kTarget);
    for (auto& c : schema) {
      if (c.role == ColumnRole::kTime || c.role == ColumnRole::kEvent) c.role = ColumnRole::kIgnore;
    }
  }
  ValidateRoles(schema, task);
  return schema;
}

Dataset LoadTaskData(const TaskArgs& a, const TaskSpec& task) {
  const Schema schema = ApplyRoles(LoadSchemaFile(a.schema), a, task);
  return LoadCsv(a.data, schema);
}

SearchOptions MakeSearchOptions(const TaskArgs& a) {
  SearchOptions o;
  o.n_init = a.n_init;
  o.n_candidates = a.n_cand;
  o.surrogate_trees = a.surrogate_trees;
  o.threads = a.threads;
  return o;
}

// Reloads cohort data under the schema stored with a study.
Dataset LoadStudyData(const LoadedStudy& s, const std::string& path) {
  return LoadCsv(path, s.schema);
}

void PrintJson(const nlohmann::json& j) { std::cout << CanonicalJson(j); }

// Shortest round-trip form.
std::string Num(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

int RunTrain(const TaskArgs& a, size_t ensemble_size, double temperature, const std::string& out) {
  const TaskSpec task = MakeTask(a);
  task.Validate();
  const Dataset d = LoadTaskData(a, task);
  const Dataset x = d.FeaturesOnly();
  const size_t width = FeatureEncoder(x.schema()).width();
  const SearchSpace space = SearchSpace::Default(task.task, width, x.MissingCount() > 0);
  StudyReport report =
      RunStudy(d, task, space, a.budget, a.folds, a.imputations, a.seed, MakeSearchOptions(a));
  std::vector<const PipelineConfig*> distinct;
  for (size_t idx : report.Leaderboard()) {
    const auto& cfg = report.trials[idx].config;
    if (std::none_of(distinct.begin(), distinct.end(), [&](auto* c) { return *c == cfg; })) {
      distinct.push_back(&cfg);
    }
  }
  const size_t m = std::min(ensemble_size, distinct.size());
  if (m == 0) throw TooFewTrials("every trial failed; see the trial errors");
  const EnsembleModel model = BuildEnsemble(report, d, m, temperature);
  report.ensemble = Summarize(model);
  SaveStudy(report, model, d, out);
  const auto best = *report.BestTrial();
  std::cerr << "best trial " << best << ": " << ToString(task.primary_metric) << " "
            << report.trials[best].mean_score << " +/- " << report.trials[best].sd_score << "\n";
  return 0;
}

int RunEvaluate(const std::string& study, const std::string& data) {
  const LoadedStudy s = LoadStudy(study);
  const Dataset d = LoadStudyData(s, data);
  const TaskSpec& task = s.model.task;
  const auto pred = s.model.Predict(d);
  const Outcome y = ExtractOutcome(d, task);
  nlohmann::json out = {{"rows", d.n_rows()}, {"task", std::string(ToString(task.task))}};
  nlohmann::json metrics = nlohmann::json::object();
  switch (task.task) {
    case Task::kClassification:
      metrics["auroc"] = Auroc(pred.risk, y.y).value;
      metrics["brier"] = Brier(pred.risk, y.y).value;
      break;
    case Task::kRegression:
      metrics["r_squared"] = RSquared(pred.risk, y.y).value;
      break;
    case Task::kSurvival:
      metrics["c_index"] = ConcordanceIndex(pred.risk, y.time, y.event).value;
      metrics["brier_at_horizon"] =
          SurvivalBrier(pred.event_prob, y.time, y.event, task.horizon).value;
      break;
  }
  out["metrics"] = metrics;
  PrintJson(out);
  return 0;
}

int RunExplain(const std::string& study, const std::string& data, const std::string& method,
               size_t row, size_t n_samples, size_t repeats) {
  const LoadedStudy s = LoadStudy(study);
  const Dataset d = LoadStudyData(s, data);
  const uint64_t seed = s.report.seed;
  Explanation e;
  switch (ParseExplainMethod(method)) {
    case ExplainMethod::kShapley: {
      if (row >= d.n_rows()) throw BadParam("--row is past the end of the data");
      const std::vector<size_t> one{row};
      e = SampledShapley(s.model, d.SelectRows(one), s.background, n_samples, seed);
      break;
    }
    case ExplainMethod::kPermutation:
      e = PermutationImportance(s.model, d, repeats, seed);
      break;
    case ExplainMethod::kEffectSize:
      e = EffectSizeRanking(d.FeaturesOnly(), OutcomeGroups(d, s.model.task));
      break;
  }
  PrintJson(e.ToJson());
  return 0;
}

std::vector<double> ParseList(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw BadParam("not a number: '" + item + "'");
    }
  }
  return out;
}

int RunVoi(const TaskArgs& a, const std::string& thresholds) {
  const TaskSpec task = MakeTask(a);
  task.Validate();
  const Dataset d = LoadTaskData(a, task);
  VoiOptions opts;
  opts.budget = a.budget;
  opts.folds = a.folds;
  opts.imputations = a.imputations;
  opts.search = MakeSearchOptions(a);
  const auto ts = ParseList(thresholds);
  const VoiCurve curve = ValueOfInformation(d, task, ts, a.seed, opts);
  std::cout << "threshold,n_features,score,full_score,features\n";
  for (const auto& p : curve.points) {
    std::string names;
    for (size_t i = 0; i < p.features.size(); ++i) names += (i ? ";" : "") + p.features[i];
    std::cout << Num(p.threshold) << ',' << p.features.size() << ',' << Num(p.score) << ','
              << Num(curve.full_score) << ",\"" << names << "\"\n";
  }
  return 0;
}

int RunSubgroup(const std::string& study, const std::string& data, const std::string& feature,
                double split, bool effect_sizes) {
  const LoadedStudy s = LoadStudy(study);
  const Dataset d = LoadStudyData(s, data);
  PrintJson(SubgroupReport(s.model, d, feature, split, effect_sizes).ToJson());
  return 0;
}

int RunDca(const std::string& study, const std::string& data, double tmin, double tmax,
           double tstep) {
  const LoadedStudy s = LoadStudy(study);
  const Dataset d = LoadStudyData(s, data);
  const auto grid = ThresholdGrid(tmin, tmax, tstep);
  const NetBenefitCurve c = DecisionCurve(s.model, d, grid);
  std::cout << "threshold,model,treat_all,treat_none\n";
  for (size_t i = 0; i < c.thresholds.size(); ++i) {
    std::cout << Num(c.thresholds[i]) << ',' << Num(c.model_nb[i]) << ','
              << Num(c.treat_all_nb[i]) << ',' << Num(c.treat_none_nb[i]) << '\n';
  }
  return 0;
}

int RunServe(const std::string& study, const std::string& host, int port) {
  const Service service = Service::FromBundle(study);
  if (!service.loaded()) {
    std::cerr << "warning: bundle not loaded (" << service.load_error()
              << "); model endpoints answer 503\n";
  }
  HttpServer server(service);
  const int bound = server.Bind(host, port);
  if (bound < 0) throw IoError("cannot bind " + host + ":" + std::to_string(port));
  std::cerr << "listening on http://" << host << ":" << bound << "\n";
  server.Listen();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"prognos: automated pipeline search for diagnostic and prognostic models"};
  app.require_subcommand(1);

  TaskArgs train_args;
  size_t ensemble_size = 3;
  double temperature = 0.1;
  std::string train_out;
  auto* train = app.add_subcommand("train", "search pipelines and save a study bundle");
  AddTaskOptions(train, train_args);
  train->add_option("--out", train_out, "bundle directory")->required();
  train->add_option("--ensemble-size", ensemble_size);
  train->add_option("--temperature", temperature, "softmax temperature of ensemble weights");

  std::string study, data;
  auto* evaluate = app.add_subcommand("evaluate", "score a saved model on a dataset");
  evaluate->add_option("--study", study)->required();
  evaluate->add_option("--data", data)->required();

  std::string method = "shapley";
  size_t row = 0, n_samples = 1000, repeats = 5;
  auto* explain = app.add_subcommand("explain", "feature attributions or rankings");
  explain->add_option("--study", study)->required();
  explain->add_option("--data", data)->required();
  explain->add_option("--method", method)
      ->check(CLI::IsMember({"shapley", "permutation", "effect-size"}));
  explain->add_option("--row", row, "row explained by shapley");
  explain->add_option("--n-samples", n_samples);
  explain->add_option("--repeats", repeats, "permutation repeats");

  TaskArgs voi_args;
  voi_args.budget = 25;
  std::string thresholds = "1.0,0.9,0.8,0.7,0.6,0.5";
  auto* voi = app.add_subcommand("voi", "score versus feature-set curve (CSV)");
  AddTaskOptions(voi, voi_args);
  voi->add_option("--thresholds", thresholds, "effect-size thresholds, comma separated");

  std::string feature;
  double split_at = 0.0;
  bool subgroup_effects = false;
  auto* subgroup = app.add_subcommand("subgroup", "metrics on either side of a feature split");
  subgroup->add_option("--study", study)->required();
  subgroup->add_option("--data", data)->required();
  subgroup->add_option("--feature", feature)->required();
  subgroup->add_option("--split-at", split_at)->required();
  subgroup->add_flag("--effect-sizes", subgroup_effects, "rank features within each group");

  double tmin = 0.01, tmax = 0.5, tstep = 0.01;
  auto* dca = app.add_subcommand("dca", "decision curve (CSV)");
  dca->add_option("--study", study)->required();
  dca->add_option("--data", data)->required();
  dca->add_option("--tmin", tmin);
  dca->add_option("--tmax", tmax);
  dca->add_option("--tstep", tstep);

  std::string host = "127.0.0.1";
  int port = 8080;
  auto* serve = app.add_subcommand("serve", "HTTP prediction service");
  serve->add_option("--study", study)->required();
  serve->add_option("--port", port);
  serve->add_option("--host", host);

  std::string demo_out;
  auto* export_demo = app.add_subcommand("export-demo", "bundle plus ui_manifest.json");
  export_demo->add_option("--study", study)->required();
  export_demo->add_option("--out", demo_out)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) return RunTrain(train_args, ensemble_size, temperature, train_out);
    if (*evaluate) return RunEvaluate(study, data);
    if (*explain) return RunExplain(study, data, method, row, n_samples, repeats);
    if (*voi) {
      std::vector<double> ts = ParseList(thresholds);
      std::sort(ts.begin(), ts.end(), std::greater<>());
      std::string sorted;
      for (size_t i = 0; i < ts.size(); ++i) sorted += (i ? "," : "") + Num(ts[i]);
      return RunVoi(voi_args, sorted);
    }
    if (*subgroup) return RunSubgroup(study, data, feature, split_at, subgroup_effects);
    if (*dca) return RunDca(study, data, tmin, tmax, tstep);
    if (*serve) return RunServe(study, host, port);
    if (*export_demo) {
      ExportDemo(study, demo_out);
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
