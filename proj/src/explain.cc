#include "prognos/explain.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "prognos/error.h"
#include "prognos/rng.h"

namespace prognos {

std::string_view ToString(ExplainMethod m) {
  switch (m) {
    case ExplainMethod::kEffectSize: return "effect_size";
    case ExplainMethod::kPermutation: return "permutation";
    case ExplainMethod::kShapley: return "shapley";
  }
  return "?";
}

ExplainMethod ParseExplainMethod(std::string_view s) {
  if (s == "effect_size" || s == "effect-size") return ExplainMethod::kEffectSize;
  if (s == "permutation") return ExplainMethod::kPermutation;
  if (s == "shapley") return ExplainMethod::kShapley;
  throw BadParam("unknown explanation method '" + std::string(s) + "'");
}

nlohmann::json Explanation::ToJson() const {
  nlohmann::json rows = nlohmann::json::array();
  for (size_t i = 0; i < features.size(); ++i) {
    nlohmann::json r = {{"feature", features[i]}, {"value", values[i]}};
    if (!std_errors.empty()) r["std_error"] = std_errors[i];
    rows.push_back(r);
  }
  nlohmann::json meta = {{"n_samples", n_samples}, {"seed", seed}, {"metric", metric}};
  if (method == ExplainMethod::kShapley) {
    meta["prediction"] = prediction;
    meta["expected_value"] = expected_value;
    meta["total_std_error"] = total_std_error;
  }
  if (method == ExplainMethod::kPermutation) {
    meta["baseline"] = baseline;
    meta["per_repeat"] = per_repeat;
  }
  return {{"method", ToString(method)}, {"values", rows}, {"metadata", meta}};
}

namespace {

struct EncodedEffect {
  std::string name;
  size_t source = 0;  // dataset column
  double effect = 0.0;
};

size_t CountGroup(std::span<const int> group, int g) {
  return static_cast<size_t>(std::count(group.begin(), group.end(), g));
}

// |d| of every encoded feature column, in schema order.
std::vector<EncodedEffect> EncodedEffects(const Dataset& d, std::span<const int> group) {
  if (group.size() != d.n_rows()) throw ShapeMismatch("group vector length differs from rows");
  if (CountGroup(group, 0) < 2 || CountGroup(group, 1) < 2) {
    throw DegenerateGroups("each outcome group needs at least two rows");
  }
  auto effect = [&](size_t c, const std::function<double(double)>& encode) {
    std::vector<double> v;
    std::vector<int> g;
    for (size_t r = 0; r < d.n_rows(); ++r) {
      if (d.is_missing(r, c)) continue;
      v.push_back(encode(d.value(r, c)));
      g.push_back(group[r]);
    }
    try {
      return std::abs(CohensD(v, g));
    } catch (const DegenerateGroups&) {
      return 0.0;
    }
  };
  std::vector<EncodedEffect> out;
  for (size_t c : d.ColumnsWithRole(ColumnRole::kFeature)) {
    const auto& col = d.column(c);
    if (col.kind == ColumnKind::kCategorical) {
      for (size_t l = 0; l < col.categories.size(); ++l) {
        const double level = static_cast<double>(l);
        out.push_back({col.name + "=" + col.categories[l], c,
                       effect(c, [level](double x) { return x == level ? 1.0 : 0.0; })});
      }
    } else {
      out.push_back({col.name, c, effect(c, [](double x) { return x; })});
    }
  }
  return out;
}

std::vector<size_t> FeatureColumns(const Dataset& d, const std::vector<std::string>& names) {
  std::vector<size_t> cols;
  for (const auto& n : names) {
    const auto idx = d.FindColumn(n);
    if (!idx) throw SchemaMismatch("column '" + n + "' is absent");
    cols.push_back(*idx);
  }
  return cols;
}

std::vector<std::string> FeatureNames(const Schema& s) {
  std::vector<std::string> out;
  for (const auto& c : s) {
    if (c.role == ColumnRole::kFeature) out.push_back(c.name);
  }
  return out;
}

Explanation Shapley(const RiskFunction& f, const std::vector<std::string>& names,
                    const Dataset& x, const Dataset& background, size_t n_samples,
                    uint64_t seed) {
  if (background.n_rows() == 0) throw EmptyBackground("background has no rows");
  if (n_samples < 1) throw BadParam("n_samples must be at least 1");
  if (x.n_rows() != 1) throw BadParam("explain one row at a time");
  const size_t p = names.size();
  const auto xcols = FeatureColumns(x, names);
  const auto bcols = FeatureColumns(background, names);

  Explanation e;
  e.method = ExplainMethod::kShapley;
  e.features = names;
  e.n_samples = n_samples;
  e.seed = seed;
  e.metric = "risk";
  e.prediction = f(x).at(0);
  const auto bg_risk = f(background);
  e.expected_value = std::accumulate(bg_risk.begin(), bg_risk.end(), 0.0) /
                     static_cast<double>(bg_risk.size());

  std::vector<size_t> order(background.n_rows());
  std::iota(order.begin(), order.end(), 0);
  Rng order_rng(DeriveSeed(seed, 1));
  order_rng.Shuffle(std::span<size_t>(order));
  Rng perm_rng(seed);

  std::vector<double> sum(p, 0.0), sumsq(p, 0.0);
  double tot_sum = 0.0, tot_sumsq = 0.0;
  constexpr size_t kBatch = 64;
  std::vector<size_t> perm(p);
  for (size_t start = 0; start < n_samples; start += kBatch) {
    const size_t batch = std::min(kBatch, n_samples - start);
    std::vector<std::vector<size_t>> perms;
    std::vector<size_t> src;
    for (size_t s = 0; s < batch; ++s) {
      std::iota(perm.begin(), perm.end(), 0);
      perm_rng.Shuffle(std::span<size_t>(perm));
      perms.push_back(perm);
      for (size_t k = 0; k <= p; ++k) src.push_back(order[(start + s) % order.size()]);
    }
    Dataset comp = background.SelectRows(src);
    for (size_t s = 0; s < batch; ++s) {
      for (size_t k = 1; k <= p; ++k) {
        const size_t row = s * (p + 1) + k;
        // Row k carries x's values for the first k features of the order.
        for (size_t j = 0; j < k; ++j) {
          const size_t feat = perms[s][j];
          const auto v = x.get(0, xcols[feat]);
          if (v) {
            comp.set(row, bcols[feat], *v);
          } else {
            comp.set_missing(row, bcols[feat]);
          }
        }
      }
    }
    const auto risk = f(comp);
    for (size_t s = 0; s < batch; ++s) {
      const double* r = risk.data() + s * (p + 1);
      for (size_t k = 1; k <= p; ++k) {
        const double m = r[k] - r[k - 1];
        sum[perms[s][k - 1]] += m;
        sumsq[perms[s][k - 1]] += m * m;
      }
      const double total = r[p] - r[0];
      tot_sum += total;
      tot_sumsq += total * total;
    }
  }
  const auto n = static_cast<double>(n_samples);
  auto std_error = [&](double s, double ss) {
    if (n_samples < 2) return 0.0;
    const double var = std::max(0.0, (ss - s * s / n) / (n - 1.0));
    return std::sqrt(var / n);
  };
  for (size_t j = 0; j < p; ++j) {
    e.values.push_back(sum[j] / n);
    e.std_errors.push_back(std_error(sum[j], sumsq[j]));
  }
  e.total_std_error = std_error(tot_sum, tot_sumsq);
  return e;
}

MetricResult Named(MetricResult m, std::string name) {
  m.name = std::move(name);
  return m;
}

std::vector<MetricResult> TaskMetrics(const TaskSpec& task, std::span<const double> risk,
                                      const Outcome& y) {
  switch (task.task) {
    case Task::kClassification:
      return {Named(Auroc(risk, y.y), "auroc"), Named(Brier(risk, y.y), "brier")};
    case Task::kRegression:
      return {Named(RSquared(risk, y.y), "r_squared")};
    case Task::kSurvival:
      return {Named(ConcordanceIndex(risk, y.time, y.event), "c_index"),
              Named(SurvivalBrier(risk, y.time, y.event, task.horizon), "survival_brier")};
  }
  return {};
}

}  // namespace

Explanation EffectSizeRanking(const Dataset& d, std::span<const int> group) {
  auto effects = EncodedEffects(d, group);
  std::stable_sort(effects.begin(), effects.end(),
                   [](const EncodedEffect& a, const EncodedEffect& b) { return a.effect > b.effect; });
  Explanation e;
  e.method = ExplainMethod::kEffectSize;
  e.metric = "abs_cohens_d";
  e.n_samples = d.n_rows();
  for (const auto& x : effects) {
    e.features.push_back(x.name);
    e.values.push_back(x.effect);
  }
  return e;
}

std::vector<int> OutcomeGroups(const Dataset& d, const TaskSpec& task) {
  const Outcome y = ExtractOutcome(d, task);
  std::vector<int> g;
  switch (task.task) {
    case Task::kClassification:
      for (double v : y.y) g.push_back(v > 0.5 ? 1 : 0);
      break;
    case Task::kSurvival:
      g = y.event;
      break;
    case Task::kRegression: {
      std::vector<double> sorted = y.y;
      std::sort(sorted.begin(), sorted.end());
      const size_t n = sorted.size();
      const double median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
      for (double v : y.y) g.push_back(v > median ? 1 : 0);
      break;
    }
  }
  return g;
}

std::vector<int> RiskQuantileGroups(std::span<const double> risk) {
  std::vector<double> sorted(risk.begin(), risk.end());
  std::sort(sorted.begin(), sorted.end());
  const size_t n = sorted.size();
  if (n == 0) return {};
  const double median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  std::vector<int> g;
  for (double v : risk) g.push_back(v > median ? 1 : 0);
  return g;
}

Explanation PermutationImportance(const RiskFunction& f, const Dataset& d, const TaskSpec& task,
                                  size_t repeats, uint64_t seed) {
  if (repeats < 1) throw BadParam("repeats must be at least 1");
  const Outcome y = ExtractOutcome(d, task);
  Explanation e;
  e.method = ExplainMethod::kPermutation;
  e.metric = std::string(ToString(task.primary_metric));
  e.n_samples = repeats;
  e.seed = seed;
  e.baseline = PrimaryScore(task, f(d), y);
  const auto cols = d.ColumnsWithRole(ColumnRole::kFeature);
  for (size_t c : cols) e.features.push_back(d.column(c).name);
  e.per_repeat.assign(repeats, std::vector<double>(cols.size(), 0.0));
  std::vector<size_t> perm(d.n_rows());
  for (size_t j = 0; j < cols.size(); ++j) {
    for (size_t rep = 0; rep < repeats; ++rep) {
      std::iota(perm.begin(), perm.end(), 0);
      Rng rng(DeriveSeed(DeriveSeed(seed, rep), j));
      rng.Shuffle(std::span<size_t>(perm));
      Dataset shuffled = d;
      for (size_t r = 0; r < d.n_rows(); ++r) {
        const auto v = d.get(perm[r], cols[j]);
        if (v) {
          shuffled.set(r, cols[j], *v);
        } else {
          shuffled.set_missing(r, cols[j]);
        }
      }
      e.per_repeat[rep][j] = e.baseline - PrimaryScore(task, f(shuffled), y);
    }
  }
  for (size_t j = 0; j < cols.size(); ++j) {
    double s = 0.0;
    for (size_t rep = 0; rep < repeats; ++rep) s += e.per_repeat[rep][j];
    e.values.push_back(s / static_cast<double>(repeats));
  }
  return e;
}

Explanation PermutationImportance(const EnsembleModel& model, const Dataset& d, size_t repeats,
                                  uint64_t seed) {
  return PermutationImportance([&](const Dataset& ds) { return model.PredictRisk(ds); }, d,
                               model.task, repeats, seed);
}

Explanation SampledShapley(const RiskFunction& f, const Dataset& x, const Dataset& background,
                           size_t n_samples, uint64_t seed) {
  return Shapley(f, FeatureNames(background.schema()), x, background, n_samples, seed);
}

Explanation SampledShapley(const EnsembleModel& model, const Dataset& x,
                           const Dataset& background, size_t n_samples, uint64_t seed) {
  return Shapley([&](const Dataset& ds) { return model.PredictRisk(ds); },
                 FeatureNames(model.features()), x, background, n_samples, seed);
}

nlohmann::json VoiCurve::ToJson() const {
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& p : points) {
    pts.push_back({{"threshold", p.threshold},
                   {"n_features", p.features.size()},
                   {"features", p.features},
                   {"score", p.score}});
  }
  return {{"ranking", ranking.ToJson()}, {"full_score", full_score}, {"points", pts}};
}

VoiCurve ValueOfInformation(const Dataset& d, const TaskSpec& t, std::span<const double> thresholds,
                            uint64_t seed, const VoiOptions& opts) {
  for (size_t i = 1; i < thresholds.size(); ++i) {
    if (!(thresholds[i] <= thresholds[i - 1])) throw BadParam("thresholds must descend");
  }
  const auto group = OutcomeGroups(d, t);
  const auto effects = EncodedEffects(d, group);
  VoiCurve curve;
  curve.ranking = EffectSizeRanking(d, group);

  auto study_score = [&](const Dataset& data) {
    size_t width = 0;
    bool missing = false;
    for (size_t c : data.ColumnsWithRole(ColumnRole::kFeature)) {
      const auto& col = data.column(c);
      width += col.kind == ColumnKind::kCategorical ? col.categories.size() : 1;
      missing = missing || data.ObservedCount(c) < data.n_rows();
    }
    const auto space = SearchSpace::Default(t.task, width, missing);
    const auto report =
        RunStudy(data, t, space, opts.budget, opts.folds, opts.imputations, seed, opts.search);
    const auto best = report.BestTrial();
    return best ? report.trials[*best].mean_score : FailureScore(t.primary_metric);
  };
  curve.full_score = study_score(d);

  for (double th : thresholds) {
    std::vector<uint8_t> keep(d.n_cols(), 0);
    for (const auto& e : effects) {
      if (e.effect >= th) keep[e.source] = 1;
    }
    VoiPoint pt;
    pt.threshold = th;
    Schema schema = d.schema();
    for (size_t c = 0; c < schema.size(); ++c) {
      if (schema[c].role != ColumnRole::kFeature) continue;
      if (keep[c]) {
        pt.features.push_back(schema[c].name);
      } else {
        schema[c].role = ColumnRole::kIgnore;
      }
    }
    if (pt.features.empty()) {
      throw EmptyFeatureSet("no feature reaches effect size " + std::to_string(th));
    }
    pt.score = study_score(d.WithSchema(schema));
    curve.points.push_back(std::move(pt));
  }
  return curve;
}

nlohmann::json SubgroupResult::ToJson() const {
  auto group = [](const SubgroupGroup& g) {
    nlohmann::json ms = nlohmann::json::array();
    for (const auto& m : g.metrics) {
      ms.push_back({{"name", m.name}, {"value", m.value}, {"n_effective", m.n_effective}});
    }
    nlohmann::json j = {{"label", g.label}, {"n", g.n}, {"metrics", ms}};
    if (g.effect_sizes) j["effect_sizes"] = g.effect_sizes->ToJson();
    return j;
  };
  return {{"feature", feature},
          {"split_value", split_value},
          {"excluded_missing", excluded_missing},
          {"groups", {group(below), group(at_or_above)}}};
}

SubgroupResult SubgroupReport(const EnsembleModel& model, const Dataset& d,
                              const std::string& feature, double split_value, bool effect_sizes) {
  const size_t c = d.ColumnIndex(feature);
  SubgroupResult out;
  out.feature = feature;
  out.split_value = split_value;
  std::vector<size_t> lo, hi;
  for (size_t r = 0; r < d.n_rows(); ++r) {
    const auto v = d.get(r, c);
    if (!v) {
      ++out.excluded_missing;
    } else {
      (*v < split_value ? lo : hi).push_back(r);
    }
  }
  auto score = [&](const std::vector<size_t>& rows, const std::string& label) {
    SubgroupGroup g;
    g.label = label;
    g.n = rows.size();
    if (rows.empty()) throw DegenerateSplit("group '" + label + "' is empty");
    const Dataset part = d.SelectRows(rows);
    try {
      g.metrics = TaskMetrics(model.task, model.PredictRisk(part), ExtractOutcome(part, model.task));
    } catch (const Error& e) {
      throw DegenerateSplit("group '" + label + "': " + e.what());
    }
    if (effect_sizes) {
      try {
        g.effect_sizes = EffectSizeRanking(part, OutcomeGroups(part, model.task));
      } catch (const DegenerateGroups&) {
      }
    }
    return g;
  };
  const std::string at = nlohmann::json(split_value).dump();
  out.below = score(lo, feature + " < " + at);
  out.at_or_above = score(hi, feature + " >= " + at);
  return out;
}

NetBenefitCurve DecisionCurve(const EnsembleModel& model, const Dataset& d,
                              std::span<const double> thresholds) {
  const auto& task = model.task;
  if (task.task == Task::kRegression) throw IncompatibleTask("decision curves need a risk model");
  const auto risk = model.PredictRisk(d);
  const Outcome y = ExtractOutcome(d, task);
  if (task.task == Task::kClassification) return NetBenefit(risk, y.y, thresholds);
  std::vector<double> probs, labels;
  for (size_t i = 0; i < risk.size(); ++i) {
    const bool event_by_h = y.event[i] == 1 && y.time[i] <= task.horizon;
    if (!event_by_h && y.time[i] < task.horizon) continue;
    probs.push_back(risk[i]);
    labels.push_back(event_by_h ? 1.0 : 0.0);
  }
  if (probs.empty()) throw NoUsableSubjects("every subject was censored before the horizon");
  return NetBenefit(probs, labels, thresholds);
}

}  // namespace prognos
