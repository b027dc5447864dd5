#include "prognos/ensemble.h"

#include <algorithm>
#include <cmath>

#include "prognos/error.h"

namespace prognos {

std::vector<double> SoftmaxWeights(std::span<const double> scores, double temperature) {
  if (!(temperature > 0.0)) throw BadParam("temperature must be positive");
  if (scores.empty()) throw TooFewTrials("no scores to weight");
  const double top = *std::max_element(scores.begin(), scores.end());
  std::vector<double> w(scores.size());
  double total = 0.0;
  for (size_t i = 0; i < w.size(); ++i) {
    w[i] = std::exp((scores[i] - top) / temperature);
    total += w[i];
  }
  for (double& v : w) v /= total;
  return w;
}

EnsembleModel BuildEnsemble(const StudyReport& report, const Dataset& d, size_t m,
                            double temperature) {
  if (m < 1) throw BadParam("ensemble size must be at least 1");
  std::vector<size_t> chosen;
  for (size_t idx : report.Leaderboard()) {
    const auto& cfg = report.trials[idx].config;
    const bool seen = std::any_of(chosen.begin(), chosen.end(), [&](size_t c) {
      return report.trials[c].config == cfg;
    });
    if (!seen) chosen.push_back(idx);
    if (chosen.size() == m) break;
  }
  if (chosen.size() < m) {
    throw TooFewTrials("requested " + std::to_string(m) + " members, study has " +
                       std::to_string(chosen.size()) + " distinct successful trials");
  }
  EnsembleModel e;
  e.task = report.task;
  e.temperature = temperature;
  std::vector<double> scores;
  for (size_t idx : chosen) {
    const auto& t = report.trials[idx];
    e.members.push_back(FittedPipeline::Fit(t.config, d, report.task, t.seed));
    e.trial_indices.push_back(idx);
    scores.push_back(t.mean_score);
  }
  e.weights = SoftmaxWeights(scores, temperature);
  return e;
}

EnsemblePrediction EnsembleModel::Predict(const Dataset& d) const {
  EnsemblePrediction out;
  const size_t n = d.n_rows();
  const bool survival = task.task == Task::kSurvival;
  // Weighted sums are clamped to the member range so rounding can never
  // leave the convex hull.
  auto blend = [&](const std::vector<std::vector<double>>& parts) {
    std::vector<double> v(n, 0.0);
    for (size_t i = 0; i < n; ++i) {
      double lo = parts[0][i], hi = parts[0][i];
      for (size_t m = 0; m < parts.size(); ++m) {
        v[i] += weights[m] * parts[m][i];
        lo = std::min(lo, parts[m][i]);
        hi = std::max(hi, parts[m][i]);
      }
      v[i] = std::clamp(v[i], lo, hi);
    }
    return v;
  };
  std::vector<std::vector<double>> scores, probs;
  for (const auto& member : members) {
    scores.push_back(member.PredictScore(d));
    if (survival) probs.push_back(member.PredictEventProb(d, task.horizon));
  }
  out.score = blend(scores);
  if (survival) out.event_prob = blend(probs);
  out.risk = survival ? out.event_prob : out.score;
  return out;
}

std::vector<double> EnsembleModel::PredictRisk(const Dataset& d) const { return Predict(d).risk; }

const Schema& EnsembleModel::features() const {
  if (members.empty()) throw TooFewTrials("ensemble has no members");
  return members.front().imputer().features();
}

nlohmann::json EnsembleModel::ToJson() const {
  nlohmann::json ms = nlohmann::json::array();
  for (const auto& m : members) ms.push_back(m.ToJson());
  return {{"task", TaskToJson(task)},
          {"members", ms},
          {"weights", weights},
          {"trial_indices", trial_indices},
          {"temperature", temperature}};
}

EnsembleModel EnsembleModel::FromJson(const nlohmann::json& j) {
  EnsembleModel e;
  e.task = TaskFromJson(j.at("task"));
  for (const auto& m : j.at("members")) e.members.push_back(FittedPipeline::FromJson(m));
  e.weights = j.at("weights").get<std::vector<double>>();
  e.trial_indices = j.at("trial_indices").get<std::vector<size_t>>();
  e.temperature = j.at("temperature").get<double>();
  if (e.members.empty() || e.weights.size() != e.members.size() ||
      e.trial_indices.size() != e.members.size()) {
    throw ShapeMismatch("ensemble members and weights disagree");
  }
  for (const auto& m : e.members) {
    if (m.imputer().features() != e.members.front().imputer().features()) {
      throw ShapeMismatch("ensemble members use different features");
    }
  }
  return e;
}

EnsembleSummary Summarize(const EnsembleModel& e) {
  return {e.trial_indices, e.weights, e.temperature};
}

}  // namespace prognos
