#include "prognos/metrics.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "prognos/error.h"

namespace prognos {
namespace {

void RequireSameLength(size_t a, size_t b, const char* what) {
  if (a != b) throw ShapeMismatch(std::string(what) + ": input lengths differ");
}

// Fenwick tree over risk ranks, counting inserted subjects.
class RankCounter {
 public:
  explicit RankCounter(size_t n) : tree_(n + 1, 0) {}
  void Add(size_t rank) {
    for (size_t i = rank + 1; i < tree_.size(); i += i & (~i + 1)) ++tree_[i];
  }
  // Number of inserted subjects with rank < `rank`.
  uint64_t CountBelow(size_t rank) const {
    uint64_t s = 0;
    for (size_t i = rank; i > 0; i -= i & (~i + 1)) s += tree_[i];
    return s;
  }

 private:
  std::vector<uint64_t> tree_;
};

// Dense ranks (0-based) with ties sharing a rank.
std::vector<size_t> DenseRanks(std::span<const double> v, size_t* n_distinct) {
  std::vector<size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return v[a] < v[b]; });
  std::vector<size_t> rank(v.size());
  size_t current = 0;
  for (size_t i = 0; i < order.size(); ++i) {
    if (i > 0 && v[order[i]] != v[order[i - 1]]) ++current;
    rank[order[i]] = current;
  }
  *n_distinct = v.empty() ? 0 : current + 1;
  return rank;
}

}  // namespace

MetricResult Auroc(std::span<const double> scores, std::span<const double> labels) {
  RequireSameLength(scores.size(), labels.size(), "auroc");
  std::vector<size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return scores[a] < scores[b]; });
  // Sweep ascending scores; for each tie block, positives beat every
  // negative seen before the block and tie with negatives inside it.
  double wins = 0.0;
  uint64_t neg_below = 0, n_pos = 0, n_neg = 0;
  for (size_t i = 0; i < order.size();) {
    size_t j = i;
    uint64_t block_pos = 0, block_neg = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] > 0.5 ? block_pos : block_neg) += 1;
      ++j;
    }
    wins += static_cast<double>(block_pos) * static_cast<double>(neg_below) +
            0.5 * static_cast<double>(block_pos) * static_cast<double>(block_neg);
    neg_below += block_neg;
    n_pos += block_pos;
    n_neg += block_neg;
    i = j;
  }
  if (n_pos == 0 || n_neg == 0) throw OneClassOnly("auroc needs both classes");
  const double pairs = static_cast<double>(n_pos) * static_cast<double>(n_neg);
  return {"auroc", wins / pairs, static_cast<size_t>(n_pos * n_neg)};
}

MetricResult Brier(std::span<const double> probs, std::span<const double> labels) {
  RequireSameLength(probs.size(), labels.size(), "brier");
  if (probs.empty()) throw BadParam("brier on empty input");
  double sum = 0.0;
  for (size_t i = 0; i < probs.size(); ++i) {
    if (!(probs[i] >= 0.0 && probs[i] <= 1.0)) throw BadParam("brier: probability outside [0,1]");
    const double d = probs[i] - labels[i];
    sum += d * d;
  }
  return {"brier", sum / static_cast<double>(probs.size()), probs.size()};
}

MetricResult ConcordanceIndex(std::span<const double> risks, std::span<const double> times,
                              std::span<const int> events) {
  RequireSameLength(risks.size(), times.size(), "c_index");
  RequireSameLength(risks.size(), events.size(), "c_index");
  size_t n_ranks = 0;
  const auto rank = DenseRanks(risks, &n_ranks);
  std::vector<size_t> order(times.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return times[a] > times[b]; });

  // Walk times from latest to earliest. When a block of equal times is
  // reached, the counter holds exactly the subjects with strictly later
  // times, which are the comparable partners of the block's events.
  RankCounter counter(n_ranks);
  uint64_t inserted = 0, comparable = 0;
  double score = 0.0;
  for (size_t i = 0; i < order.size();) {
    size_t j = i;
    while (j < order.size() && times[order[j]] == times[order[i]]) ++j;
    for (size_t m = i; m < j; ++m) {
      const size_t s = order[m];
      if (!events[s]) continue;
      const uint64_t below = counter.CountBelow(rank[s]);
      const uint64_t tied = counter.CountBelow(rank[s] + 1) - below;
      score += static_cast<double>(below) + 0.5 * static_cast<double>(tied);
      comparable += inserted;
    }
    for (size_t m = i; m < j; ++m) counter.Add(rank[order[m]]);
    inserted += j - i;
    i = j;
  }
  if (comparable == 0) throw NoComparablePairs("no comparable pairs");
  return {"c_index", score / static_cast<double>(comparable), static_cast<size_t>(comparable)};
}

MetricResult SurvivalBrier(std::span<const double> event_probs, std::span<const double> times,
                           std::span<const int> events, double horizon) {
  RequireSameLength(event_probs.size(), times.size(), "survival_brier");
  RequireSameLength(event_probs.size(), events.size(), "survival_brier");
  if (!(horizon > 0.0)) throw BadParam("horizon must be positive");
  double sum = 0.0;
  size_t used = 0;
  for (size_t i = 0; i < times.size(); ++i) {
    const bool event_by_h = events[i] && times[i] <= horizon;
    if (!event_by_h && times[i] < horizon) continue;  // censored before horizon
    const double p = event_probs[i];
    if (!(p >= 0.0 && p <= 1.0)) throw BadParam("survival_brier: probability outside [0,1]");
    const double d = (event_by_h ? 1.0 : 0.0) - p;
    sum += d * d;
    ++used;
  }
  if (used == 0) throw NoUsableSubjects("every subject is censored before the horizon");
  return {"survival_brier", sum / static_cast<double>(used), used};
}

MetricResult RSquared(std::span<const double> predictions, std::span<const double> targets) {
  RequireSameLength(predictions.size(), targets.size(), "r_squared");
  if (targets.size() < 2) throw DegenerateInput("r_squared needs two or more targets");
  const double mean =
      std::accumulate(targets.begin(), targets.end(), 0.0) / static_cast<double>(targets.size());
  double sse = 0.0, sst = 0.0;
  for (size_t i = 0; i < targets.size(); ++i) {
    sse += (targets[i] - predictions[i]) * (targets[i] - predictions[i]);
    sst += (targets[i] - mean) * (targets[i] - mean);
  }
  if (sst == 0.0) throw DegenerateInput("r_squared on a constant target");
  return {"r_squared", 1.0 - sse / sst, targets.size()};
}

std::vector<double> ThresholdGrid(double tmin, double tmax, double step) {
  if (!(step > 0.0) || !(tmin > 0.0) || !(tmax < 1.0) || tmin > tmax) {
    throw BadThreshold("threshold grid must lie in (0,1) with a positive step");
  }
  std::vector<double> out;
  const auto n = static_cast<size_t>(std::floor((tmax - tmin) / step + 1e-9)) + 1;
  for (size_t i = 0; i < n; ++i) {
    // Round to 12 decimals so 0.01 * 7 prints as 0.07.
    out.push_back(std::round((tmin + step * static_cast<double>(i)) * 1e12) / 1e12);
  }
  return out;
}

std::vector<double> DefaultNetBenefitThresholds() { return ThresholdGrid(0.01, 0.50, 0.01); }

NetBenefitCurve NetBenefit(std::span<const double> probs, std::span<const double> labels,
                           std::span<const double> thresholds) {
  RequireSameLength(probs.size(), labels.size(), "net_benefit");
  if (probs.empty()) throw BadParam("net benefit on empty input");
  for (size_t i = 0; i < thresholds.size(); ++i) {
    if (!(thresholds[i] > 0.0 && thresholds[i] < 1.0) ||
        (i > 0 && !(thresholds[i] > thresholds[i - 1]))) {
      throw BadThreshold("thresholds must be ascending inside (0,1)");
    }
  }
  const auto n = static_cast<double>(probs.size());
  double positives = 0.0;
  for (double y : labels) positives += y > 0.5 ? 1.0 : 0.0;
  const double prevalence = positives / n;

  NetBenefitCurve curve;
  curve.thresholds.assign(thresholds.begin(), thresholds.end());
  for (double t : thresholds) {
    double tp = 0.0, fp = 0.0;
    for (size_t i = 0; i < probs.size(); ++i) {
      if (probs[i] >= t) (labels[i] > 0.5 ? tp : fp) += 1.0;
    }
    // Written exactly as TP/N - FP/N * t/(1-t) and p - (1-p) * t/(1-t).
    curve.model_nb.push_back(tp / n - fp / n * t / (1.0 - t));
    curve.treat_all_nb.push_back(prevalence - (1.0 - prevalence) * t / (1.0 - t));
    curve.treat_none_nb.push_back(0.0);
  }
  return curve;
}

double CohensD(std::span<const double> values, std::span<const int> group) {
  RequireSameLength(values.size(), group.size(), "cohens_d");
  double sum[2] = {0.0, 0.0};
  double count[2] = {0.0, 0.0};
  for (size_t i = 0; i < values.size(); ++i) {
    const int g = group[i] ? 1 : 0;
    sum[g] += values[i];
    count[g] += 1.0;
  }
  if (count[0] < 2.0 || count[1] < 2.0) {
    throw DegenerateGroups("each group needs at least two members");
  }
  const double mean[2] = {sum[0] / count[0], sum[1] / count[1]};
  double ss[2] = {0.0, 0.0};
  for (size_t i = 0; i < values.size(); ++i) {
    const int g = group[i] ? 1 : 0;
    ss[g] += (values[i] - mean[g]) * (values[i] - mean[g]);
  }
  const double pooled = (ss[0] + ss[1]) / (count[0] + count[1] - 2.0);
  if (!(pooled > 0.0)) throw DegenerateGroups("pooled variance is zero");
  return (mean[1] - mean[0]) / std::sqrt(pooled);
}

}  // namespace prognos
