#include <algorithm>
#include <cmath>
#include <numeric>

#include "internal.h"
#include "prognos/error.h"
#include "prognos/rng.h"

namespace prognos {

double Tree::Predict(std::span<const double> row) const {
  int node = 0;
  while (feature[static_cast<size_t>(node)] >= 0) {
    const auto n = static_cast<size_t>(node);
    node = row[static_cast<size_t>(feature[n])] <= threshold[n] ? left[n] : right[n];
  }
  return value[static_cast<size_t>(node)];
}

nlohmann::json Tree::ToJson() const {
  return {{"feature", feature},
          {"threshold", threshold},
          {"left", left},
          {"right", right},
          {"value", value}};
}

Tree Tree::FromJson(const nlohmann::json& j) {
  Tree t;
  t.feature = j.at("feature").get<std::vector<int>>();
  t.threshold = j.at("threshold").get<std::vector<double>>();
  t.left = j.at("left").get<std::vector<int>>();
  t.right = j.at("right").get<std::vector<int>>();
  t.value = j.at("value").get<std::vector<double>>();
  const size_t n = t.feature.size();
  if (n == 0 || t.threshold.size() != n || t.left.size() != n || t.right.size() != n ||
      t.value.size() != n) {
    throw ShapeMismatch("tree node arrays disagree in length");
  }
  for (size_t i = 0; i < n; ++i) {
    if (t.feature[i] >= 0 &&
        (t.left[i] <= static_cast<int>(i) || t.right[i] <= static_cast<int>(i) ||
         t.left[i] >= static_cast<int>(n) || t.right[i] >= static_cast<int>(n))) {
      throw ShapeMismatch("tree child index out of order");
    }
  }
  return t;
}

namespace {

// Per-feature row orders, ascending value with ties by row index.
std::vector<std::vector<uint32_t>> SortColumns(const Matrix& x) {
  std::vector<std::vector<uint32_t>> sorted(x.cols());
  for (size_t c = 0; c < x.cols(); ++c) {
    auto& order = sorted[c];
    order.resize(x.rows());
    std::iota(order.begin(), order.end(), 0u);
    std::stable_sort(order.begin(), order.end(),
                     [&](uint32_t a, uint32_t b) { return x(a, c) < x(b, c); });
  }
  return sorted;
}

struct NodeStats {
  double w = 0.0;
  double s = 0.0;   // sum of w * y
  double ss = 0.0;  // sum of w * y^2
};

struct SplitCandidate {
  double gain = 0.0;
  int feature = -1;
  double threshold = 0.0;
};

// Level-wise exact greedy construction: one pass over each presorted column
// per depth evaluates every open node at once.
Tree BuildTreeSorted(const Matrix& x, const std::vector<std::vector<uint32_t>>& sorted,
                     std::span<const double> target, std::span<const double> weights,
                     const TreeParams& params, Rng* rng) {
  const size_t n = x.rows(), p = x.cols();
  auto weight = [&](size_t r) { return weights.empty() ? 1.0 : weights[r]; };

  Tree tree;
  std::vector<NodeStats> stats;
  auto add_node = [&](const NodeStats& st) {
    tree.feature.push_back(-1);
    tree.threshold.push_back(0.0);
    tree.left.push_back(-1);
    tree.right.push_back(-1);
    tree.value.push_back(st.w > 0.0 ? st.s / st.w : 0.0);
    stats.push_back(st);
    return static_cast<int>(tree.feature.size() - 1);
  };

  std::vector<int> node_of(n, -1);
  NodeStats root;
  for (size_t r = 0; r < n; ++r) {
    const double w = weight(r);
    if (w <= 0.0) continue;
    node_of[r] = 0;
    root.w += w;
    root.s += w * target[r];
    root.ss += w * target[r] * target[r];
  }
  if (root.w <= 0.0) throw DegenerateInput("tree has no weighted rows");
  add_node(root);

  const size_t draw = std::max<size_t>(
      1, static_cast<size_t>(std::lround(params.feature_frac * static_cast<double>(p))));
  std::vector<int> open = {0};
  for (size_t depth = 0; depth < params.max_depth && !open.empty(); ++depth) {
    // Nodes that may still split.
    std::vector<int> active;
    for (int v : open) {
      const auto& st = stats[static_cast<size_t>(v)];
      const double sse = st.ss - st.s * st.s / st.w;
      if (st.w >= 2.0 * params.min_leaf && sse > 1e-12 * std::max(1.0, st.ss)) active.push_back(v);
    }
    if (active.empty()) break;
    std::vector<int> slot(tree.feature.size(), -1);
    for (size_t i = 0; i < active.size(); ++i) slot[static_cast<size_t>(active[i])] = static_cast<int>(i);

    // Feature subsets per node, drawn in node order.
    std::vector<std::vector<uint8_t>> allowed;
    if (draw < p) {
      allowed.assign(active.size(), std::vector<uint8_t>(p, 0));
      std::vector<size_t> feats(p);
      for (size_t i = 0; i < active.size(); ++i) {
        std::iota(feats.begin(), feats.end(), 0);
        for (size_t k = 0; k < draw; ++k) {
          const size_t j = k + rng->Below(p - k);
          std::swap(feats[k], feats[j]);
          allowed[i][feats[k]] = 1;
        }
      }
    }

    std::vector<SplitCandidate> best(active.size());
    std::vector<NodeStats> left(active.size());
    std::vector<double> last(active.size());
    std::vector<uint8_t> seen(active.size());
    for (size_t f = 0; f < p; ++f) {
      std::fill(left.begin(), left.end(), NodeStats{});
      std::fill(seen.begin(), seen.end(), 0);
      for (uint32_t r : sorted[f]) {
        const int v = node_of[r];
        if (v < 0) continue;
        const int i = slot[static_cast<size_t>(v)];
        if (i < 0) continue;
        const auto si = static_cast<size_t>(i);
        if (!allowed.empty() && !allowed[si][f]) continue;
        const double xv = x(r, f);
        auto& l = left[si];
        if (seen[si] && xv > last[si]) {
          const auto& tot = stats[static_cast<size_t>(v)];
          const double rw = tot.w - l.w;
          if (l.w >= params.min_leaf && rw >= params.min_leaf) {
            const double rs = tot.s - l.s;
            const double gain = l.s * l.s / l.w + rs * rs / rw - tot.s * tot.s / tot.w;
            if (gain > best[si].gain) {
              double thr = 0.5 * (last[si] + xv);
              if (!(thr < xv)) thr = last[si];
              best[si] = {gain, static_cast<int>(f), thr};
            }
          }
        }
        const double w = weight(r);
        l.w += w;
        l.s += w * target[r];
        l.ss += w * target[r] * target[r];
        last[si] = xv;
        seen[si] = 1;
      }
    }

    std::vector<int> next_open;
    std::vector<std::pair<int, int>> children(active.size(), {-1, -1});
    for (size_t i = 0; i < active.size(); ++i) {
      if (best[i].feature < 0 || !(best[i].gain > 1e-12)) continue;
      const auto v = static_cast<size_t>(active[i]);
      tree.feature[v] = best[i].feature;
      tree.threshold[v] = best[i].threshold;
      children[i] = {add_node({}), add_node({})};
      tree.left[v] = children[i].first;
      tree.right[v] = children[i].second;
      next_open.push_back(children[i].first);
      next_open.push_back(children[i].second);
    }
    for (size_t r = 0; r < n; ++r) {
      const int v = node_of[r];
      if (v < 0 || static_cast<size_t>(v) >= slot.size()) continue;
      const int i = slot[static_cast<size_t>(v)];
      if (i < 0 || children[static_cast<size_t>(i)].first < 0) continue;
      const auto vv = static_cast<size_t>(v);
      const int child = x(r, static_cast<size_t>(tree.feature[vv])) <= tree.threshold[vv]
                            ? children[static_cast<size_t>(i)].first
                            : children[static_cast<size_t>(i)].second;
      node_of[r] = child;
      auto& st = stats[static_cast<size_t>(child)];
      const double w = weight(r);
      st.w += w;
      st.s += w * target[r];
      st.ss += w * target[r] * target[r];
    }
    for (int c : next_open) {
      const auto& st = stats[static_cast<size_t>(c)];
      tree.value[static_cast<size_t>(c)] = st.w > 0.0 ? st.s / st.w : 0.0;
    }
    open = std::move(next_open);
  }
  return tree;
}

std::vector<double> Bootstrap(size_t n, Rng& rng) {
  std::vector<double> w(n, 0.0);
  for (size_t i = 0; i < n; ++i) w[rng.Below(n)] += 1.0;
  return w;
}

std::vector<double> PredictTrees(const std::vector<Tree>& trees, const Matrix& x) {
  std::vector<double> out(x.rows(), 0.0);
  for (size_t r = 0; r < x.rows(); ++r) {
    double s = 0.0;
    for (const auto& t : trees) s += t.Predict(x.row(r));
    out[r] = s / static_cast<double>(trees.size());
  }
  return out;
}

double Sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

constexpr double kProbClip = 1e-12;

double LogLoss(std::span<const double> y, std::span<const double> f) {
  double s = 0.0;
  for (size_t i = 0; i < y.size(); ++i) {
    const double p = std::clamp(Sigmoid(f[i]), kProbClip, 1.0 - kProbClip);
    s -= y[i] * std::log(p) + (1.0 - y[i]) * std::log(1.0 - p);
  }
  return s / static_cast<double>(y.size());
}

double HalfMse(std::span<const double> y, std::span<const double> f) {
  double s = 0.0;
  for (size_t i = 0; i < y.size(); ++i) s += 0.5 * (y[i] - f[i]) * (y[i] - f[i]);
  return s / static_cast<double>(y.size());
}

// Decision tree and random forest: averaged leaf means (class-1 fraction for
// classification).
class TreeEnsembleModel : public FittedLearner {
 public:
  TreeEnsembleModel(Family family, Task task, size_t dim, std::vector<Tree> trees)
      : FittedLearner(family, task, dim), trees_(std::move(trees)) {}

 protected:
  std::vector<double> Score(const Matrix& x) const override { return PredictTrees(trees_, x); }

  nlohmann::json Params() const override {
    nlohmann::json trees = nlohmann::json::array();
    for (const auto& t : trees_) trees.push_back(t.ToJson());
    return {{"trees", trees}};
  }

 private:
  std::vector<Tree> trees_;
};

class BoostingModel : public FittedLearner {
 public:
  BoostingModel(Task task, size_t dim, double base, std::vector<Tree> trees,
                std::vector<double> trace)
      : FittedLearner(Family::kGradientBoosting, task, dim),
        base_(base),
        trees_(std::move(trees)),
        trace_(std::move(trace)) {}

  std::vector<double> TrainingLoss() const override { return trace_; }

 protected:
  std::vector<double> Score(const Matrix& x) const override {
    std::vector<double> out(x.rows());
    for (size_t r = 0; r < x.rows(); ++r) {
      double f = base_;
      for (const auto& t : trees_) f += t.Predict(x.row(r));
      out[r] = task() == Task::kClassification ? Sigmoid(f) : f;
    }
    return out;
  }

  nlohmann::json Params() const override {
    nlohmann::json trees = nlohmann::json::array();
    for (const auto& t : trees_) trees.push_back(t.ToJson());
    return {{"base", base_}, {"trees", trees}, {"trace", trace_}};
  }

 private:
  double base_;
  std::vector<Tree> trees_;
  std::vector<double> trace_;
};

}  // namespace

Tree BuildTree(const Matrix& x, std::span<const double> target, std::span<const double> weights,
               const TreeParams& params, Rng* rng) {
  if (target.size() != x.rows() || (!weights.empty() && weights.size() != x.rows())) {
    throw ShapeMismatch("tree inputs disagree in length");
  }
  if (params.feature_frac < 1.0 && rng == nullptr) throw BadParam("feature subsampling needs an rng");
  return BuildTreeSorted(x, SortColumns(x), target, weights, params, rng);
}

RegressionForest RegressionForest::Fit(const Matrix& x, std::span<const double> y, size_t n_trees,
                                       const TreeParams& params, uint64_t seed) {
  if (n_trees == 0) throw BadParam("forest needs at least one tree");
  const auto sorted = SortColumns(x);
  RegressionForest forest;
  for (size_t t = 0; t < n_trees; ++t) {
    Rng rng(seed + t);
    const auto w = Bootstrap(x.rows(), rng);
    forest.trees_.push_back(BuildTreeSorted(x, sorted, y, w, params, &rng));
  }
  return forest;
}

void RegressionForest::Predict(std::span<const double> row, double* mean, double* sd) const {
  double s = 0.0, ss = 0.0;
  for (const auto& t : trees_) {
    const double v = t.Predict(row);
    s += v;
    ss += v * v;
  }
  const auto n = static_cast<double>(trees_.size());
  *mean = s / n;
  *sd = std::sqrt(std::max(0.0, ss / n - (*mean) * (*mean)));
}

namespace learners_internal {

FittedPtr FitDecisionTree(const LearnerConfig& cfg, const Matrix& x, const Outcome& y, Task task) {
  TreeParams params;
  params.max_depth = static_cast<size_t>(cfg.Get("max_depth"));
  params.min_leaf = cfg.Get("min_leaf");
  std::vector<Tree> trees{BuildTree(x, y.y, {}, params, nullptr)};
  return std::make_shared<TreeEnsembleModel>(Family::kDecisionTree, task, x.cols(),
                                             std::move(trees));
}

FittedPtr FitRandomForest(const LearnerConfig& cfg, const Matrix& x, const Outcome& y, Task task,
                          uint64_t seed) {
  TreeParams params;
  params.max_depth = static_cast<size_t>(cfg.Get("max_depth"));
  params.feature_frac = cfg.Get("feature_frac");
  const auto forest = RegressionForest::Fit(x, y.y, static_cast<size_t>(cfg.Get("n_trees")),
                                            params, seed);
  return std::make_shared<TreeEnsembleModel>(Family::kRandomForest, task, x.cols(),
                                             forest.trees());
}

FittedPtr FitGradientBoosting(const LearnerConfig& cfg, const Matrix& x, const Outcome& y,
                              Task task, uint64_t /*seed*/) {
  TreeParams params;
  params.max_depth = static_cast<size_t>(cfg.Get("max_depth"));
  const double rate = cfg.Get("rate");
  const auto rounds = static_cast<size_t>(cfg.Get("rounds"));
  const size_t n = x.rows();
  const bool classify = task == Task::kClassification;

  double base;
  if (classify) {
    const double p = std::clamp(std::accumulate(y.y.begin(), y.y.end(), 0.0) / static_cast<double>(n),
                                1e-6, 1.0 - 1e-6);
    base = std::log(p / (1.0 - p));
  } else {
    base = std::accumulate(y.y.begin(), y.y.end(), 0.0) / static_cast<double>(n);
  }
  std::vector<double> f(n, base), resid(n);
  auto loss = [&]() { return classify ? LogLoss(y.y, f) : HalfMse(y.y, f); };
  std::vector<double> trace{loss()};
  const auto sorted = SortColumns(x);
  std::vector<Tree> trees;
  for (size_t m = 0; m < rounds; ++m) {
    for (size_t i = 0; i < n; ++i) resid[i] = y.y[i] - (classify ? Sigmoid(f[i]) : f[i]);
    Tree t = BuildTreeSorted(x, sorted, resid, {}, params, nullptr);
    for (double& v : t.value) v *= rate;
    for (size_t i = 0; i < n; ++i) f[i] += t.Predict(x.row(i));
    trees.push_back(std::move(t));
    trace.push_back(loss());
  }
  return std::make_shared<BoostingModel>(task, x.cols(), base, std::move(trees), std::move(trace));
}

FittedPtr TreesFromJson(Family family, Task task, size_t dim, const nlohmann::json& params) {
  std::vector<Tree> trees;
  for (const auto& t : params.at("trees")) trees.push_back(Tree::FromJson(t));
  for (const auto& t : trees) {
    for (int feat : t.feature) {
      if (feat >= static_cast<int>(dim)) throw ShapeMismatch("tree splits on an unknown feature");
    }
  }
  if (family == Family::kGradientBoosting) {
    return std::make_shared<BoostingModel>(task, dim, params.at("base").get<double>(),
                                           std::move(trees),
                                           params.at("trace").get<std::vector<double>>());
  }
  if (trees.empty()) throw ShapeMismatch("tree model without trees");
  return std::make_shared<TreeEnsembleModel>(family, task, dim, std::move(trees));
}

}  // namespace learners_internal
}  // namespace prognos
