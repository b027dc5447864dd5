#include "prognos/impute.h"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "prognos/error.h"
#include "prognos/kernels.h"
#include "prognos/rng.h"

namespace prognos {

std::string_view ToString(ImputeMethod m) {
  switch (m) {
    case ImputeMethod::kMean: return "mean";
    case ImputeMethod::kMedian: return "median";
    case ImputeMethod::kMostFrequent: return "most_frequent";
    case ImputeMethod::kIterative: return "iterative";
    case ImputeMethod::kAuto: return "auto";
    case ImputeMethod::kNone: return "none";
  }
  return "?";
}

std::string_view ToString(ColumnModel m) {
  switch (m) {
    case ColumnModel::kColumnMean: return "column_mean";
    case ColumnModel::kRidgeLinear: return "ridge_linear";
    case ColumnModel::kKnn: return "knn";
    case ColumnModel::kTree: return "tree";
  }
  return "?";
}

ImputeMethod ParseImputeMethod(std::string_view s) {
  for (auto m : {ImputeMethod::kMean, ImputeMethod::kMedian, ImputeMethod::kMostFrequent,
                 ImputeMethod::kIterative, ImputeMethod::kAuto, ImputeMethod::kNone}) {
    if (ToString(m) == s) return m;
  }
  throw BadParam("unknown imputation method '" + std::string(s) + "'");
}

ColumnModel ParseColumnModel(std::string_view s) {
  for (auto m : {ColumnModel::kColumnMean, ColumnModel::kRidgeLinear, ColumnModel::kKnn,
                 ColumnModel::kTree}) {
    if (ToString(m) == s) return m;
  }
  throw BadParam("unknown imputation model '" + std::string(s) + "'");
}

void ImputerConfig::Validate() const {
  if (max_rounds < 1) throw BadParam("max_rounds must be at least 1");
  if (!(tol > 0.0)) throw BadParam("tol must be positive");
  if (method == ImputeMethod::kAuto && candidate_models.empty()) {
    throw BadParam("auto imputation needs candidate models");
  }
}

nlohmann::json ImputerConfigToJson(const ImputerConfig& c) {
  nlohmann::json models = nlohmann::json::array();
  for (auto m : c.candidate_models) models.push_back(ToString(m));
  return {{"method", ToString(c.method)},
          {"max_rounds", c.max_rounds},
          {"tol", c.tol},
          {"candidate_models", models}};
}

ImputerConfig ImputerConfigFromJson(const nlohmann::json& j) {
  ImputerConfig c;
  c.method = ParseImputeMethod(j.at("method").get<std::string>());
  c.max_rounds = j.at("max_rounds").get<size_t>();
  c.tol = j.at("tol").get<double>();
  c.candidate_models.clear();
  for (const auto& m : j.at("candidate_models")) {
    c.candidate_models.push_back(ParseColumnModel(m.get<std::string>()));
  }
  c.Validate();
  return c;
}

namespace {

constexpr double kRidgeL2 = 1e-6;
constexpr size_t kKnnNeighbors = 5;
constexpr TreeParams kTreeParams{6, 5.0, 1.0};

size_t Outputs(const ColumnSchema& c) {
  return c.kind == ColumnKind::kCategorical ? c.categories.size() : 1;
}

double Mode(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  double best = values.front();
  size_t best_run = 0;
  for (size_t i = 0; i < values.size();) {
    size_t j = i;
    while (j < values.size() && values[j] == values[i]) ++j;
    if (j - i > best_run) {
      best_run = j - i;
      best = values[i];
    }
    i = j;
  }
  return best;
}

double Median(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double Mean(const std::vector<double>& values) {
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

// Predictor encoding of one row for target column `target`: every other
// feature, categorical ones expanded one-hot.
size_t DesignWidth(const Schema& f, size_t target) {
  size_t w = 0;
  for (size_t j = 0; j < f.size(); ++j) {
    if (j != target) w += f[j].kind == ColumnKind::kCategorical ? f[j].categories.size() : 1;
  }
  return w;
}

void EncodeRow(const Schema& f, size_t target, std::span<const double> work,
               std::span<double> out) {
  size_t k = 0;
  for (size_t j = 0; j < f.size(); ++j) {
    if (j == target) continue;
    if (f[j].kind == ColumnKind::kCategorical) {
      const size_t levels = f[j].categories.size();
      for (size_t l = 0; l < levels; ++l) out[k + l] = 0.0;
      out[k + static_cast<size_t>(work[j])] = 1.0;
      k += levels;
    } else {
      out[k++] = work[j];
    }
  }
}

Matrix Encode(const Schema& f, size_t target, const Matrix& work, std::span<const size_t> rows) {
  Matrix out(rows.size(), DesignWidth(f, target));
  for (size_t i = 0; i < rows.size(); ++i) EncodeRow(f, target, work.row(rows[i]), out.row(i));
  return out;
}

// Target of output `o` (indicator for categorical levels).
std::vector<double> OutputTarget(const ColumnSchema& c, std::span<const double> y, size_t o) {
  std::vector<double> t(y.begin(), y.end());
  if (c.kind == ColumnKind::kCategorical) {
    for (double& v : t) v = v == static_cast<double>(o) ? 1.0 : 0.0;
  }
  return t;
}

std::vector<double> RidgeFit(const Matrix& x, std::span<const double> y) {
  const size_t n = x.rows(), p = x.cols();
  Eigen::MatrixXd xc(n, p);
  for (size_t r = 0; r < n; ++r) {
    for (size_t c = 0; c < p; ++c) xc(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = x(r, c);
  }
  const Eigen::VectorXd mean = xc.colwise().mean();
  xc.rowwise() -= mean.transpose();
  Eigen::VectorXd yc(n);
  double ybar = 0.0;
  for (size_t r = 0; r < n; ++r) ybar += y[r];
  ybar /= static_cast<double>(n);
  for (size_t r = 0; r < n; ++r) yc(static_cast<Eigen::Index>(r)) = y[r] - ybar;
  const double inv_n = 1.0 / static_cast<double>(n);
  Eigen::MatrixXd gram = xc.transpose() * xc * inv_n;
  gram.diagonal().array() += kRidgeL2;
  const Eigen::VectorXd beta = gram.ldlt().solve(xc.transpose() * yc * inv_n);
  std::vector<double> out{ybar - mean.dot(beta)};
  for (Eigen::Index c = 0; c < beta.size(); ++c) out.push_back(beta(c));
  return out;
}

// Fits `model` for column `c` on standardized predictors x and raw target y.
ImputeStep FitStep(const ColumnSchema& col, size_t column, ColumnModel model, const Matrix& x,
                   std::span<const double> y) {
  ImputeStep s;
  s.column = column;
  s.model = x.cols() == 0 ? ColumnModel::kColumnMean : model;
  const std::vector<double> yv(y.begin(), y.end());
  switch (s.model) {
    case ColumnModel::kColumnMean:
      s.fill = col.kind == ColumnKind::kNumeric ? Mean(yv) : Mode(yv);
      break;
    case ColumnModel::kRidgeLinear:
      for (size_t o = 0; o < Outputs(col); ++o) s.linear.push_back(RidgeFit(x, OutputTarget(col, y, o)));
      break;
    case ColumnModel::kKnn:
      s.store = x;
      s.store_y = yv;
      break;
    case ColumnModel::kTree:
      for (size_t o = 0; o < Outputs(col); ++o) {
        s.trees.push_back(BuildTree(x, OutputTarget(col, y, o), {}, kTreeParams, nullptr));
      }
      break;
  }
  return s;
}

size_t Argmax(const std::vector<double>& v) {
  size_t best = 0;
  for (size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

// Prediction for one standardized predictor row, already mapped to the
// column's value domain.
double PredictStep(const ImputeStep& s, const ColumnSchema& col, std::span<const double> x) {
  std::vector<double> out;
  switch (s.model) {
    case ColumnModel::kColumnMean:
      return s.fill;
    case ColumnModel::kRidgeLinear:
      for (const auto& w : s.linear) {
        out.push_back(w[0] + kernels::Dot(std::span<const double>(w).subspan(1), x));
      }
      break;
    case ColumnModel::kKnn: {
      const size_t n = s.store.rows();
      const size_t k = std::min(kKnnNeighbors, n);
      std::vector<std::pair<double, size_t>> d(n);
      for (size_t i = 0; i < n; ++i) d[i] = {kernels::SquaredDistance(x, s.store.row(i)), i};
      std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k), d.end());
      if (col.kind == ColumnKind::kCategorical) {
        out.assign(col.categories.size(), 0.0);
        for (size_t j = 0; j < k; ++j) out[static_cast<size_t>(s.store_y[d[j].second])] += 1.0;
      } else {
        double sum = 0.0;
        for (size_t j = 0; j < k; ++j) sum += s.store_y[d[j].second];
        out.push_back(sum / static_cast<double>(k));
      }
      break;
    }
    case ColumnModel::kTree:
      for (const auto& t : s.trees) out.push_back(t.Predict(x));
      break;
  }
  switch (col.kind) {
    case ColumnKind::kNumeric: return out[0];
    case ColumnKind::kBinary: return out[0] >= 0.5 ? 1.0 : 0.0;
    case ColumnKind::kCategorical: return static_cast<double>(Argmax(out));
  }
  return out[0];
}

void Standardize(Matrix& x, std::vector<double>* center, std::vector<double>* scale) {
  const size_t n = x.rows(), p = x.cols();
  center->assign(p, 0.0);
  scale->assign(p, 1.0);
  for (size_t c = 0; c < p; ++c) {
    double s = 0.0, ss = 0.0;
    for (size_t r = 0; r < n; ++r) s += x(r, c);
    const double m = s / static_cast<double>(n);
    for (size_t r = 0; r < n; ++r) ss += (x(r, c) - m) * (x(r, c) - m);
    const double sd = std::sqrt(ss / static_cast<double>(n));
    (*center)[c] = m;
    (*scale)[c] = sd > 1e-12 ? sd : 1.0;
  }
  for (size_t r = 0; r < n; ++r) {
    for (size_t c = 0; c < p; ++c) x(r, c) = (x(r, c) - (*center)[c]) / (*scale)[c];
  }
}

void ApplyStandardize(const ImputeStep& s, std::span<double> row) {
  for (size_t c = 0; c < row.size(); ++c) row[c] = (row[c] - s.center[c]) / s.scale[c];
}

double PredictionError(const ColumnSchema& col, double truth, double pred) {
  if (col.kind == ColumnKind::kNumeric) return (truth - pred) * (truth - pred);
  return truth == pred ? 0.0 : 1.0;
}

// Two-fold CV error of `model` on the observed rows (x standardized).
double CvError(const ColumnSchema& col, size_t column, ColumnModel model, const Matrix& x,
               std::span<const double> y, Rng& rng) {
  std::vector<size_t> idx(x.rows());
  std::iota(idx.begin(), idx.end(), 0);
  rng.Shuffle(std::span<size_t>(idx));
  const size_t half = idx.size() / 2;
  const std::vector<size_t> a(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(half));
  const std::vector<size_t> b(idx.begin() + static_cast<std::ptrdiff_t>(half), idx.end());
  double err = 0.0;
  for (int fold = 0; fold < 2; ++fold) {
    const auto& tr = fold == 0 ? a : b;
    const auto& te = fold == 0 ? b : a;
    std::vector<double> ytr;
    for (size_t i : tr) ytr.push_back(y[i]);
    const auto step = FitStep(col, column, model, x.SelectRows(tr), ytr);
    for (size_t i : te) err += PredictionError(col, y[i], PredictStep(step, col, x.row(i)));
  }
  return err / static_cast<double>(idx.size());
}

}  // namespace

std::vector<size_t> FittedImputer::MapColumns(const Dataset& d) const {
  std::vector<size_t> map;
  for (const auto& f : features_) {
    const auto idx = d.FindColumn(f.name);
    if (!idx) throw SchemaMismatch("column '" + f.name + "' is absent");
    const auto& c = d.column(*idx);
    if (c.kind != f.kind || c.categories != f.categories) {
      throw SchemaMismatch("column '" + f.name + "' differs from the training schema");
    }
    map.push_back(*idx);
  }
  return map;
}

FittedImputer FittedImputer::Fit(const Dataset& train, const ImputerConfig& cfg, uint64_t seed) {
  cfg.Validate();
  FittedImputer imp;
  imp.cfg_ = cfg;
  const auto cols = train.ColumnsWithRole(ColumnRole::kFeature);
  for (size_t c : cols) imp.features_.push_back(train.column(c));
  const size_t n = train.n_rows(), p = cols.size();

  for (size_t j = 0; j < p; ++j) {
    const auto obs = train.ObservedValues(cols[j]);
    if (obs.empty()) throw AllMissingColumn("column '" + imp.features_[j].name + "' has no observed values");
    const bool numeric = imp.features_[j].kind == ColumnKind::kNumeric;
    double init;
    if (!numeric) {
      init = Mode(obs);
    } else if (cfg.method == ImputeMethod::kMedian) {
      init = Median(obs);
    } else if (cfg.method == ImputeMethod::kMostFrequent) {
      init = Mode(obs);
    } else {
      init = Mean(obs);
    }
    imp.init_.push_back(init);
    const double m = Mean(obs);
    double ss = 0.0;
    for (double v : obs) ss += (v - m) * (v - m);
    const double sd = std::sqrt(ss / static_cast<double>(obs.size()));
    imp.spread_.push_back(sd > 1e-12 ? sd : 1.0);
  }

  if (cfg.method != ImputeMethod::kIterative && cfg.method != ImputeMethod::kAuto) {
    imp.rounds_run_ = 0;
    imp.converged_ = true;
    return imp;
  }

  std::vector<size_t> missing(p);
  for (size_t j = 0; j < p; ++j) missing[j] = n - train.ObservedCount(cols[j]);
  for (size_t j = 0; j < p; ++j) {
    if (missing[j] > 0) imp.order_.push_back(j);
  }
  std::stable_sort(imp.order_.begin(), imp.order_.end(),
                   [&](size_t a, size_t b) { return missing[a] > missing[b]; });
  if (imp.order_.empty()) {
    imp.converged_ = true;
    return imp;
  }

  Matrix work(n, p);
  for (size_t r = 0; r < n; ++r) {
    for (size_t j = 0; j < p; ++j) {
      work(r, j) = train.is_missing(r, cols[j]) ? imp.init_[j] : train.value(r, cols[j]);
    }
  }

  for (size_t round = 0; round < cfg.max_rounds; ++round) {
    std::vector<ImputeStep> steps;
    double change = 0.0;
    for (size_t j : imp.order_) {
      const auto& col = imp.features_[j];
      std::vector<size_t> obs_rows, miss_rows;
      for (size_t r = 0; r < n; ++r) {
        (train.is_missing(r, cols[j]) ? miss_rows : obs_rows).push_back(r);
      }
      Matrix x = Encode(imp.features_, j, work, obs_rows);
      std::vector<double> center, scale;
      Standardize(x, &center, &scale);
      std::vector<double> y;
      for (size_t r : obs_rows) y.push_back(work(r, j));

      ColumnModel model = ColumnModel::kRidgeLinear;
      if (cfg.method == ImputeMethod::kAuto) {
        model = cfg.candidate_models.front();
        if (obs_rows.size() >= 4 && x.cols() > 0) {
          double best = 0.0;
          for (size_t m = 0; m < cfg.candidate_models.size(); ++m) {
            Rng rng(DeriveSeed(seed, round * p + j));
            const double err = CvError(col, j, cfg.candidate_models[m], x, y, rng);
            if (m == 0 || err < best) {
              best = err;
              model = cfg.candidate_models[m];
            }
          }
        }
      }
      ImputeStep step = FitStep(col, j, model, x, y);
      step.center = std::move(center);
      step.scale = std::move(scale);

      std::vector<double> row(DesignWidth(imp.features_, j));
      for (size_t r : miss_rows) {
        EncodeRow(imp.features_, j, work.row(r), row);
        ApplyStandardize(step, row);
        const double v = PredictStep(step, col, row);
        const double delta = col.kind == ColumnKind::kNumeric
                                 ? std::abs(v - work(r, j)) / imp.spread_[j]
                                 : (v != work(r, j) ? 1.0 : 0.0);
        change = std::max(change, delta);
        work(r, j) = v;
      }
      steps.push_back(std::move(step));
    }
    imp.steps_ = std::move(steps);
    imp.rounds_run_ = round + 1;
    imp.final_change_ = change;
    if (change < cfg.tol) {
      imp.converged_ = true;
      break;
    }
  }
  return imp;
}

void FittedImputer::Sweep(Matrix& work, const std::vector<std::vector<uint8_t>>& miss,
                          double* change) const {
  for (const auto& step : steps_) {
    const size_t j = step.column;
    const auto& col = features_[j];
    std::vector<double> row(DesignWidth(features_, j));
    for (size_t r = 0; r < work.rows(); ++r) {
      if (!miss[j][r]) continue;
      EncodeRow(features_, j, work.row(r), row);
      ApplyStandardize(step, row);
      const double v = PredictStep(step, col, row);
      const double delta = col.kind == ColumnKind::kNumeric ? std::abs(v - work(r, j)) / spread_[j]
                                                            : (v != work(r, j) ? 1.0 : 0.0);
      *change = std::max(*change, delta);
      work(r, j) = v;
    }
  }
}

Dataset FittedImputer::Transform(const Dataset& d) const {
  const auto cols = MapColumns(d);
  Dataset out = d;
  if (cfg_.method == ImputeMethod::kNone) return out;
  const size_t n = d.n_rows(), p = cols.size();
  std::vector<std::vector<uint8_t>> miss(p, std::vector<uint8_t>(n, 0));
  bool any = false;
  Matrix work(n, p);
  for (size_t r = 0; r < n; ++r) {
    for (size_t j = 0; j < p; ++j) {
      miss[j][r] = d.is_missing(r, cols[j]) ? 1 : 0;
      any = any || miss[j][r];
      work(r, j) = miss[j][r] ? init_[j] : d.value(r, cols[j]);
    }
  }
  if (!any) return out;
  for (size_t round = 0; round < rounds_run_; ++round) {
    double change = 0.0;
    Sweep(work, miss, &change);
    if (change < cfg_.tol) break;
  }
  for (size_t r = 0; r < n; ++r) {
    for (size_t j = 0; j < p; ++j) {
      if (miss[j][r]) out.set(r, cols[j], work(r, j));
    }
  }
  return out;
}

std::vector<std::pair<std::string, ColumnModel>> FittedImputer::SelectedModels() const {
  std::vector<std::pair<std::string, ColumnModel>> out;
  for (const auto& s : steps_) out.emplace_back(features_[s.column].name, s.model);
  return out;
}

nlohmann::json FittedImputer::ToJson() const {
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& s : steps_) {
    nlohmann::json js = {{"column", s.column},
                         {"model", ToString(s.model)},
                         {"center", s.center},
                         {"scale", s.scale}};
    switch (s.model) {
      case ColumnModel::kColumnMean: js["fill"] = s.fill; break;
      case ColumnModel::kRidgeLinear: js["linear"] = s.linear; break;
      case ColumnModel::kKnn:
        js["store_rows"] = s.store.rows();
        js["store"] = s.store.data();
        js["store_y"] = s.store_y;
        break;
      case ColumnModel::kTree: {
        nlohmann::json trees = nlohmann::json::array();
        for (const auto& t : s.trees) trees.push_back(t.ToJson());
        js["trees"] = trees;
        break;
      }
    }
    steps.push_back(js);
  }
  return {{"config", ImputerConfigToJson(cfg_)},
          {"features", SchemaToJson(features_)},
          {"init", init_},
          {"spread", spread_},
          {"order", order_},
          {"steps", steps},
          {"rounds_run", rounds_run_},
          {"converged", converged_},
          {"final_change", final_change_}};
}

FittedImputer FittedImputer::FromJson(const nlohmann::json& j) {
  FittedImputer imp;
  imp.cfg_ = ImputerConfigFromJson(j.at("config"));
  imp.features_ = SchemaFromJson(j.at("features"));
  imp.init_ = j.at("init").get<std::vector<double>>();
  imp.spread_ = j.at("spread").get<std::vector<double>>();
  imp.order_ = j.at("order").get<std::vector<size_t>>();
  imp.rounds_run_ = j.at("rounds_run").get<size_t>();
  imp.converged_ = j.at("converged").get<bool>();
  imp.final_change_ = j.at("final_change").get<double>();
  const size_t p = imp.features_.size();
  if (imp.init_.size() != p || imp.spread_.size() != p) {
    throw ShapeMismatch("imputer statistics do not match its features");
  }
  for (const auto& js : j.at("steps")) {
    ImputeStep s;
    s.column = js.at("column").get<size_t>();
    if (s.column >= p) throw ShapeMismatch("imputer step refers to an unknown column");
    s.model = ParseColumnModel(js.at("model").get<std::string>());
    s.center = js.at("center").get<std::vector<double>>();
    s.scale = js.at("scale").get<std::vector<double>>();
    const size_t width = DesignWidth(imp.features_, s.column);
    if (s.center.size() != width || s.scale.size() != width) {
      throw ShapeMismatch("imputer step has the wrong predictor width");
    }
    switch (s.model) {
      case ColumnModel::kColumnMean: s.fill = js.at("fill").get<double>(); break;
      case ColumnModel::kRidgeLinear:
        s.linear = js.at("linear").get<std::vector<std::vector<double>>>();
        break;
      case ColumnModel::kKnn:
        s.store = Matrix(js.at("store_rows").get<size_t>(), width,
                         js.at("store").get<std::vector<double>>());
        s.store_y = js.at("store_y").get<std::vector<double>>();
        break;
      case ColumnModel::kTree:
        for (const auto& t : js.at("trees")) s.trees.push_back(Tree::FromJson(t));
        break;
    }
    imp.steps_.push_back(std::move(s));
  }
  return imp;
}

std::vector<Dataset> RepeatedImpute(const Dataset& train, const ImputerConfig& cfg, size_t r,
                                    uint64_t base_seed) {
  if (r < 1) throw BadParam("repeated imputation needs r >= 1");
  std::vector<Dataset> out;
  for (size_t i = 0; i < r; ++i) {
    out.push_back(FittedImputer::Fit(train, cfg, base_seed + i).Transform(train));
  }
  return out;
}

}  // namespace prognos
