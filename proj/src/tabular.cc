#include "prognos/tabular.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>

#include "prognos/error.h"
#include "prognos/rng.h"

namespace prognos {

std::string_view ToString(ColumnKind kind) {
  switch (kind) {
    case ColumnKind::kNumeric: return "numeric";
    case ColumnKind::kBinary: return "binary";
    case ColumnKind::kCategorical: return "categorical";
  }
  return "numeric";
}

std::string_view ToString(ColumnRole role) {
  switch (role) {
    case ColumnRole::kFeature: return "feature";
    case ColumnRole::kTarget: return "target";
    case ColumnRole::kTime: return "time";
    case ColumnRole::kEvent: return "event";
    case ColumnRole::kIgnore: return "ignore";
  }
  return "feature";
}

ColumnKind ParseColumnKind(std::string_view s) {
  if (s == "numeric") return ColumnKind::kNumeric;
  if (s == "binary") return ColumnKind::kBinary;
  if (s == "categorical") return ColumnKind::kCategorical;
  throw SchemaMismatch("unknown column kind '" + std::string(s) + "'");
}

ColumnRole ParseColumnRole(std::string_view s) {
  if (s == "feature") return ColumnRole::kFeature;
  if (s == "target") return ColumnRole::kTarget;
  if (s == "time") return ColumnRole::kTime;
  if (s == "event") return ColumnRole::kEvent;
  if (s == "ignore") return ColumnRole::kIgnore;
  throw SchemaMismatch("unknown column role '" + std::string(s) + "'");
}

void ValidateSchema(const Schema& schema) {
  std::set<std::string> seen;
  for (const auto& col : schema) {
    if (col.name.empty()) throw SchemaMismatch("column with empty name");
    if (!seen.insert(col.name).second) {
      throw SchemaMismatch("duplicate column name '" + col.name + "'");
    }
    if (col.kind != ColumnKind::kCategorical && !col.categories.empty()) {
      throw SchemaMismatch("categories given for non-categorical column '" + col.name + "'");
    }
    if (col.role == ColumnRole::kEvent && col.kind != ColumnKind::kBinary) {
      throw SchemaMismatch("event column '" + col.name + "' must be binary");
    }
    if (col.role == ColumnRole::kTime && col.kind != ColumnKind::kNumeric) {
      throw SchemaMismatch("time column '" + col.name + "' must be numeric");
    }
    std::set<std::string> levels(col.categories.begin(), col.categories.end());
    if (levels.size() != col.categories.size()) {
      throw SchemaMismatch("duplicate category level in '" + col.name + "'");
    }
  }
}

Schema SchemaFromJson(const nlohmann::json& j) {
  if (!j.is_array()) throw SchemaMismatch("schema must be a JSON array");
  Schema schema;
  for (const auto& entry : j) {
    ColumnSchema col;
    col.name = entry.at("name").get<std::string>();
    col.kind = ParseColumnKind(entry.at("kind").get<std::string>());
    col.role = entry.contains("role") ? ParseColumnRole(entry.at("role").get<std::string>())
                                      : ColumnRole::kFeature;
    if (entry.contains("categories")) {
      col.categories = entry.at("categories").get<std::vector<std::string>>();
    }
    schema.push_back(std::move(col));
  }
  ValidateSchema(schema);
  return schema;
}

nlohmann::json SchemaToJson(const Schema& schema) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& col : schema) {
    nlohmann::json entry = {{"name", col.name},
                            {"kind", ToString(col.kind)},
                            {"role", ToString(col.role)}};
    if (col.kind == ColumnKind::kCategorical) entry["categories"] = col.categories;
    out.push_back(std::move(entry));
  }
  return out;
}

Schema LoadSchemaFile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open schema file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("schema file " + path.string() + ": " + e.what());
  }
  return SchemaFromJson(j);
}

// ---------------------------------------------------------------------------

Dataset::Dataset(Schema schema, size_t n_rows)
    : schema_(std::move(schema)),
      n_rows_(n_rows),
      values_(n_rows * schema_.size(), 0.0),
      missing_(n_rows * schema_.size(), 1) {}

Dataset::Dataset(Schema schema, size_t n_rows, std::vector<double> values,
                 std::vector<uint8_t> missing)
    : schema_(std::move(schema)),
      n_rows_(n_rows),
      values_(std::move(values)),
      missing_(std::move(missing)) {
  if (values_.size() != n_rows_ * schema_.size() || missing_.size() != values_.size()) {
    throw ShapeMismatch("dataset buffers do not match shape");
  }
  for (size_t i = 0; i < values_.size(); ++i) {
    if (missing_[i]) values_[i] = 0.0;
  }
}

size_t Dataset::ColumnIndex(std::string_view name) const {
  if (auto c = FindColumn(name)) return *c;
  throw UnknownColumn("no column named '" + std::string(name) + "'");
}

std::optional<size_t> Dataset::FindColumn(std::string_view name) const {
  for (size_t c = 0; c < schema_.size(); ++c) {
    if (schema_[c].name == name) return c;
  }
  return std::nullopt;
}

std::vector<size_t> Dataset::ColumnsWithRole(ColumnRole role) const {
  std::vector<size_t> out;
  for (size_t c = 0; c < schema_.size(); ++c) {
    if (schema_[c].role == role) out.push_back(c);
  }
  return out;
}

Dataset Dataset::SelectRows(std::span<const size_t> rows) const {
  const size_t nc = n_cols();
  std::vector<double> values(rows.size() * nc);
  std::vector<uint8_t> missing(rows.size() * nc);
  for (size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= n_rows_) throw ShapeMismatch("row index out of range");
    std::copy_n(values_.begin() + rows[i] * nc, nc, values.begin() + i * nc);
    std::copy_n(missing_.begin() + rows[i] * nc, nc, missing.begin() + i * nc);
  }
  return Dataset(schema_, rows.size(), std::move(values), std::move(missing));
}

Dataset Dataset::SelectColumns(std::span<const size_t> cols) const {
  Schema schema;
  for (size_t c : cols) schema.push_back(schema_.at(c));
  Dataset out(std::move(schema), n_rows_);
  for (size_t r = 0; r < n_rows_; ++r) {
    for (size_t j = 0; j < cols.size(); ++j) {
      if (!is_missing(r, cols[j])) out.set(r, j, value(r, cols[j]));
    }
  }
  return out;
}

Dataset Dataset::FeaturesOnly() const {
  const auto cols = ColumnsWithRole(ColumnRole::kFeature);
  return SelectColumns(cols);
}

Dataset Dataset::WithSchema(Schema schema) const {
  if (schema.size() != schema_.size()) throw SchemaMismatch("column count differs");
  for (size_t c = 0; c < schema.size(); ++c) {
    if (schema[c].name != schema_[c].name || schema[c].kind != schema_[c].kind ||
        schema[c].categories != schema_[c].categories) {
      throw SchemaMismatch("column '" + schema[c].name + "' differs");
    }
  }
  ValidateSchema(schema);
  Dataset out = *this;
  out.schema_ = std::move(schema);
  return out;
}

size_t Dataset::MissingCount() const {
  return static_cast<size_t>(std::count(missing_.begin(), missing_.end(), uint8_t{1}));
}

size_t Dataset::ObservedCount(size_t c) const {
  size_t n = 0;
  for (size_t r = 0; r < n_rows_; ++r) n += is_missing(r, c) ? 0 : 1;
  return n;
}

std::vector<double> Dataset::ObservedValues(size_t c) const {
  std::vector<double> out;
  for (size_t r = 0; r < n_rows_; ++r) {
    if (!is_missing(r, c)) out.push_back(value(r, c));
  }
  return out;
}

namespace {

struct Fnv1a {
  uint64_t h = 0xcbf29ce484222325ULL;
  void Bytes(const void* p, size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 0x100000001b3ULL;
    }
  }
  template <typename T>
  void Pod(const T& v) {
    Bytes(&v, sizeof(v));
  }
};

}  // namespace

uint64_t Dataset::ContentHash() const {
  Fnv1a f;
  f.Pod(static_cast<uint64_t>(n_rows_));
  f.Pod(static_cast<uint64_t>(n_cols()));
  for (const auto& col : schema_) {
    f.Bytes(col.name.data(), col.name.size());
    f.Pod(static_cast<uint8_t>(col.kind));
    for (const auto& level : col.categories) f.Bytes(level.data(), level.size() + 1);
  }
  f.Bytes(missing_.data(), missing_.size());
  for (size_t i = 0; i < values_.size(); ++i) {
    if (!missing_[i]) f.Pod(values_[i]);
  }
  return f.h;
}

// ---------------------------------------------------------------------------

std::string_view ToString(Task task) {
  switch (task) {
    case Task::kClassification: return "classification";
    case Task::kRegression: return "regression";
    case Task::kSurvival: return "survival";
  }
  return "classification";
}

std::string_view ToString(Metric metric) {
  switch (metric) {
    case Metric::kAuroc: return "auroc";
    case Metric::kCIndex: return "c_index";
    case Metric::kRSquared: return "r_squared";
  }
  return "auroc";
}

Task ParseTask(std::string_view s) {
  if (s == "classification") return Task::kClassification;
  if (s == "regression") return Task::kRegression;
  if (s == "survival") return Task::kSurvival;
  throw BadParam("unknown task '" + std::string(s) + "'");
}

Metric ParseMetric(std::string_view s) {
  if (s == "auroc") return Metric::kAuroc;
  if (s == "c_index") return Metric::kCIndex;
  if (s == "r_squared") return Metric::kRSquared;
  throw BadParam("unknown metric '" + std::string(s) + "'");
}

void TaskSpec::Validate() const {
  if (task == Task::kSurvival && !(horizon > 0.0)) {
    throw BadParam("survival task needs a positive horizon");
  }
  const bool ok = (task == Task::kClassification && primary_metric == Metric::kAuroc) ||
                  (task == Task::kSurvival && primary_metric == Metric::kCIndex) ||
                  (task == Task::kRegression && primary_metric == Metric::kRSquared);
  if (!ok) {
    throw BadParam("metric " + std::string(ToString(primary_metric)) +
                   " is not compatible with task " + std::string(ToString(task)));
  }
}

nlohmann::json TaskToJson(const TaskSpec& t) {
  return {{"task", ToString(t.task)},
          {"horizon", t.horizon},
          {"primary_metric", ToString(t.primary_metric)}};
}

TaskSpec TaskFromJson(const nlohmann::json& j) {
  TaskSpec t;
  t.task = ParseTask(j.at("task").get<std::string>());
  t.horizon = j.at("horizon").get<double>();
  t.primary_metric = ParseMetric(j.at("primary_metric").get<std::string>());
  t.Validate();
  return t;
}

void ValidateRoles(const Schema& schema, const TaskSpec& task) {
  size_t targets = 0, times = 0, events = 0, features = 0;
  for (const auto& col : schema) {
    switch (col.role) {
      case ColumnRole::kTarget: ++targets; break;
      case ColumnRole::kTime: ++times; break;
      case ColumnRole::kEvent: ++events; break;
      case ColumnRole::kFeature: ++features; break;
      case ColumnRole::kIgnore: break;
    }
  }
  if (features == 0) throw SchemaMismatch("schema has no feature columns");
  if (task.task == Task::kSurvival) {
    if (times != 1 || events != 1 || targets != 0) {
      throw SchemaMismatch("survival task needs exactly one time and one event column");
    }
    return;
  }
  if (targets != 1 || times != 0 || events != 0) {
    throw SchemaMismatch("task needs exactly one target column");
  }
  for (const auto& col : schema) {
    if (col.role != ColumnRole::kTarget) continue;
    if (task.task == Task::kClassification) {
      const bool binary = col.kind == ColumnKind::kBinary ||
                          (col.kind == ColumnKind::kCategorical && col.categories.size() <= 2);
      if (!binary) throw SchemaMismatch("classification target '" + col.name + "' must be binary");
    } else if (col.kind != ColumnKind::kNumeric) {
      throw SchemaMismatch("regression target '" + col.name + "' must be numeric");
    }
  }
}

Outcome Outcome::Select(std::span<const size_t> rows) const {
  Outcome out;
  for (size_t r : rows) {
    if (!y.empty()) out.y.push_back(y[r]);
    if (!time.empty()) out.time.push_back(time[r]);
    if (!event.empty()) out.event.push_back(event[r]);
  }
  return out;
}

Outcome ExtractOutcome(const Dataset& d, const TaskSpec& task) {
  ValidateRoles(d.schema(), task);
  auto read = [&](size_t c) {
    std::vector<double> v(d.n_rows());
    for (size_t r = 0; r < d.n_rows(); ++r) {
      if (d.is_missing(r, c)) {
        throw MissingOutcome("row " + std::to_string(r) + " has no value for '" +
                             d.column(c).name + "'");
      }
      v[r] = d.value(r, c);
    }
    return v;
  };
  Outcome out;
  if (task.task == Task::kSurvival) {
    out.time = read(d.ColumnsWithRole(ColumnRole::kTime).front());
    const auto ev = read(d.ColumnsWithRole(ColumnRole::kEvent).front());
    out.event.assign(ev.begin(), ev.end());
  } else {
    out.y = read(d.ColumnsWithRole(ColumnRole::kTarget).front());
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

// Binary stratification labels: the classification target, else the event
// indicator. Empty when neither exists.
std::vector<int> StrataLabels(const Dataset& d) {
  std::optional<size_t> col;
  for (size_t c = 0; c < d.n_cols(); ++c) {
    const auto& s = d.column(c);
    if (s.role == ColumnRole::kTarget &&
        (s.kind == ColumnKind::kBinary ||
         (s.kind == ColumnKind::kCategorical && s.categories.size() <= 2))) {
      col = c;
    }
  }
  if (!col) {
    const auto events = d.ColumnsWithRole(ColumnRole::kEvent);
    if (!events.empty()) col = events.front();
  }
  if (!col) return {};
  std::vector<int> labels(d.n_rows());
  for (size_t r = 0; r < d.n_rows(); ++r) {
    if (d.is_missing(r, *col)) {
      throw MissingOutcome("row " + std::to_string(r) + " has no stratification label");
    }
    labels[r] = d.value(r, *col) > 0.5 ? 1 : 0;
  }
  return labels;
}

}  // namespace

HoldoutSplit SplitHoldout(const Dataset& d, double fraction, uint64_t seed, bool stratify) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw BadParam("holdout fraction must be in (0,1)");
  const size_t n = d.n_rows();
  if (n < 4) throw TooFewRows("holdout split needs at least 4 rows");
  const auto n_test = static_cast<size_t>(std::llround(fraction * static_cast<double>(n)));
  if (n_test == 0 || n_test >= n) throw TooFewRows("holdout split leaves an empty part");

  Rng rng(seed);
  std::vector<size_t> test;
  if (stratify) {
    const auto labels = StrataLabels(d);
    if (labels.empty()) throw BadParam("stratified split needs a binary target or event column");
    std::vector<size_t> neg, pos;
    for (size_t r = 0; r < n; ++r) (labels[r] ? pos : neg).push_back(r);
    rng.Shuffle(std::span(neg));
    rng.Shuffle(std::span(pos));
    size_t n_pos = std::min<size_t>(
        pos.size(), static_cast<size_t>(std::llround(fraction * static_cast<double>(pos.size()))));
    size_t n_neg = n_test - std::min(n_test, n_pos);
    if (n_neg > neg.size()) {
      n_pos += n_neg - neg.size();
      n_neg = neg.size();
    }
    test.assign(neg.begin(), neg.begin() + static_cast<std::ptrdiff_t>(n_neg));
    test.insert(test.end(), pos.begin(), pos.begin() + static_cast<std::ptrdiff_t>(n_pos));
  } else {
    std::vector<size_t> all(n);
    for (size_t r = 0; r < n; ++r) all[r] = r;
    rng.Shuffle(std::span(all));
    test.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n_test));
  }
  std::sort(test.begin(), test.end());
  std::vector<uint8_t> in_test(n, 0);
  for (size_t r : test) in_test[r] = 1;
  std::vector<size_t> train;
  for (size_t r = 0; r < n; ++r) {
    if (!in_test[r]) train.push_back(r);
  }
  HoldoutSplit out;
  out.train = d.SelectRows(train);
  out.test = d.SelectRows(test);
  out.train_rows = std::move(train);
  out.test_rows = std::move(test);
  return out;
}

std::vector<size_t> FoldPlan::TrainRows(size_t fold) const {
  std::vector<size_t> rows;
  for (size_t r = 0; r < assignment.size(); ++r) {
    if (assignment[r] != fold) rows.push_back(r);
  }
  return rows;
}

std::vector<size_t> FoldPlan::TestRows(size_t fold) const {
  std::vector<size_t> rows;
  for (size_t r = 0; r < assignment.size(); ++r) {
    if (assignment[r] == fold) rows.push_back(r);
  }
  return rows;
}

std::vector<size_t> FoldPlan::FoldSizes() const {
  std::vector<size_t> sizes(k, 0);
  for (size_t f : assignment) ++sizes[f];
  return sizes;
}

FoldPlan MakeFolds(const Dataset& d, size_t k, uint64_t seed, const TaskSpec& task) {
  if (k < 2) throw BadParam("need at least 2 folds");
  const size_t n = d.n_rows();
  if (n < k) throw TooFewRows("fewer rows than folds");

  std::vector<int> labels;
  if (task.task != Task::kRegression) labels = StrataLabels(d);
  if (labels.empty()) labels.assign(n, 0);

  std::vector<size_t> neg, pos;
  for (size_t r = 0; r < n; ++r) (labels[r] ? pos : neg).push_back(r);
  Rng rng(seed);
  rng.Shuffle(std::span(pos));
  rng.Shuffle(std::span(neg));

  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  plan.assignment.assign(n, 0);
  size_t slot = 0;
  for (size_t r : pos) plan.assignment[r] = slot++ % k;
  for (size_t r : neg) plan.assignment[r] = slot++ % k;
  return plan;
}

}  // namespace prognos
