#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace prognos {

enum class ColumnKind { kNumeric, kBinary, kCategorical };
enum class ColumnRole { kFeature, kTarget, kTime, kEvent, kIgnore };

std::string_view ToString(ColumnKind kind);
std::string_view ToString(ColumnRole role);
ColumnKind ParseColumnKind(std::string_view s);
ColumnRole ParseColumnRole(std::string_view s);

struct ColumnSchema {
  std::string name;
  ColumnKind kind = ColumnKind::kNumeric;
  ColumnRole role = ColumnRole::kFeature;
  // Ordered levels; categorical columns only. Cell payloads index this list.
  std::vector<std::string> categories;

  bool operator==(const ColumnSchema&) const = default;
};

using Schema = std::vector<ColumnSchema>;

// Throws SchemaMismatch on duplicate names or malformed entries.
void ValidateSchema(const Schema& schema);

// Schema file format: JSON array of {name, kind, role, categories?}.
Schema SchemaFromJson(const nlohmann::json& j);
nlohmann::json SchemaToJson(const Schema& schema);
Schema LoadSchemaFile(const std::filesystem::path& path);

// Typed table with an explicit missingness mask. Cells are stored row-major.
// Masked cells carry a zero payload that must never be read as data.
class Dataset {
 public:
  Dataset() = default;
  // All cells missing.
  Dataset(Schema schema, size_t n_rows);
  Dataset(Schema schema, size_t n_rows, std::vector<double> values,
          std::vector<uint8_t> missing);

  const Schema& schema() const { return schema_; }
  const ColumnSchema& column(size_t c) const { return schema_[c]; }
  size_t n_rows() const { return n_rows_; }
  size_t n_cols() const { return schema_.size(); }

  bool is_missing(size_t r, size_t c) const { return missing_[r * n_cols() + c] != 0; }
  // Payload of an observed cell.
  double value(size_t r, size_t c) const { return values_[r * n_cols() + c]; }
  std::optional<double> get(size_t r, size_t c) const {
    if (is_missing(r, c)) return std::nullopt;
    return value(r, c);
  }
  void set(size_t r, size_t c, double v) {
    values_[r * n_cols() + c] = v;
    missing_[r * n_cols() + c] = 0;
  }
  void set_missing(size_t r, size_t c) {
    values_[r * n_cols() + c] = 0.0;
    missing_[r * n_cols() + c] = 1;
  }

  // Throws UnknownColumn.
  size_t ColumnIndex(std::string_view name) const;
  std::optional<size_t> FindColumn(std::string_view name) const;
  std::vector<size_t> ColumnsWithRole(ColumnRole role) const;

  Dataset SelectRows(std::span<const size_t> rows) const;
  Dataset SelectColumns(std::span<const size_t> cols) const;
  // Feature-role columns only, in schema order.
  Dataset FeaturesOnly() const;
  // Same cells with a replaced role assignment (names and kinds must match).
  Dataset WithSchema(Schema schema) const;

  size_t MissingCount() const;
  size_t ObservedCount(size_t c) const;
  std::vector<double> ObservedValues(size_t c) const;

  // FNV-1a over shape, names, mask and observed payloads.
  uint64_t ContentHash() const;

  bool operator==(const Dataset&) const = default;

 private:
  Schema schema_;
  size_t n_rows_ = 0;
  std::vector<double> values_;
  std::vector<uint8_t> missing_;
};

enum class Task { kClassification, kRegression, kSurvival };
enum class Metric { kAuroc, kCIndex, kRSquared };

std::string_view ToString(Task task);
std::string_view ToString(Metric metric);
Task ParseTask(std::string_view s);
Metric ParseMetric(std::string_view s);

struct TaskSpec {
  Task task = Task::kClassification;
  double horizon = 0.0;  // survival only, same unit as the time column
  Metric primary_metric = Metric::kAuroc;

  static TaskSpec Classification() { return {Task::kClassification, 0.0, Metric::kAuroc}; }
  static TaskSpec Regression() { return {Task::kRegression, 0.0, Metric::kRSquared}; }
  static TaskSpec Survival(double horizon) { return {Task::kSurvival, horizon, Metric::kCIndex}; }

  // Throws BadParam.
  void Validate() const;
  bool operator==(const TaskSpec&) const = default;
};

nlohmann::json TaskToJson(const TaskSpec& t);
TaskSpec TaskFromJson(const nlohmann::json& j);

// Checks role cardinalities for the task: one target for classification and
// regression, one time plus one event column for survival.
void ValidateRoles(const Schema& schema, const TaskSpec& task);

struct Outcome {
  std::vector<double> y;     // classification (0/1) or regression target
  std::vector<double> time;  // survival
  std::vector<int> event;    // survival

  size_t size() const { return time.empty() ? y.size() : time.size(); }
  Outcome Select(std::span<const size_t> rows) const;
};

// Throws MissingOutcome when an outcome cell is masked.
Outcome ExtractOutcome(const Dataset& d, const TaskSpec& task);

// Loads a CSV (RFC 4180 quoting, mandatory header). Empty cells and the
// exact token "NA" are missing. Categorical columns with no fixed levels get
// their levels from the data in lexicographic order.
Dataset LoadCsv(const std::filesystem::path& path, const Schema& schema);
Dataset ReadCsv(std::istream& in, const Schema& schema);
void WriteCsv(std::ostream& out, const Dataset& d);
void SaveCsv(const std::filesystem::path& path, const Dataset& d);

struct HoldoutSplit {
  Dataset train;
  Dataset test;
  std::vector<size_t> train_rows;
  std::vector<size_t> test_rows;
};

// Test part has round(fraction * n) rows. With stratify, the binary target
// (or the event column of a survival schema) is split class by class: each
// class's row indices are shuffled independently (negatives first, then
// positives, from one generator) and the first round(fraction * n_pos)
// positives plus the remaining quota of negatives form the test part.
HoldoutSplit SplitHoldout(const Dataset& d, double fraction, uint64_t seed, bool stratify);

struct FoldPlan {
  size_t k = 0;
  std::vector<size_t> assignment;  // per row, in [0, k)
  uint64_t seed = 0;

  std::vector<size_t> TrainRows(size_t fold) const;
  std::vector<size_t> TestRows(size_t fold) const;
  std::vector<size_t> FoldSizes() const;
};

// Rows are shuffled within strata (classification: target class; survival:
// event indicator; regression: one stratum), strata are concatenated in
// class order and dealt round-robin to folds. Fold sizes differ by at most
// one and each stratum is spread as evenly as possible.
FoldPlan MakeFolds(const Dataset& d, size_t k, uint64_t seed, const TaskSpec& task);

}  // namespace prognos
