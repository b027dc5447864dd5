#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "prognos/ensemble.h"
#include "prognos/study.h"
#include "prognos/tabular.h"

namespace prognos {

// Sorted keys, shortest round-trip doubles, two-space indent, trailing newline.
std::string CanonicalJson(const nlohmann::json& j);

// FNV-1a 64 of a byte string, as 16 lowercase hex digits.
std::string HashHex(std::string_view bytes);

// Training-data summary of one feature, kept in model.json so the served
// model never needs the cohort.
struct FeatureProfile {
  std::string name;
  ColumnKind kind = ColumnKind::kNumeric;
  double min = 0.0;
  double max = 0.0;
  double median = 0.0;
  std::vector<std::string> levels;  // categorical
  double default_value = 0.0;       // median, or the modal level / bit

  nlohmann::json ToJson() const;
  static FeatureProfile FromJson(const nlohmann::json& j);
};

std::vector<FeatureProfile> ProfileFeatures(const Schema& features, const Dataset& d);

// At most `max_rows` feature rows drawn without replacement with `seed`,
// kept in their original order.
Dataset SampleBackground(const Dataset& d, const Schema& features, uint64_t seed,
                         size_t max_rows = 256);

struct LoadedStudy {
  StudyReport report;
  EnsembleModel model;
  Schema schema;  // full training schema, roles included
  Dataset background;
  std::vector<FeatureProfile> profile;
};

// ui_manifest.json content: per feature its display name, kind, allowed
// range or levels, and default; plus task metadata.
nlohmann::json BuildManifest(const LoadedStudy& s);

std::string RenderReport(const StudyReport& report, const EnsembleModel& model);

// Writes study.json, model.json, schema.json, background.csv and report.md.
// study.json records the hash of every other file. Throws IoError.
void SaveStudy(const StudyReport& report, const EnsembleModel& model, const Dataset& d,
               const std::filesystem::path& dir);

// Throws MissingFile, VersionMismatch, CorruptBundle.
LoadedStudy LoadStudy(const std::filesystem::path& dir);

// Copies the bundle to `out` and adds ui_manifest.json.
void ExportDemo(const std::filesystem::path& dir, const std::filesystem::path& out);

}  // namespace prognos
