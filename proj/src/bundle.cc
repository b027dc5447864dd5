#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "prognos/error.h"
#include "prognos/rng.h"
#include "prognos/studio.h"

namespace prognos {

namespace fs = std::filesystem;

std::string CanonicalJson(const nlohmann::json& j) { return j.dump(2) + "\n"; }

std::string HashHex(std::string_view bytes) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

nlohmann::json FeatureProfile::ToJson() const {
  return {{"name", name},     {"kind", ToString(kind)},   {"min", min},
          {"max", max},       {"median", median},         {"levels", levels},
          {"default", default_value}};
}

FeatureProfile FeatureProfile::FromJson(const nlohmann::json& j) {
  FeatureProfile p;
  p.name = j.at("name").get<std::string>();
  p.kind = ParseColumnKind(j.at("kind").get<std::string>());
  p.min = j.at("min").get<double>();
  p.max = j.at("max").get<double>();
  p.median = j.at("median").get<double>();
  p.levels = j.at("levels").get<std::vector<std::string>>();
  p.default_value = j.at("default").get<double>();
  return p;
}

std::vector<FeatureProfile> ProfileFeatures(const Schema& features, const Dataset& d) {
  std::vector<FeatureProfile> out;
  for (const auto& f : features) {
    const size_t c = d.ColumnIndex(f.name);
    auto obs = d.ObservedValues(c);
    if (obs.empty()) throw AllMissingColumn("column '" + f.name + "' has no observed values");
    std::sort(obs.begin(), obs.end());
    FeatureProfile p;
    p.name = f.name;
    p.kind = f.kind;
    p.levels = f.categories;
    p.min = obs.front();
    p.max = obs.back();
    const size_t n = obs.size();
    p.median = n % 2 ? obs[n / 2] : 0.5 * (obs[n / 2 - 1] + obs[n / 2]);
    if (f.kind == ColumnKind::kNumeric) {
      p.default_value = p.median;
    } else {
      size_t best_run = 0;
      for (size_t i = 0; i < n;) {
        size_t j = i;
        while (j < n && obs[j] == obs[i]) ++j;
        if (j - i > best_run) {
          best_run = j - i;
          p.default_value = obs[i];
        }
        i = j;
      }
    }
    out.push_back(std::move(p));
  }
  return out;
}

Dataset SampleBackground(const Dataset& d, const Schema& features, uint64_t seed,
                         size_t max_rows) {
  std::vector<size_t> cols;
  for (const auto& f : features) cols.push_back(d.ColumnIndex(f.name));
  std::vector<size_t> rows(d.n_rows());
  for (size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  if (rows.size() > max_rows) {
    Rng rng(DeriveSeed(seed, 0xB6));
    rng.Shuffle(std::span<size_t>(rows));
    rows.resize(max_rows);
    std::sort(rows.begin(), rows.end());
  }
  return d.SelectRows(rows).SelectColumns(cols);
}

nlohmann::json BuildManifest(const LoadedStudy& s) {
  nlohmann::json feats = nlohmann::json::array();
  for (const auto& p : s.profile) {
    std::string display = p.name;
    std::replace(display.begin(), display.end(), '_', ' ');
    nlohmann::json f = {{"name", p.name}, {"display_name", display}, {"kind", ToString(p.kind)}};
    if (p.kind == ColumnKind::kCategorical) {
      f["levels"] = p.levels;
      f["default"] = p.levels.at(static_cast<size_t>(p.default_value));
    } else {
      f["range"] = {p.min, p.max};
      f["default"] = p.default_value;
    }
    feats.push_back(f);
  }
  const auto& t = s.report.task;
  nlohmann::json j = {{"format_version", kFormatVersion},
                      {"task", ToString(t.task)},
                      {"metric", ToString(t.primary_metric)},
                      {"study_seed", s.report.seed},
                      {"n_features", feats.size()},
                      {"features", feats}};
  j["horizon"] = t.task == Task::kSurvival ? nlohmann::json(t.horizon) : nlohmann::json(nullptr);
  return j;
}

namespace {

std::string Fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string ReadFile(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw MissingFile(p.filename().string() + " is missing from " + p.parent_path().string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteFile(const fs::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw IoError("cannot write " + p.string());
  out << content;
  out.close();
  if (!out) throw IoError("write failed for " + p.string());
}

nlohmann::json ParseBundleJson(const std::string& text, const std::string& name) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw CorruptBundle(name + " is not valid JSON: " + e.what());
  }
}

void CheckVersion(const nlohmann::json& j, const std::string& name) {
  if (!j.is_object() || !j.contains("format_version")) {
    throw CorruptBundle(name + " has no format_version");
  }
  const auto v = j.at("format_version");
  if (!v.is_string() || v.get<std::string>() != kFormatVersion) {
    throw VersionMismatch(name + " has format_version " + v.dump() + ", expected \"" +
                          kFormatVersion + "\"");
  }
}

constexpr const char* kBundleFiles[] = {"model.json", "schema.json", "background.csv",
                                        "report.md"};

}  // namespace

std::string RenderReport(const StudyReport& report, const EnsembleModel& model) {
  std::ostringstream md;
  const auto& t = report.task;
  md << "# Study report\n\n";
  md << "- Task: " << ToString(t.task);
  if (t.task == Task::kSurvival) md << " (horizon " << t.horizon << ")";
  md << "\n- Primary metric: " << ToString(t.primary_metric) << " (higher is better)\n";
  md << "- Data: " << report.data.rows << " rows x " << report.data.cols << " columns\n";
  md << "- Budget: " << report.budget << " trials, " << report.folds << "-fold CV, "
     << report.imputations << " imputation seed(s) per fold\n";
  md << "- Seed: " << report.seed << "\n";
  md << "- Engine: " << kEngineVersion << "\n\n";

  md << "## Method\n\n";
  md << "- Search: " << report.options.n_init << " random configurations, then expected "
     << "improvement over " << report.options.n_candidates << " random candidates under a "
     << report.options.surrogate_trees << "-tree bootstrap forest surrogate.\n";
  md << "- Repeated imputation: the configured imputer is refitted inside every training fold "
        "with seeds seed, seed+1, ...; scores average over imputations and folds.\n";
  md << "- Ensemble weights: softmax of mean CV score / temperature (" << model.temperature
     << ").\n";
  md << "- Failed trials score " << FailureScore(t.primary_metric)
     << " and are excluded from the ensemble.\n\n";

  md << "## Leaderboard\n\n";
  md << "| rank | trial | learner | imputer | scaler | reduction | mean | sd |\n";
  md << "|---:|---:|---|---|---|---|---:|---:|\n";
  const auto board = report.Leaderboard();
  for (size_t i = 0; i < board.size(); ++i) {
    const auto& tr = report.trials[board[i]];
    std::string red(ToString(tr.config.stage.dimred));
    if (tr.config.stage.dimred != DimRed::kNone) {
      red += " (" + nlohmann::json(tr.config.stage.dimred_param).dump() + ")";
    }
    md << "| " << i + 1 << " | " << tr.trial_index << " | " << ToString(tr.config.learner.family)
       << " | " << ToString(tr.config.imputer.method) << " | "
       << ToString(tr.config.stage.scaler) << " | " << red << " | " << Fixed(tr.mean_score, 4)
       << " | " << Fixed(tr.sd_score, 4) << " |\n";
  }
  const size_t failed = report.trials.size() - board.size();
  md << "\n" << failed << " failed trial(s).\n\n";

  md << "## Ensemble\n\n";
  md << "| trial | learner | weight |\n|---:|---|---:|\n";
  for (size_t i = 0; i < model.members.size(); ++i) {
    md << "| " << model.trial_indices[i] << " | "
       << ToString(model.members[i].config().learner.family) << " | "
       << Fixed(model.weights[i], 4) << " |\n";
  }
  return md.str();
}

void SaveStudy(const StudyReport& report, const EnsembleModel& model, const Dataset& d,
               const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create " + dir.string());

  const Schema& features = model.features();
  nlohmann::json profile = nlohmann::json::array();
  for (const auto& p : ProfileFeatures(features, d)) profile.push_back(p.ToJson());
  const std::string model_json = CanonicalJson({{"format_version", kFormatVersion},
                                                {"ensemble", model.ToJson()},
                                                {"profile", profile}});
  const std::string schema_json = CanonicalJson(SchemaToJson(d.schema()));
  std::ostringstream bg;
  WriteCsv(bg, SampleBackground(d, features, report.seed));
  const std::string report_md = RenderReport(report, model);

  nlohmann::json study = ReportToJson(report);
  study["bundle"] = {{"model.json", HashHex(model_json)},
                     {"schema.json", HashHex(schema_json)},
                     {"background.csv", HashHex(bg.str())},
                     {"report.md", HashHex(report_md)}};
  study["self_hash"] = HashHex(CanonicalJson(study));

  WriteFile(dir / "model.json", model_json);
  WriteFile(dir / "schema.json", schema_json);
  WriteFile(dir / "background.csv", bg.str());
  WriteFile(dir / "report.md", report_md);
  WriteFile(dir / "study.json", CanonicalJson(study));
}

LoadedStudy LoadStudy(const fs::path& dir) {
  if (!fs::exists(dir / "study.json")) throw MissingFile("study.json is missing from " + dir.string());
  for (const char* name : kBundleFiles) {
    if (!fs::exists(dir / name)) throw MissingFile(std::string(name) + " is missing from " + dir.string());
  }
  nlohmann::json study = ParseBundleJson(ReadFile(dir / "study.json"), "study.json");
  CheckVersion(study, "study.json");
  if (!study.contains("bundle") || !study.contains("self_hash")) {
    throw CorruptBundle("study.json lacks its integrity record");
  }
  const auto self = study.at("self_hash");
  nlohmann::json body = study;
  body.erase("self_hash");
  if (!self.is_string() || HashHex(CanonicalJson(body)) != self.get<std::string>()) {
    throw CorruptBundle("study.json does not match its recorded hash");
  }
  std::map<std::string, std::string> files;
  for (const char* name : kBundleFiles) {
    files[name] = ReadFile(dir / name);
    const auto& rec = study.at("bundle");
    if (!rec.contains(name) || rec.at(name) != HashHex(files[name])) {
      throw CorruptBundle(std::string(name) + " does not match the hash recorded in study.json");
    }
  }

  LoadedStudy s;
  try {
    s.report = ReportFromJson(study);
    const auto model = ParseBundleJson(files["model.json"], "model.json");
    CheckVersion(model, "model.json");
    s.model = EnsembleModel::FromJson(model.at("ensemble"));
    for (const auto& p : model.at("profile")) s.profile.push_back(FeatureProfile::FromJson(p));
    s.schema = SchemaFromJson(ParseBundleJson(files["schema.json"], "schema.json"));
    std::istringstream bg(files["background.csv"]);
    s.background = ReadCsv(bg, s.model.features());
  } catch (const VersionMismatch&) {
    throw;
  } catch (const std::exception& e) {
    throw CorruptBundle(std::string("bundle contents are inconsistent: ") + e.what());
  }
  if (s.profile.size() != s.model.features().size()) {
    throw CorruptBundle("feature profile does not match the model inputs");
  }
  return s;
}

void ExportDemo(const fs::path& dir, const fs::path& out) {
  const LoadedStudy s = LoadStudy(dir);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec || !fs::is_directory(out)) throw IoError("cannot create " + out.string());
  for (const char* name : {"study.json", "model.json", "schema.json", "background.csv", "report.md"}) {
    fs::copy_file(dir / name, out / name, fs::copy_options::overwrite_existing, ec);
    if (ec) throw IoError("cannot copy " + std::string(name) + " to " + out.string());
  }
  WriteFile(out / "ui_manifest.json", CanonicalJson(BuildManifest(s)));
}

}  // namespace prognos
