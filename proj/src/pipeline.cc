#include "prognos/pipeline.h"

#include "prognos/error.h"

namespace prognos {

size_t FeatureEncoder::width() const {
  size_t w = 0;
  for (const auto& f : features_) w += f.kind == ColumnKind::kCategorical ? f.categories.size() : 1;
  return w;
}

std::vector<std::string> FeatureEncoder::OutputNames() const {
  std::vector<std::string> out;
  for (const auto& f : features_) {
    if (f.kind == ColumnKind::kCategorical) {
      for (const auto& level : f.categories) out.push_back(f.name + "=" + level);
    } else {
      out.push_back(f.name);
    }
  }
  return out;
}

std::pair<size_t, size_t> FeatureEncoder::Span(size_t i) const {
  size_t first = 0;
  for (size_t j = 0; j < i; ++j) {
    first += features_[j].kind == ColumnKind::kCategorical ? features_[j].categories.size() : 1;
  }
  const size_t w =
      features_[i].kind == ColumnKind::kCategorical ? features_[i].categories.size() : 1;
  return {first, first + w};
}

Matrix FeatureEncoder::Encode(const Dataset& d) const {
  std::vector<size_t> cols;
  for (const auto& f : features_) {
    const auto idx = d.FindColumn(f.name);
    if (!idx) throw SchemaMismatch("column '" + f.name + "' is absent");
    const auto& c = d.column(*idx);
    if (c.kind != f.kind || c.categories != f.categories) {
      throw SchemaMismatch("column '" + f.name + "' differs from the training schema");
    }
    cols.push_back(*idx);
  }
  Matrix out(d.n_rows(), width(), 0.0);
  for (size_t r = 0; r < d.n_rows(); ++r) {
    size_t k = 0;
    for (size_t i = 0; i < cols.size(); ++i) {
      if (d.is_missing(r, cols[i])) {
        throw DegenerateInput("feature '" + features_[i].name + "' is missing after imputation");
      }
      const double v = d.value(r, cols[i]);
      if (features_[i].kind == ColumnKind::kCategorical) {
        out(r, k + static_cast<size_t>(v)) = 1.0;
        k += features_[i].categories.size();
      } else {
        out(r, k++) = v;
      }
    }
  }
  return out;
}

FittedPipeline FittedPipeline::Fit(const PipelineConfig& cfg, const Dataset& train,
                                   const TaskSpec& task, uint64_t seed, const FitAudit* audit) {
  task.Validate();
  FittedPipeline p;
  p.cfg_ = cfg;
  p.task_ = task;
  const Outcome y = ExtractOutcome(train, task);
  if (audit && audit->on_imputer_fit) audit->on_imputer_fit(train);
  p.imputer_ = FittedImputer::Fit(train, cfg.imputer, seed);
  p.encoder_ = FeatureEncoder(p.imputer_.features());
  const Matrix encoded = p.encoder_.Encode(p.imputer_.Transform(train));
  if (audit && audit->on_stage_fit) audit->on_stage_fit(encoded);
  p.stage_ = FittedStage::Fit(encoded, cfg.stage);
  const Matrix x = p.stage_.Apply(encoded);
  if (audit && audit->on_learner_fit) audit->on_learner_fit(x);
  p.learner_ = FitLearner(cfg.learner, x, y, task.task, seed);
  return p;
}

Matrix FittedPipeline::Features(const Dataset& d) const {
  return stage_.Apply(encoder_.Encode(imputer_.Transform(d)));
}

std::vector<double> FittedPipeline::PredictScore(const Dataset& d) const {
  return learner_->PredictScore(Features(d));
}

std::vector<double> FittedPipeline::PredictEventProb(const Dataset& d, double horizon) const {
  return learner_->PredictEventProb(Features(d), horizon);
}

std::vector<double> FittedPipeline::PredictRisk(const Dataset& d) const {
  if (task_.task == Task::kSurvival) return PredictEventProb(d, task_.horizon);
  return PredictScore(d);
}

nlohmann::json FittedPipeline::ToJson() const {
  return {{"config", PipelineConfigToJson(cfg_)},
          {"task", TaskToJson(task_)},
          {"imputer", imputer_.ToJson()},
          {"stage", stage_.ToJson()},
          {"learner", learner_->ToJson()}};
}

FittedPipeline FittedPipeline::FromJson(const nlohmann::json& j) {
  FittedPipeline p;
  p.cfg_ = PipelineConfigFromJson(j.at("config"));
  p.task_ = TaskFromJson(j.at("task"));
  p.imputer_ = FittedImputer::FromJson(j.at("imputer"));
  p.encoder_ = FeatureEncoder(p.imputer_.features());
  p.stage_ = FittedStage::FromJson(j.at("stage"));
  p.learner_ = FittedLearner::FromJson(j.at("learner"));
  if (p.stage_.input_dim() != p.encoder_.width() ||
      p.stage_.output_dim() != p.learner_->input_dim()) {
    throw ShapeMismatch("pipeline stages disagree in width");
  }
  return p;
}

}  // namespace prognos
