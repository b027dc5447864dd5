#include "prognos/space.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>

#include "prognos/error.h"

namespace prognos {

nlohmann::json PipelineConfigToJson(const PipelineConfig& c) {
  return {{"imputer", ImputerConfigToJson(c.imputer)},
          {"stage", StageConfigToJson(c.stage)},
          {"learner", LearnerConfigToJson(c.learner)}};
}

PipelineConfig PipelineConfigFromJson(const nlohmann::json& j) {
  return {ImputerConfigFromJson(j.at("imputer")), StageConfigFromJson(j.at("stage")),
          LearnerConfigFromJson(j.at("learner"))};
}

double QuantizeReal(double v) {
  if (v == 0.0 || !std::isfinite(v)) return v;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.5e", v);
  return std::strtod(buf, nullptr);
}

namespace {

template <typename T>
size_t IndexOf(const std::vector<T>& items, T item) {
  const auto it = std::find(items.begin(), items.end(), item);
  if (it == items.end()) throw BadParam("configuration choice outside the search space");
  return static_cast<size_t>(it - items.begin());
}

template <typename T>
T Pick(const std::vector<T>& items, std::span<const double> block) {
  size_t best = 0;
  for (size_t i = 1; i < block.size(); ++i) {
    if (block[i] > block[best]) best = i;
  }
  return items[best];
}

double Normalize(const HyperparamRange& r, double v) {
  if (r.hi <= r.lo) return 0.5;
  if (r.log_scale) return (std::log(v) - std::log(r.lo)) / (std::log(r.hi) - std::log(r.lo));
  return (v - r.lo) / (r.hi - r.lo);
}

double Denormalize(const HyperparamRange& r, double u) {
  u = std::clamp(u, 0.0, 1.0);
  if (r.hi <= r.lo) return r.lo;
  double v;
  if (r.log_scale) {
    v = std::exp(std::log(r.lo) + u * (std::log(r.hi) - std::log(r.lo)));
  } else {
    v = r.lo + u * (r.hi - r.lo);
  }
  v = r.integer ? std::round(v) : QuantizeReal(v);
  return std::clamp(v, r.lo, r.hi);
}

double SampleRange(const HyperparamRange& r, Rng& rng) {
  if (r.integer) {
    return static_cast<double>(rng.IntBetween(static_cast<int64_t>(r.lo), static_cast<int64_t>(r.hi)));
  }
  double v = r.log_scale ? std::exp(rng.Uniform(std::log(r.lo), std::log(r.hi))) : rng.Uniform(r.lo, r.hi);
  return std::clamp(QuantizeReal(v), r.lo, r.hi);
}

HyperparamRange VarianceRange(const SearchSpace& s) {
  return {"variance_threshold", 0.0, s.max_variance_threshold, false, false};
}

HyperparamRange ComponentRange(const SearchSpace& s) {
  return {"components", 1.0, static_cast<double>(s.feature_dim), false, true};
}

}  // namespace

SearchSpace SearchSpace::Default(Task task, size_t feature_dim, bool has_missing) {
  SearchSpace s;
  if (has_missing) {
    s.imputers = {ImputeMethod::kMean, ImputeMethod::kMedian, ImputeMethod::kMostFrequent,
                  ImputeMethod::kIterative, ImputeMethod::kAuto};
  } else {
    s.imputers = {ImputeMethod::kMean};
  }
  s.scalers = {Scaler::kNone,   Scaler::kMinMax, Scaler::kStandard,
               Scaler::kMaxAbs, Scaler::kRowL2,  Scaler::kQuantileUniform};
  s.dimreds = {DimRed::kNone, DimRed::kVarianceThreshold, DimRed::kPca};
  s.families = FamiliesFor(task);
  s.feature_dim = std::max<size_t>(1, feature_dim);
  return s;
}

void SearchSpace::Validate() const {
  if (imputers.empty() || scalers.empty() || dimreds.empty() || families.empty()) {
    throw EmptySpace("search space has an empty choice list");
  }
  if (feature_dim < 1) throw EmptySpace("search space has no features");
}

void SearchSpace::Check(const PipelineConfig& c, Task task) const {
  IndexOf(imputers, c.imputer.method);
  IndexOf(scalers, c.stage.scaler);
  IndexOf(dimreds, c.stage.dimred);
  IndexOf(families, c.learner.family);
  c.imputer.Validate();
  ValidateLearnerConfig(c.learner, task);
  if (c.stage.dimred == DimRed::kVarianceThreshold &&
      !(c.stage.dimred_param >= 0.0 && c.stage.dimred_param <= max_variance_threshold)) {
    throw BadParam("variance threshold outside the search space");
  }
  if (c.stage.dimred == DimRed::kPca &&
      !(c.stage.dimred_param >= 1.0 && c.stage.dimred_param <= static_cast<double>(feature_dim))) {
    throw BadParam("PCA components outside the search space");
  }
}

size_t SearchSpace::EncodedDim() const {
  size_t d = imputers.size() + scalers.size() + dimreds.size() + 2 + families.size();
  for (Family f : families) d += HyperparamRanges(f).size();
  return d;
}

std::vector<double> SearchSpace::Encode(const PipelineConfig& c) const {
  std::vector<double> v;
  v.reserve(EncodedDim());
  auto one_hot = [&](size_t n, size_t idx) {
    for (size_t i = 0; i < n; ++i) v.push_back(i == idx ? 1.0 : 0.0);
  };
  one_hot(imputers.size(), IndexOf(imputers, c.imputer.method));
  one_hot(scalers.size(), IndexOf(scalers, c.stage.scaler));
  one_hot(dimreds.size(), IndexOf(dimreds, c.stage.dimred));
  v.push_back(c.stage.dimred == DimRed::kVarianceThreshold
                  ? Normalize(VarianceRange(*this), c.stage.dimred_param)
                  : 0.5);
  v.push_back(c.stage.dimred == DimRed::kPca ? Normalize(ComponentRange(*this), c.stage.dimred_param)
                                             : 0.5);
  one_hot(families.size(), IndexOf(families, c.learner.family));
  for (Family f : families) {
    for (const auto& r : HyperparamRanges(f)) {
      v.push_back(f == c.learner.family ? Normalize(r, c.learner.Get(r.name)) : 0.5);
    }
  }
  return v;
}

PipelineConfig SearchSpace::Decode(std::span<const double> v) const {
  if (v.size() != EncodedDim()) throw ShapeMismatch("encoded configuration has the wrong length");
  PipelineConfig c;
  size_t at = 0;
  auto block = [&](size_t n) {
    auto b = v.subspan(at, n);
    at += n;
    return b;
  };
  c.imputer.method = Pick(imputers, block(imputers.size()));
  c.stage.scaler = Pick(scalers, block(scalers.size()));
  c.stage.dimred = Pick(dimreds, block(dimreds.size()));
  const double var_u = v[at++];
  const double pca_u = v[at++];
  if (c.stage.dimred == DimRed::kVarianceThreshold) {
    c.stage.dimred_param = Denormalize(VarianceRange(*this), var_u);
  } else if (c.stage.dimred == DimRed::kPca) {
    c.stage.dimred_param = Denormalize(ComponentRange(*this), pca_u);
  }
  c.learner.family = Pick(families, block(families.size()));
  for (Family f : families) {
    for (const auto& r : HyperparamRanges(f)) {
      const double u = v[at++];
      if (f == c.learner.family) c.learner.hyperparams[r.name] = Denormalize(r, u);
    }
  }
  return c;
}

PipelineConfig SearchSpace::Sample(Rng& rng) const {
  Validate();
  PipelineConfig c;
  c.imputer.method = imputers[rng.Below(imputers.size())];
  c.stage.scaler = scalers[rng.Below(scalers.size())];
  c.stage.dimred = dimreds[rng.Below(dimreds.size())];
  if (c.stage.dimred == DimRed::kVarianceThreshold) {
    c.stage.dimred_param = SampleRange(VarianceRange(*this), rng);
  } else if (c.stage.dimred == DimRed::kPca) {
    c.stage.dimred_param = SampleRange(ComponentRange(*this), rng);
  }
  c.learner.family = families[rng.Below(families.size())];
  for (const auto& r : HyperparamRanges(c.learner.family)) {
    c.learner.hyperparams[r.name] = SampleRange(r, rng);
  }
  return c;
}

nlohmann::json SearchSpace::ToJson() const {
  nlohmann::json j;
  for (auto m : imputers) j["imputers"].push_back(ToString(m));
  for (auto s : scalers) j["scalers"].push_back(ToString(s));
  for (auto d : dimreds) j["dimreds"].push_back(ToString(d));
  nlohmann::json ranges = nlohmann::json::object();
  for (auto f : families) {
    j["families"].push_back(ToString(f));
    nlohmann::json rs = nlohmann::json::array();
    for (const auto& r : HyperparamRanges(f)) {
      rs.push_back({{"name", r.name},
                    {"lo", r.lo},
                    {"hi", r.hi},
                    {"log_scale", r.log_scale},
                    {"integer", r.integer}});
    }
    ranges[std::string(ToString(f))] = rs;
  }
  j["hyperparams"] = ranges;
  j["feature_dim"] = feature_dim;
  j["max_variance_threshold"] = max_variance_threshold;
  j["encoded_dim"] = EncodedDim();
  return j;
}

SearchSpace SearchSpace::FromJson(const nlohmann::json& j) {
  SearchSpace s;
  for (const auto& m : j.at("imputers")) s.imputers.push_back(ParseImputeMethod(m.get<std::string>()));
  for (const auto& m : j.at("scalers")) s.scalers.push_back(ParseScaler(m.get<std::string>()));
  for (const auto& m : j.at("dimreds")) s.dimreds.push_back(ParseDimRed(m.get<std::string>()));
  for (const auto& m : j.at("families")) s.families.push_back(ParseFamily(m.get<std::string>()));
  s.feature_dim = j.at("feature_dim").get<size_t>();
  s.max_variance_threshold = j.at("max_variance_threshold").get<double>();
  s.Validate();
  return s;
}

}  // namespace prognos
