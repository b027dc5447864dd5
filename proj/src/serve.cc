#include "prognos/serve.h"

#include <cmath>

#include "httplib.h"
#include "prognos/error.h"
#include "prognos/explain.h"

namespace prognos {

namespace {

HttpResponse Json(int status, const nlohmann::json& j) { return {status, j.dump()}; }

HttpResponse ErrorResponse(int status, const std::string& code, const std::string& field,
                           const std::string& message) {
  nlohmann::json j = {{"code", code}, {"message", message}};
  if (!field.empty()) j["field"] = field;
  return Json(status, j);
}

HttpResponse NotLoaded(const std::string& why) {
  return ErrorResponse(503, "NotLoaded", "", why.empty() ? "no model bundle is loaded" : why);
}

nlohmann::json ParseBody(std::string_view body) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception&) {
    throw RequestError(400, "BadRequest", "", "request body is not valid JSON");
  }
  if (!j.is_object()) throw RequestError(400, "BadRequest", "", "request body must be an object");
  if (j.contains("request_id") && !j.at("request_id").is_string()) {
    throw RequestError(400, "TypeError", "request_id", "request_id must be a string");
  }
  return j;
}

const nlohmann::json& FeaturesOf(const nlohmann::json& req, const char* key) {
  static const nlohmann::json empty = nlohmann::json::object();
  if (!req.contains(key)) return empty;
  const auto& f = req.at(key);
  if (!f.is_object()) throw RequestError(400, "TypeError", key, std::string(key) + " must be an object");
  return f;
}

void EchoId(const nlohmann::json& req, nlohmann::json& resp) {
  if (req.contains("request_id")) resp["request_id"] = req.at("request_id");
}

}  // namespace

Service::Service(std::shared_ptr<const LoadedStudy> study) : study_(std::move(study)) {
  if (study_) manifest_ = BuildManifest(*study_).dump();
}

Service Service::FromBundle(const std::filesystem::path& dir) {
  try {
    return Service(std::make_shared<const LoadedStudy>(LoadStudy(dir)));
  } catch (const std::exception& e) {
    Service s;
    s.load_error_ = e.what();
    return s;
  }
}

HttpResponse Service::Health() const {
  if (!loaded()) return NotLoaded(load_error_);
  return Json(200, {{"status", "ok"}});
}

HttpResponse Service::GetSchema() const {
  if (!loaded()) return NotLoaded(load_error_);
  return {200, manifest_};
}

Dataset Service::RowFromFeatures(const nlohmann::json& features) const {
  const auto& schema = study_->model.features();
  for (const auto& [name, value] : features.items()) {
    const bool known = std::any_of(schema.begin(), schema.end(),
                                   [&](const ColumnSchema& c) { return c.name == name; });
    if (!known) throw RequestError(400, "UnknownFeature", name, "unknown feature '" + name + "'");
  }
  Dataset row(schema, 1);
  for (size_t c = 0; c < schema.size(); ++c) {
    const auto& col = schema[c];
    if (!features.contains(col.name) || features.at(col.name).is_null()) continue;
    const auto& v = features.at(col.name);
    switch (col.kind) {
      case ColumnKind::kNumeric:
        if (!v.is_number()) {
          throw RequestError(400, "TypeError", col.name, col.name + " must be a number");
        }
        row.set(0, c, v.get<double>());
        break;
      case ColumnKind::kBinary: {
        double x;
        if (v.is_boolean()) {
          x = v.get<bool>() ? 1.0 : 0.0;
        } else if (v.is_number()) {
          x = v.get<double>();
        } else {
          throw RequestError(400, "TypeError", col.name, col.name + " must be 0, 1 or a boolean");
        }
        if (x != 0.0 && x != 1.0) {
          throw RequestError(422, "UnknownLevel", col.name, col.name + " must be 0 or 1");
        }
        row.set(0, c, x);
        break;
      }
      case ColumnKind::kCategorical: {
        if (!v.is_string()) {
          throw RequestError(400, "TypeError", col.name, col.name + " must be a level name");
        }
        const auto level = v.get<std::string>();
        const auto it = std::find(col.categories.begin(), col.categories.end(), level);
        if (it == col.categories.end()) {
          throw RequestError(422, "UnknownLevel", col.name,
                             "'" + level + "' is not a level of " + col.name);
        }
        row.set(0, c, static_cast<double>(it - col.categories.begin()));
        break;
      }
    }
  }
  return row;
}

double Service::RiskOf(const Dataset& row) const { return study_->model.PredictRisk(row).at(0); }

namespace {

nlohmann::json Warnings(const LoadedStudy& s, const Dataset& row) {
  nlohmann::json w = nlohmann::json::array();
  for (const auto& p : s.profile) {
    if (p.kind != ColumnKind::kNumeric) continue;
    const auto v = row.get(0, row.ColumnIndex(p.name));
    if (v && (*v < p.min || *v > p.max)) {
      w.push_back({{"code", "extrapolation"}, {"field", p.name}});
    }
  }
  return w;
}

template <typename F>
HttpResponse Guarded(F f) {
  try {
    return f();
  } catch (const RequestError& e) {
    return ErrorResponse(e.status, e.code, e.field, e.what());
  } catch (const Error& e) {
    return ErrorResponse(500, std::string(ErrorCodeName(e.code())), "", e.what());
  } catch (const std::exception& e) {
    return ErrorResponse(500, "InternalError", "", e.what());
  }
}

}  // namespace

HttpResponse Service::Predict(std::string_view body) const {
  if (!loaded()) return NotLoaded(load_error_);
  return Guarded([&] {
    const auto req = ParseBody(body);
    const Dataset row = RowFromFeatures(FeaturesOf(req, "features"));
    const auto pred = study_->model.Predict(row);
    nlohmann::json resp = {{"risk", pred.risk.at(0)}, {"warnings", Warnings(*study_, row)}};
    if (study_->model.task.task == Task::kSurvival) {
      resp["event_prob_at_horizon"] = pred.event_prob.at(0);
      resp["horizon"] = study_->model.task.horizon;
      resp["relative_risk"] = pred.score.at(0);
    }
    EchoId(req, resp);
    return Json(200, resp);
  });
}

HttpResponse Service::WhatIf(std::string_view body) const {
  if (!loaded()) return NotLoaded(load_error_);
  return Guarded([&] {
    const auto req = ParseBody(body);
    const auto& base = FeaturesOf(req, "features");
    const auto& overrides = FeaturesOf(req, "overrides");
    nlohmann::json merged = base;
    for (const auto& [name, value] : overrides.items()) merged[name] = value;
    const Dataset base_row = RowFromFeatures(base);
    const Dataset new_row = RowFromFeatures(merged);
    const double base_risk = RiskOf(base_row);
    const double new_risk = RiskOf(new_row);
    nlohmann::json resp = {{"base_risk", base_risk},
                           {"new_risk", new_risk},
                           {"delta", new_risk - base_risk},
                           {"warnings", Warnings(*study_, new_row)}};
    EchoId(req, resp);
    return Json(200, resp);
  });
}

HttpResponse Service::Explain(std::string_view body) const {
  if (!loaded()) return NotLoaded(load_error_);
  return Guarded([&] {
    const auto req = ParseBody(body);
    size_t n_samples = kDefaultExplainSamples;
    if (req.contains("n_samples")) {
      const auto& v = req.at("n_samples");
      if (!v.is_number_integer() || v.get<int64_t>() < 1 ||
          v.get<int64_t>() > static_cast<int64_t>(kMaxExplainSamples)) {
        throw RequestError(400, "BadSampleCount", "n_samples",
                           "n_samples must be an integer in [1, 10000]");
      }
      n_samples = v.get<size_t>();
    }
    const Dataset row = RowFromFeatures(FeaturesOf(req, "features"));
    const auto e = SampledShapley(study_->model, row, study_->background, n_samples,
                                  study_->report.seed);
    nlohmann::json attributions = nlohmann::json::array();
    for (size_t i = 0; i < e.features.size(); ++i) {
      attributions.push_back(
          {{"feature", e.features[i]}, {"value", e.values[i]}, {"std_error", e.std_errors[i]}});
    }
    nlohmann::json resp = {{"attributions", attributions},
                           {"risk", e.prediction},
                           {"expected_value", e.expected_value},
                           {"total_std_error", e.total_std_error},
                           {"n_samples", n_samples},
                           {"seed", e.seed}};
    EchoId(req, resp);
    return Json(200, resp);
  });
}

HttpResponse Service::Handle(std::string_view method, std::string_view path,
                             std::string_view body) const {
  if (method == "GET" && path == "/health") return Health();
  if (method == "GET" && path == "/schema") return GetSchema();
  if (method == "POST" && path == "/predict") return Predict(body);
  if (method == "POST" && path == "/whatif") return WhatIf(body);
  if (method == "POST" && path == "/explain") return Explain(body);
  return ErrorResponse(404, "NotFound", "", "no route for " + std::string(method) + " " +
                                                std::string(path));
}

struct HttpServer::Impl {
  const Service& service;
  httplib::Server server;
};

HttpServer::HttpServer(const Service& service) : impl_(new Impl{service, {}}) {
  auto route = [this](const httplib::Request& req, httplib::Response& res) {
    const auto r = impl_->service.Handle(req.method, req.path, req.body);
    res.status = r.status;
    res.set_content(r.body, "application/json");
  };
  impl_->server.Get("/health", route);
  impl_->server.Get("/schema", route);
  impl_->server.Post("/predict", route);
  impl_->server.Post("/whatif", route);
  impl_->server.Post("/explain", route);
}

HttpServer::~HttpServer() { Stop(); }

int HttpServer::Bind(const std::string& host, int port) {
  if (port == 0) return impl_->server.bind_to_any_port(host);
  return impl_->server.bind_to_port(host, port) ? port : -1;
}

void HttpServer::Listen() { impl_->server.listen_after_bind(); }

void HttpServer::Stop() {
  if (impl_) impl_->server.stop();
}

}  // namespace prognos
