#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>

#include "json.hpp"
#include "prognos/studio.h"

namespace prognos {

struct HttpResponse {
  int status = 200;
  std::string body;  // JSON
};

// Request handling over a loaded bundle. Every handler is const and the
// bundle is never modified, so one Service can answer concurrent requests.
//
//   GET  /health   {"status":"ok"}
//   GET  /schema   ui manifest (task, metric, study seed, features)
//   POST /predict  {"features":{name:value,...}, "request_id"?}
//   POST /whatif   {"features":{...}, "overrides":{...}, "request_id"?}
//   POST /explain  {"features":{...}, "n_samples"?, "request_id"?}
//
// Absent or null features are imputed by the model. Errors answer
// {"code", "field"?, "message"}: 400 UnknownFeature / TypeError /
// BadSampleCount / BadRequest, 422 UnknownLevel, 503 NotLoaded.
class Service {
 public:
  static constexpr size_t kDefaultExplainSamples = 1000;
  static constexpr size_t kMaxExplainSamples = 10000;

  // No bundle: model endpoints answer 503.
  Service() = default;
  explicit Service(std::shared_ptr<const LoadedStudy> study);
  // Loads `dir`; on failure the service starts unloaded and remembers why.
  static Service FromBundle(const std::filesystem::path& dir);

  bool loaded() const { return study_ != nullptr; }
  const std::string& load_error() const { return load_error_; }

  HttpResponse Health() const;
  HttpResponse GetSchema() const;
  HttpResponse Predict(std::string_view body) const;
  HttpResponse WhatIf(std::string_view body) const;
  HttpResponse Explain(std::string_view body) const;
  HttpResponse Handle(std::string_view method, std::string_view path, std::string_view body) const;

  // One-row feature dataset from a request's "features" object. Throws
  // RequestError.
  Dataset RowFromFeatures(const nlohmann::json& features) const;
  double RiskOf(const Dataset& row) const;

 private:
  std::shared_ptr<const LoadedStudy> study_;
  std::string manifest_;
  std::string load_error_;
};

// A request the client got wrong; maps to a 4xx response.
class RequestError : public std::runtime_error {
 public:
  RequestError(int status, std::string code, std::string field, const std::string& message)
      : std::runtime_error(message), status(status), code(std::move(code)), field(std::move(field)) {}
  int status;
  std::string code;
  std::string field;
};

// Blocking HTTP front end for a Service.
class HttpServer {
 public:
  explicit HttpServer(const Service& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Binds; port 0 picks a free port. Returns the bound port or -1.
  int Bind(const std::string& host, int port);
  // Serves until Stop(). Call after Bind().
  void Listen();
  void Stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace prognos
