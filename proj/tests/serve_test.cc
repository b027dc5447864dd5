#include <gtest/gtest.h>

#include <filesystem>
#include <thread>

#include "httplib.h"
#include "prognos/serve.h"
#include "test_util.h"

namespace prognos {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

class ServeFixture : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    const Dataset d = testing::LogisticData(180, 41, 0.1);
    const auto task = TaskSpec::Classification();
    SearchOptions o;
    o.n_init = 3;
    o.n_candidates = 20;
    o.surrogate_trees = 10;
    auto report = RunStudy(d, task, SearchSpace::Default(task.task, 7, true), 4, 3, 1, 8, o);
    const auto model = BuildEnsemble(report, d, 1);
    report.ensemble = Summarize(model);
    dir_ = new fs::path(fs::temp_directory_path() / "prognos_serve_bundle");
    fs::remove_all(*dir_);
    SaveStudy(report, model, d, *dir_);
    service_ = new Service(Service::FromBundle(*dir_));
  }
  static void TearDownTestSuite() {
    delete service_;
    delete dir_;
  }
  static json Body(const HttpResponse& r) { return json::parse(r.body); }
  static fs::path* dir_;
  static Service* service_;
};

fs::path* ServeFixture::dir_ = nullptr;
Service* ServeFixture::service_ = nullptr;

const char* kRow = R"({"features":{"x0":0.3,"x1":-1.2,"noise":0.1,"flag":1,"c":"b"}})";

TEST_F(ServeFixture, HealthAndSchema) {
  ASSERT_TRUE(service_->loaded()) << service_->load_error();
  EXPECT_EQ(Body(service_->Health())["status"], "ok");
  const auto a = service_->GetSchema();
  EXPECT_EQ(a.status, 200);
  EXPECT_EQ(a.body, service_->GetSchema().body);
  const auto m = Body(a);
  EXPECT_EQ(m["features"].size(), 5u);
  EXPECT_EQ(m["task"], "classification");
  EXPECT_EQ(m["study_seed"], 8);
}

TEST_F(ServeFixture, NotLoadedAnswers503) {
  const Service empty = Service::FromBundle("/nonexistent/bundle");
  EXPECT_FALSE(empty.loaded());
  EXPECT_EQ(empty.GetSchema().status, 503);
  EXPECT_EQ(empty.Predict(kRow).status, 503);
  EXPECT_EQ(Body(empty.Predict(kRow))["code"], "NotLoaded");
}

TEST_F(ServeFixture, PredictIsDeterministicAndMatchesLibrary) {
  const auto a = service_->Predict(kRow);
  ASSERT_EQ(a.status, 200) << a.body;
  EXPECT_EQ(a.body, service_->Predict(kRow).body);
  const auto row = service_->RowFromFeatures(json::parse(kRow)["features"]);
  const auto loaded = LoadStudy(*dir_);
  EXPECT_EQ(Body(a)["risk"].get<double>(), loaded.model.PredictRisk(row)[0]);
  const double risk = Body(a)["risk"];
  EXPECT_GE(risk, 0.0);
  EXPECT_LE(risk, 1.0);
}

TEST_F(ServeFixture, MissingFeatureEqualsExplicitImputedValue) {
  const auto loaded = LoadStudy(*dir_);
  json f = json::parse(kRow)["features"];
  f.erase("x1");
  const Dataset row = service_->RowFromFeatures(f);
  const Dataset filled = loaded.model.members[0].imputer().Transform(row);
  const double imputed = filled.value(0, filled.ColumnIndex("x1"));
  json g = f;
  g["x1"] = imputed;
  const auto omitted = service_->Predict(json{{"features", f}}.dump());
  const auto explicit_ = service_->Predict(json{{"features", g}}.dump());
  EXPECT_EQ(Body(omitted)["risk"], Body(explicit_)["risk"]);
}

TEST_F(ServeFixture, WhatIfDeltaIsExactDifference) {
  json req = json::parse(kRow);
  req["overrides"] = {{"x0", 2.0}, {"c", "a"}};
  const auto r = Body(service_->WhatIf(req.dump()));
  json merged = json::parse(kRow);
  merged["features"]["x0"] = 2.0;
  merged["features"]["c"] = "a";
  const double base = Body(service_->Predict(kRow))["risk"];
  const double now = Body(service_->Predict(merged.dump()))["risk"];
  EXPECT_EQ(r["base_risk"].get<double>(), base);
  EXPECT_EQ(r["new_risk"].get<double>(), now);
  EXPECT_EQ(r["delta"].get<double>(), now - base);

  json same = json::parse(kRow);
  same["overrides"] = json::object();
  EXPECT_EQ(Body(service_->WhatIf(same.dump()))["delta"].get<double>(), 0.0);
  same["overrides"] = {{"x0", 0.3}};
  EXPECT_EQ(Body(service_->WhatIf(same.dump()))["delta"].get<double>(), 0.0);
}

TEST_F(ServeFixture, ErrorsNameTheField) {
  auto check = [&](const std::string& body, int status, const std::string& code,
                   const std::string& field) {
    const auto r = service_->Predict(body);
    EXPECT_EQ(r.status, status) << body;
    const auto j = Body(r);
    EXPECT_EQ(j["code"], code) << body;
    if (!field.empty()) {
      EXPECT_EQ(j["field"], field) << body;
    }
  };
  check(R"({"features":{"xyzzy":1}})", 400, "UnknownFeature", "xyzzy");
  check(R"({"features":{"x0":"high"}})", 400, "TypeError", "x0");
  check(R"({"features":{"c":"zzz"}})", 422, "UnknownLevel", "c");
  check(R"({"features":{"flag":0.5}})", 422, "UnknownLevel", "flag");
  check("not json", 400, "BadRequest", "");
  const auto e = service_->Explain(R"({"features":{},"n_samples":0})");
  EXPECT_EQ(e.status, 400);
  EXPECT_EQ(Body(e)["code"], "BadSampleCount");
  EXPECT_EQ(service_->Handle("GET", "/nope", "").status, 404);
}

TEST_F(ServeFixture, ExtrapolationWarning) {
  const auto r = Body(service_->Predict(R"({"features":{"x0":1000}})"));
  ASSERT_EQ(r["warnings"].size(), 1u);
  EXPECT_EQ(r["warnings"][0]["code"], "extrapolation");
  EXPECT_EQ(r["warnings"][0]["field"], "x0");
}

TEST_F(ServeFixture, ExplainIsReproducibleAndLocallyAccurate) {
  json req = json::parse(kRow);
  req["n_samples"] = 400;
  req["request_id"] = "abc";
  const auto a = service_->Explain(req.dump());
  ASSERT_EQ(a.status, 200) << a.body;
  EXPECT_EQ(a.body, service_->Explain(req.dump()).body);
  const auto j = Body(a);
  EXPECT_EQ(j["request_id"], "abc");
  ASSERT_EQ(j["attributions"].size(), 5u);
  double total = 0.0;
  for (const auto& x : j["attributions"]) total += x["value"].get<double>();
  const double gap = j["risk"].get<double>() - j["expected_value"].get<double>();
  EXPECT_LE(std::abs(total - gap), 3.0 * j["total_std_error"].get<double>() + 1e-12);
}

TEST_F(ServeFixture, RealHttpRoundTrip) {
  HttpServer server(*service_);
  const int port = server.Bind("127.0.0.1", 0);
  ASSERT_GT(port, 0);
  std::thread t([&] { server.Listen(); });
  httplib::Client cli("127.0.0.1", port);
  auto health = cli.Get("/health");
  for (int i = 0; i < 50 && !health; ++i) {
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
    health = cli.Get("/health");
  }
  ASSERT_TRUE(health);
  EXPECT_EQ(health->status, 200);
  const auto p = cli.Post("/predict", kRow, "application/json");
  ASSERT_TRUE(p);
  EXPECT_EQ(p->status, 200);
  EXPECT_EQ(p->body, service_->Predict(kRow).body);
  EXPECT_EQ(p->get_header_value("Content-Type"), "application/json");
  const auto bad = cli.Post("/predict", R"({"features":{"xyzzy":1}})", "application/json");
  ASSERT_TRUE(bad);
  EXPECT_EQ(bad->status, 400);
  const auto schema = cli.Get("/schema");
  ASSERT_TRUE(schema);
  EXPECT_EQ(schema->body, service_->GetSchema().body);
  server.Stop();
  t.join();
}

TEST_F(ServeFixture, ConcurrentRequestsMatchSerial) {
  const std::string expect = service_->Predict(kRow).body;
  std::vector<std::thread> pool;
  std::vector<std::string> got(8);
  for (size_t i = 0; i < 8; ++i) {
    pool.emplace_back([&, i] { got[i] = service_->Predict(kRow).body; });
  }
  for (auto& th : pool) th.join();
  for (const auto& g : got) EXPECT_EQ(g, expect);
}

}  // namespace
}  // namespace prognos
