#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"
#include "fracsob/errors.hpp"
#include "fracsob/experiments.hpp"

using namespace fracsob;
using nlohmann::json;

namespace {

json converge_config(double s, double p, int j) {
  return {{"experiment", "converge"},
          {"field", {{"name", "gauss-bump"}, {"n", 2}}},
          {"sobolev", {{"s", s}, {"p", p}, {"j", j}}}};
}

std::string error_of(const json& j) {
  try {
    ExperimentConfig::from_json(j);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_SUITE("experiments") {
  TEST_CASE("config validation") {
    CHECK(error_of(converge_config(0.4, 2.0, 1)).empty());
    CHECK(error_of(converge_config(0.8, 2.5, 1)).find("sp < j+1") != std::string::npos);
    json bad = converge_config(0.4, 2.0, 1);
    bad["experiment"] = "bogus";
    CHECK(error_of(bad).find("unknown experiment") != std::string::npos);
    json pipe = converge_config(0.6, 2.0, 1);
    pipe["experiment"] = "pipeline";
    CHECK(error_of(pipe).find("target") != std::string::npos);
    pipe["target"] = {{"kind", "sphere"}, {"k", 1}};
    pipe["sobolev"]["s"] = 0.3;
    CHECK(error_of(pipe).find("1 <= sp < n") != std::string::npos);
    CHECK_THROWS_AS(ExperimentConfig::load("/nonexistent/config.json"), ConfigError);
  }

  TEST_CASE("shipped configs parse") {
    const std::filesystem::path dir = std::filesystem::path(FRACSOB_SOURCE_DIR) / "configs";
    int count = 0;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
      if (e.path().extension() != ".json") continue;
      CAPTURE(e.path().string());
      if (e.path().stem() == "misconfigured")
        CHECK_THROWS_AS(ExperimentConfig::load(e.path()), ConfigError);
      else
        CHECK_NOTHROW(ExperimentConfig::load(e.path()));
      ++count;
    }
    CHECK(count >= 10);
  }

  TEST_CASE("floor constant matches its closed form") {
    CHECK(cstar_oracle() == doctest::Approx((std::sqrt(2.0) + std::asinh(1.0) - 1.0) / 2.0).epsilon(1e-9));
  }

  TEST_CASE("gradient gap of x_1 on a single cube") {
    const W11Row r = w11_gradient_gap(linear_x1_field(2), Box::cube(2, -1, 1), Vec{0.0, 0.0}, 1.0);
    CHECK(r.full_cubes == 1);
    CHECK(r.value == doctest::Approx(2.0 + 4.0 * (std::sqrt(2.0) + std::asinh(1.0)) / 3.0).epsilon(1e-7));
  }

  TEST_CASE("gradient gap does not shrink with eps") {
    const Box unit = Box::cube(2, 0, 1);
    const double a = w11_gradient_gap(linear_x1_field(2), unit, Vec{0.01, 0.02}, 0.1).value;
    const double b = w11_gradient_gap(linear_x1_field(2), unit, Vec{0.003, -0.004}, 0.025).value;
    CHECK(a > 1.0);
    CHECK(b == doctest::Approx(a).epsilon(0.05));
  }

  TEST_CASE("emitted files") {
    ExperimentReport rep;
    rep.name = "unit-emit";
    rep.experiment = "norm";
    rep.verdict = "finite";
    rep.rows.push_back({"lp_norm", 1.0, 2.0, -1, 0.0, 0.5, 0.01, 1, 100});
    rep.series["x_y"] = {{1.0, 2.0}, {3.0, 4.0}};
    const auto dir = std::filesystem::temp_directory_path() / "fracsob-unit-emit";
    std::filesystem::remove_all(dir);
    const auto files = emit_report(rep, dir);
    CHECK(files.size() == 3);
    std::ifstream csv(dir / "unit-emit.csv");
    std::string header, row;
    std::getline(csv, header);
    std::getline(csv, row);
    CHECK(header == kCsvHeader);
    CHECK(row.rfind("lp_norm,1,2,-1,0,0.5,", 0) == 0);
    std::ifstream js(dir / "unit-emit.json");
    const json doc = json::parse(js);
    CHECK(doc.at("verdict") == "finite");
    CHECK(doc.at("pass") == true);
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("approx-eval runs end to end") {
    json j = converge_config(0.4, 2.0, 1);
    j["experiment"] = "approx-eval";
    j["eps"] = {0.4, 0.2};
    j["quadrature"] = {{"samples", 4096}, {"seed", 3}};
    const ExperimentReport rep = run_experiment(ExperimentConfig::from_json(j));
    CHECK(rep.rows.size() == 2);
    CHECK(rep.series.at("eps_error").size() == 2);
  }
}
