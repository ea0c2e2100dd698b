#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dplopt/error.hpp"
#include "dplopt/json_io.hpp"
#include "dplopt/manifest.hpp"
#include "dplopt/observations.hpp"
#include "dplopt/presets.hpp"

using namespace dplopt;

namespace {

std::vector<Observation> parse(const std::string& text) {
  std::istringstream in(text);
  return parse_observations_csv(in);
}

std::size_t parse_error_line(const std::string& text) {
  try {
    parse(text);
  } catch (const ParseError& e) {
    return e.line();
  }
  return static_cast<std::size_t>(-1);
}

const char* kHeader = "direction,data_size_millions,sampling_ratio,eval_cross_entropy\n";

}  // namespace

TEST_SUITE("io") {

TEST_CASE("observation CSV parsing") {
  const auto obs = parse(std::string("# comment\n\n") + kHeader + "de,10,0.5,1.9\n hi , 0.26 , 0.3 , 2.5 \n");
  REQUIRE(obs.size() == 2);
  CHECK(obs[1].direction == "hi");
  CHECK(obs[1].data_size == 0.26);
  CHECK_FALSE(obs[0].point_id);

  const auto with_id =
      parse("direction,data_size_millions,sampling_ratio,eval_cross_entropy,point_id\na,1,0.5,2,7\n");
  CHECK(*with_id[0].point_id == 7);
}

TEST_CASE("parse errors carry the line number") {
  CHECK(parse_error_line(std::string(kHeader) + "de,10,0.5,1.9\nde,10,abc,1.9\n") == 3);
  CHECK(parse_error_line(std::string(kHeader) + "de,10,0.5\n") == 2);
  CHECK(parse_error_line(std::string(kHeader) + "de,10,1.0,1.9\n") == 2);
  CHECK(parse_error_line(std::string(kHeader) + "de,-1,0.5,1.9\n") == 2);
  CHECK(parse_error_line(std::string(kHeader) + "de,10,0.5,nan\n") == 2);
  CHECK(parse_error_line(std::string(kHeader) + ",10,0.5,1.9\n") == 2);
  CHECK(parse_error_line("a,b,c,d\nde,10,0.5,1.9\n") == 1);
  CHECK_THROWS_WITH_AS(parse(kHeader), "no observations", ParseError);
  CHECK_THROWS_WITH_AS(parse(""), "no observations", ParseError);
}

TEST_CASE("observation CSV round trip") {
  std::vector<Observation> obs{{"de", 10, 0.1, 2.0123456789012345, 3}, {"hi", 0.26, 0.9, 1.0 / 3.0, 4}};
  std::ostringstream out;
  write_observations_csv(out, obs);
  const auto back = parse(out.str());
  REQUIRE(back.size() == 2);
  CHECK(back[0].eval_loss == obs[0].eval_loss);
  CHECK(back[1].eval_loss == obs[1].eval_loss);
  CHECK(*back[1].point_id == 4);
  obs[1].point_id.reset();
  std::ostringstream partial;
  write_observations_csv(partial, obs);
  CHECK(partial.str().find("point_id") == std::string::npos);
}

TEST_CASE("format_double round trips") {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 12345678.9}) CHECK(std::stod(format_double(v)) == v);
}

TEST_CASE("json parse error line") {
  try {
    parse_json_text("{\n  \"a\": 1,\n  oops\n}", "x.json");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
}

TEST_CASE("params and presets round trip through JSON") {
  DplParams p;
  p.alpha = 0.123456789;
  p.biases["de"] = 1.25;
  const auto back = params_from_json(params_to_json(p));
  CHECK(back.alpha == p.alpha);
  CHECK(back.biases.at("de") == 1.25);
  const Json report{{"params", params_to_json(p)}};
  CHECK(params_from_json(report).alpha == p.alpha);
  for (const auto& pre : builtin_presets()) {
    const auto q = preset_from_json(preset_to_json(pre));
    CHECK(q.label == pre.label);
    CHECK(q.params.beta == pre.params.beta);
    CHECK(params_from_json(preset_to_json(pre)).gamma == pre.params.gamma);
  }
  CHECK_THROWS_AS(params_from_json(Json::array()), DomainError);
  Json bad = params_to_json(p);
  bad["alpha"] = "x";
  CHECK_THROWS_AS(params_from_json(bad), DomainError);
}

TEST_CASE("directions JSON") {
  const auto d = directions_from_json(
      parse_json_text(R"({"directions":[{"name":"de","data_size_millions":4.6},{"name":"hi","data_size_millions":0.26}]})",
                      "d"));
  REQUIRE(d.size() == 2);
  CHECK(d[1].data_size == 0.26);
  CHECK(directions_from_json(directions_to_json(d))[0].name == "de");
  CHECK_THROWS_AS(directions_from_json(Json::array()), DomainError);
}

TEST_CASE("sweep points JSON") {
  std::vector<SweepPoint> pts{{{0.3, 0.7}, {{1.5, 2.5}, "p0"}}, {{0.6, 0.4}, {{1.2, 2.9}, ""}}};
  const auto back = sweep_points_from_json(sweep_points_to_json(pts));
  REQUIRE(back.size() == 2);
  CHECK(back[0].ratios == pts[0].ratios);
  CHECK(back[1].loss.losses == pts[1].loss.losses);
  CHECK(back[0].loss.tag == "p0");
}

TEST_CASE("simulation config JSON") {
  const auto c = sim_config_from_json(parse_json_text(
      R"({"tasks":[{"name":"x","train_size":500},{"name":"y","train_size":100}],
          "steps":10,"lr":{"schedule":"linear-decay","base":0.02},
          "grid":{"swept":1,"lo":0.2,"hi":0.8,"step":0.3},"seeds":3})",
      "c"));
  CHECK(c.tasks[1].train_size == 100);
  CHECK(c.lr.kind == LrSchedule::Kind::kLinearDecay);
  CHECK(c.lr.base == 0.02);
  CHECK(c.grid.size() == 3);
  CHECK(c.seeds.size() == 3);
  const auto again = sim_config_from_json(sim_config_to_json(c));
  CHECK(sim_config_to_json(again).dump() == sim_config_to_json(c).dump());
  const auto defaults = sim_config_from_json(Json::object());
  CHECK(defaults.tasks[1].train_size == SimConfig::imbalanced().tasks[1].train_size);
  CHECK_THROWS_AS(sim_config_from_json(parse_json_text(R"({"lr":{"schedule":"cosine"}})", "c")), DomainError);
  CHECK(sim_scenario_from_json(sim_scenario_to_json(scaling_scenario())).experiments.size() == 3);
}

TEST_CASE("manifest is deterministic and hashes inputs") {
  const auto dir = std::filesystem::temp_directory_path() / "dplopt_io_test";
  std::filesystem::create_directories(dir);
  const auto file = dir / "in.csv";
  {
    std::ofstream out(file);
    out << "abc";
  }
  RunManifest m;
  m.command = "fit";
  m.seed = 4;
  m.add_input(file);
  REQUIRE(m.inputs.size() == 1);
  CHECK(m.inputs[0].hash == hex64(fnv1a64("abc")));
  CHECK(m.digest() == RunManifest(m).digest());
  // FNV-1a 64 reference value for "a".
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  const auto side = m.sidecar("s", "f");
  CHECK(side.contains("started_at"));
  CHECK(m.to_json().dump().find("started_at") == std::string::npos);
  CHECK_THROWS_AS(m.add_input(dir / "missing.csv"), Error);
  std::filesystem::remove_all(dir);
}

}  // TEST_SUITE
