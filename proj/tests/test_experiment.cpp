#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"

#include "flowpack/experiment.hpp"

using namespace flowpack;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json torus_config() {
  return json{{"system", {{"id", "torus-linear"}, {"direction", {1.0, 1.4142135623730951}}}},
              {"subset", {{"kind", "whole"}}},
              {"eps", {0.2}},
              {"t_window", {4, 8}},
              {"dt", 0.1},
              {"samples", 120},
              {"seed", 3},
              {"estimators", {"packing"}},
              {"packing", {{"probe_count", 100}, {"critical_check", false}}}};
}

std::string field_of(const json& doc) {
  try {
    parse_config(doc);
  } catch (const ConfigError& e) {
    return e.field_path;
  }
  return "";
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("flowpack_test_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("config validation names the offending field") {
  json doc = torus_config();
  CHECK(field_of(doc).empty());

  auto with = [&](const std::string& key, json value) {
    json d = doc;
    d[key] = std::move(value);
    return field_of(d);
  };
  CHECK(with("eps", {0.1, 0.2}) == "eps");
  CHECK(with("eps", {0.2, -0.1}) == "eps[1]");
  CHECK(with("t_window", {6, 8}) == "t_window");
  CHECK(with("estimators", {"packing", "nope"}) == "estimators[1]");
  CHECK(with("system", {{"id", "nope"}}) == "system.id");
  CHECK(with("subset", {{"kind", "samples"}, {"path", "/nonexistent/file.json"}}) ==
        "subset.path");
  CHECK(with("covering", {{"eta", 1.5}}) == "covering.eta");
  CHECK(with("frostman", {{"p_max", -1}}) == "frostman.p_max");
  CHECK(with("frostman", {{"select_margin", -0.5}}) == "frostman.select_margin");
  CHECK(with("measures", {{{"kind", "lift"}, {"atoms", 0}}}) == "measures[0].atoms");
  CHECK(with("measures", {{{"kind", "mixture"}, {"components", json::array()}}}) ==
        "measures[0].components");
  CHECK(with("local_entropy", {{"t_list", {1, 2}}}) == "local_entropy.t_list");

  json no_eps = doc;
  no_eps.erase("eps");
  CHECK(field_of(no_eps) == "eps");
  CHECK(field_of(json::array()) == "$");
}

TEST_CASE("config defaults and frostman options") {
  json doc = torus_config();
  doc["frostman"] = {{"eps", 0.1}, {"select_margin", 0.25}, {"pool_doublings", 5}};
  auto c = parse_config(doc);
  REQUIRE(c.frostman);
  CHECK(c.frostman->p_max == 3);
  CHECK(c.frostman->s_factor == doctest::Approx(0.8));
  CHECK(c.frostman->options.select_margin == doctest::Approx(0.25));
  CHECK(c.frostman->options.pool_doublings == 5);
  CHECK(c.tolerances.lower_bound == doctest::Approx(0.15));
  CHECK(c.tolerances.prop26 == doctest::Approx(0.05));
  CHECK(c.covering_eta == doctest::Approx(0.1));
}

TEST_CASE("a packing-only torus run writes one CSV and a summary") {
  auto c = parse_config(torus_config());
  fs::path dir = scratch_dir("packing");
  auto report = run_stages(c, stages_from_estimators(c.estimators), dir);
  REQUIRE(report.per_eps.size() == 1);
  REQUIRE(report.per_eps[0].packing);
  CHECK(report.per_eps[0].packing->value <= 0.05);
  CHECK(fs::exists(dir / "packing.csv"));
  CHECK_FALSE(fs::exists(dir / "bowen.csv"));
  CHECK(fs::exists(dir / "summary.json"));
  std::string csv = slurp(dir / "packing.csv");
  CHECK(csv.rfind("system,set,eps,t,R,s_fit,residual,seed\n", 0) == 0);

  auto summary = nlohmann::ordered_json::parse(slurp(dir / "summary.json"));
  CHECK(summary["system"] == "torus-linear");
  CHECK(summary.contains("per_eps"));
  CHECK(summary.contains("verdicts"));
  // Stable key order: system, subset, per_eps, ...
  auto it = summary.begin();
  CHECK(it.key() == "system");
  fs::remove_all(dir);
}

TEST_CASE("identical configs give byte-identical outputs") {
  json doc = torus_config();
  doc["system"] = {{"id", "shift-suspension"}};
  doc["eps"] = {0.5};
  doc["t_window"] = {2, 6};
  doc["estimators"] = {"packing", "bowen"};
  auto c = parse_config(doc);
  fs::path a = scratch_dir("det_a"), b = scratch_dir("det_b");
  run_stages(c, stages_from_estimators(c.estimators), a);
  run_stages(c, stages_from_estimators(c.estimators), b);
  for (const char* f : {"packing.csv", "bowen.csv", "summary.json"}) {
    REQUIRE(fs::exists(a / f));
    CHECK(slurp(a / f) == slurp(b / f));
  }
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("verdict margins are recomputable from the estimates") {
  json doc = torus_config();
  doc["estimators"] = {"packing", "bowen", "local-entropy"};
  doc["measures"] = {{{"kind", "lift"}, {"atoms", 2000}, {"id", "lebesgue"}}};
  doc["local_entropy"] = {{"eps", 0.5}, {"t_list", {2, 3, 4, 5}}, {"samples", 3}};
  auto c = parse_config(doc);
  auto report = verify_variational_principle(c);
  REQUIRE(!report.verdicts.empty());
  for (const auto& v : report.verdicts) {
    CHECK(v.margin == doctest::Approx(v.rhs - v.lhs));
    CHECK(v.pass == (v.margin >= 0.0));
    CHECK(!v.refs.empty());
  }
}

TEST_CASE("shipped example configs validate") {
  int seen = 0;
  for (const auto& entry : fs::directory_iterator(fs::path(FLOWPACK_SOURCE_DIR) / "configs")) {
    if (entry.path().extension() != ".json") continue;
    ++seen;
    CAPTURE(entry.path().string());
    CHECK_NOTHROW(load_config(entry.path()));
  }
  CHECK(seen >= 4);
}
