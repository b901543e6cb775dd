#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unistd.h>

#include "bondlab/commands.hpp"
#include "bondlab/error.hpp"
#include "bondlab/scenario.hpp"
#include "json.hpp"

using namespace bondlab;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Scratch {
  fs::path dir = fs::temp_directory_path() / ("bondlab_cli_" + std::to_string(::getpid()));
  Scratch() {
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Scratch() {
    std::error_code ec;
    fs::remove_all(dir, ec);
  }
} scratch_dir;

const fs::path& scratch() { return scratch_dir.dir; }

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

fs::path write_scenario(const std::string& name, const json& j) {
  const fs::path p = scratch() / (name + ".json");
  std::ofstream(p) << j.dump(2);
  return p;
}

int cli(const std::string& args) {
  const std::string cmd = std::string(BONDLAB_CLI) + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

json small_scenario() {
  return json::parse(R"({
    "name": "small",
    "initial_curve": {"family": "flat_forward", "rate": 0.04},
    "volatility": {"factors": [{"family": "humped", "c": 0.01, "b": 1.0}]},
    "market_price_of_risk": [0.2],
    "simulation": {"horizon": 1.0, "n_steps": 32, "n_paths": 64, "seed": 3},
    "utility": {"family": "log", "v": 2.0},
    "claim": {"type": "zero_coupon", "x0": 1.0},
    "hedge": {"n_paths": 8, "steps": [8, 16, 32]},
    "optimizer": {"ledger_paths": 2},
    "hjb": {"dt": 0.01, "n_w": 41, "trajectories": 4}
  })");
}

ErrorKind parse_kind(const json& j) {
  try {
    parse_scenario(j);
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("scenario accepted");
  return ErrorKind::ConfigInvalid;
}

std::string parse_field(const json& j) {
  try {
    parse_scenario(j);
  } catch (const Error& e) {
    return e.field();
  }
  return "";
}

}  // namespace

TEST_CASE("scenario resolution") {
  const Scenario sc = parse_scenario(small_scenario());
  CHECK(sc.resolved["grid"]["n_points"] == 513);
  CHECK(sc.resolved["simulation"]["measure"] == "P");
  CHECK(sc.resolved["hedge"]["steps"].size() == 3);
  CHECK_FALSE(sc.resolved.contains("output"));
  // the output location does not enter the hash
  json moved = small_scenario();
  moved["output"] = {{"dir", "elsewhere"}};
  CHECK(parse_scenario(moved).hash() == sc.hash());
  Overrides ov;
  ov.seed = 99;
  CHECK(parse_scenario(small_scenario(), ov).hash() != sc.hash());
  CHECK(parse_scenario(sc.resolved).hash() == sc.hash());
  CHECK(fnv1a_hex("") == "cbf29ce484222325");
}

TEST_CASE("scenario validation names the field") {
  json j = small_scenario();
  j["initial_curve"] = {{"family", "samples"}, {"values", std::vector<double>(513, 0.9)}};
  CHECK(parse_kind(j) == ErrorKind::NonPositiveInitialCurve);
  j = small_scenario();
  j["utility"]["family"] = "cubic";
  CHECK(parse_kind(j) == ErrorKind::UnsupportedUtility);
  j = small_scenario();
  j["utility"]["v"] = -1.0;
  CHECK(parse_kind(j) == ErrorKind::BudgetInfeasible);
  j = small_scenario();
  j["simulation"]["horizon"] = 9.9;
  CHECK(is_validation(parse_kind(j)));
  j = small_scenario();
  j["market_price_of_risk"] = {0.1, 0.2};
  CHECK(parse_field(j) == "market_price_of_risk");
  j = small_scenario();
  j["hedge"]["steps"] = {8, 12, 32};
  CHECK(parse_field(j) == "hedge.steps");
  j = small_scenario();
  j["volatility"]["factors"][0]["c"] = "big";
  CHECK(parse_field(j) == "volatility.factors[0].c");
}

TEST_CASE("library commands") {
  SUBCASE("zero volatility reproduces the translation identity") {
    json j = small_scenario();
    j["volatility"]["factors"][0] = {{"family", "zero"}};
    j["market_price_of_risk"] = {0.0};
    j["simulation"]["n_paths"] = 2;
    j["output"] = {{"dir", (scratch() / "zero").string()}};
    const auto r = cmd_simulate(parse_scenario(j));
    const json d = read_json(scratch() / "zero" / "diagnostics.json");
    CHECK(d["translation_deviation_path0"].get<double>() <= 1e-6);
    CHECK(r.summary.is_object());
  }
  SUBCASE("constant claim hedges with no error") {
    json j = small_scenario();
    j["claim"] = {{"type", "constant"}, {"value", 1.5}};
    j["output"] = {{"dir", (scratch() / "const").string()}};
    cmd_hedge(parse_scenario(j));
    const std::string rep = slurp(scratch() / "const" / "replication.csv");
    std::istringstream in(rep);
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      double K, dt, rms;
      char c;
      std::istringstream ls(line);
      ls >> K >> c >> dt >> c >> rms;
      CHECK(std::abs(rms) <= 1e-12);
    }
  }
  SUBCASE("log and quadratic plans") {
    json j = small_scenario();
    j["output"] = {{"dir", (scratch() / "log").string()}};
    cmd_optimize(parse_scenario(j));
    CHECK(read_json(scratch() / "log" / "plan.json")["lambda_hat"].get<double>() == 0.5);
    j["utility"] = {{"family", "quadratic"}, {"mu", 3.0}, {"v", 1.2}};
    j["output"] = {{"dir", (scratch() / "quad").string()}};
    cmd_optimize(parse_scenario(j));
    const json plan = read_json(scratch() / "quad" / "plan.json");
    CHECK(plan["lambda_hat"].get<double>() == doctest::Approx(1.8 * std::exp(-plan["integrated_gamma2"].get<double>())).epsilon(1e-10));
    CHECK(plan["integrated_gamma2"].get<double>() == doctest::Approx(0.04).epsilon(1e-12));
  }
  SUBCASE("zero market price of risk: pure cash plan and frozen value") {
    json j = small_scenario();
    j["market_price_of_risk"] = {0.0};
    j["output"] = {{"dir", (scratch() / "cash").string()}};
    const Scenario sc = parse_scenario(j);
    cmd_optimize(sc);
    std::istringstream in(slurp(scratch() / "cash" / "coefficients.csv"));
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      const auto a = line.find(','), b = line.find(',', a + 1), c = line.find(',', b + 1);
      CHECK(std::stod(line.substr(b + 1, c - b - 1)) == 0.0);
    }
    cmd_hjb(sc);
    const json h = read_json(scratch() / "cash" / "hjb_summary.json");
    CHECK(h["max_closed_form_error"].get<double>() == 0.0);
  }
  CHECK_THROWS(run_command("transmogrify", parse_scenario(small_scenario())));
}

TEST_CASE("command line") {
  const fs::path sc = write_scenario("small", small_scenario());
  const std::string base = "--scenario " + sc.string() + " --fixed-order --out ";
  SUBCASE("fixed-order runs are byte-identical") {
    for (const char* verb : {"simulate", "hedge", "optimize", "hjb"}) {
      const fs::path a = scratch() / (std::string(verb) + "_a"), b = scratch() / (std::string(verb) + "_b");
      REQUIRE(cli(std::string(verb) + " " + base + a.string()) == 0);
      REQUIRE(cli(std::string(verb) + " " + base + b.string()) == 0);
      std::size_t files = 0;
      for (const auto& e : fs::directory_iterator(a)) {
        CHECK(slurp(e.path()) == slurp(b / e.path().filename()));
        ++files;
      }
      CHECK(files >= 5);
      const json meta = read_json(a / "metadata.json");
      CHECK(meta["command"] == verb);
      CHECK(meta["scenario_hash"] == parse_scenario(small_scenario(), {.fixed_order = true}).hash());
      const json schema = read_json(a / "schema.json");
      for (const auto& e : fs::directory_iterator(a))
        if (e.path().extension() == ".csv") CHECK(schema.contains(e.path().filename().string()));
    }
  }
  SUBCASE("worker count does not change the output") {
    json j = small_scenario();
    j["simulation"]["workers"] = 3;
    const fs::path sc3 = write_scenario("workers", j);
    REQUIRE(cli("simulate --scenario " + sc3.string() + " --out " + (scratch() / "w3").string()) == 0);
    REQUIRE(cli("simulate " + base + (scratch() / "w1").string()) == 0);
    CHECK(slurp(scratch() / "w3" / "curves.csv") == slurp(scratch() / "w1" / "curves.csv"));
  }
  SUBCASE("overrides") {
    REQUIRE(cli("simulate " + base + (scratch() / "ov").string() + " --seed 5 --paths 10 --steps 16") == 0);
    const json r = read_json(scratch() / "ov" / "scenario.resolved.json");
    CHECK(r["simulation"]["seed"] == 5);
    CHECK(r["simulation"]["n_paths"] == 10);
    CHECK(r["simulation"]["n_steps"] == 16);
  }
  SUBCASE("exit codes and error payloads") {
    CHECK(cli("simulate") == 2);
    CHECK(cli("frobnicate --scenario x") == 2);
    CHECK(cli("simulate --scenario /nonexistent.json --out " + (scratch() / "missing").string()) == 2);
    const fs::path broken = scratch() / "broken.json";
    std::ofstream(broken) << "{ not json";
    CHECK(cli("simulate --scenario " + broken.string() + " --out " + (scratch() / "broken").string()) == 2);
    CHECK(read_json(scratch() / "broken" / "error.json")["category"] == "validation");
    // a claim driven by a factor with no loading cannot be hedged
    json j = small_scenario();
    j["volatility"]["factors"].push_back({{"family", "zero"}});
    j["market_price_of_risk"] = {0.2, 0.0};
    j["claim"] = {{"type", "brownian_linear"}, {"c", {0.0, 1.0}}};
    const fs::path dead = write_scenario("dead", j);
    CHECK(cli("hedge --scenario " + dead.string() + " --out " + (scratch() / "dead").string()) == 3);
    const json err = read_json(scratch() / "dead" / "error.json");
    CHECK(err["error"] == "OutOfRange");
    CHECK(err["category"] == "numerical");
  }
}

TEST_CASE("standard error scales with the path count") {
  // quadrupling the paths halves the Monte Carlo standard error
  auto mean_se = [](const fs::path& dir) {
    std::istringstream in(slurp(dir / "curves.csv"));
    std::string line;
    std::getline(in, line);
    double s = 0.0;
    std::size_t n = 0;
    while (std::getline(in, line)) {
      double v[5];
      std::istringstream ls(line);
      char c;
      ls >> v[0] >> c >> v[1] >> c >> v[2] >> c >> v[3];
      if (v[3] > 0.0) {
        s += v[3];
        ++n;
      }
    }
    return s / static_cast<double>(n);
  };
  json j = small_scenario();
  j["output"] = {{"dir", (scratch() / "se1").string()}};
  j["simulation"]["n_paths"] = 400;
  cmd_simulate(parse_scenario(j));
  j["output"] = {{"dir", (scratch() / "se4").string()}};
  j["simulation"]["n_paths"] = 1600;
  cmd_simulate(parse_scenario(j));
  const double ratio = mean_se(scratch() / "se4") / mean_se(scratch() / "se1");
  CHECK(ratio == doctest::Approx(0.5).epsilon(0.1));
}
