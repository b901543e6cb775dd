#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "bondlab/curve_space.hpp"
#include "bondlab/dynamics.hpp"
#include "bondlab/hjb.hpp"
#include "bondlab/market_model.hpp"
#include "bondlab/utility.hpp"
#include "json.hpp"

namespace bondlab {

struct UtilitySpec {
  Utility utility = Utility::log();
  double v = 1.0;
};

struct HedgeSpec {
  std::size_t n_paths = 200;
  std::vector<std::size_t> steps;  ///< refinement levels, ascending, each dividing the last
  double basis_lo = 0.5;
  double basis_hi = 0.0;
  double eps_rank = 1e-10;
  double eps_res_rel = 1e-8;
};

struct OptimizerSpec {
  std::vector<double> maturities;
  std::vector<Utility> fund_families;
  std::size_t competitors = 5;
  double epsilon = 0.05;
  std::size_t ledger_paths = 5;
};

struct HjbSpec {
  HjbGrid grid;
  std::size_t trajectories = 20;
};

/// A validated scenario: every default is filled into `resolved`.
struct Scenario {
  nlohmann::json resolved;
  std::string name;
  MaturityGrid grid{10.0, 513};
  SobolevIndex s{1};
  Curve p0 = Curve::constant(MaturityGrid(10.0, 513), 1.0);
  VolatilityOperator sigma;
  CoefficientSchedule schedule;
  std::size_t n_factors = 0;
  /// gamma(t) for deterministic schedules.
  std::function<std::vector<double>(double)> gamma_at;
  SimConfig sim;
  std::vector<double> test_maturities;
  std::vector<double> rollover_maturities;
  std::size_t moment_stride = 8;
  UtilitySpec utility;
  nlohmann::json claim;
  HedgeSpec hedge;
  OptimizerSpec optimizer;
  HjbSpec hjb;
  std::filesystem::path output_dir = "out";

  double window() const { return grid.x_max() - sim.horizon; }
  /// FNV-1a hash of the resolved scenario text.
  std::string hash() const;
};

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> paths;
  std::optional<std::size_t> steps;
  std::optional<std::filesystem::path> out;
  bool fixed_order = false;
};

/// Validates and resolves a scenario; errors carry the offending field.
Scenario parse_scenario(nlohmann::json raw, const Overrides& overrides = {});
Scenario load_scenario(const std::filesystem::path& file, const Overrides& overrides = {});

std::string fnv1a_hex(const std::string& text);

/// Curve <-> {x_max, n_points, a, g}.
nlohmann::json curve_to_json(const Curve& c);
Curve curve_from_json(const nlohmann::json& j);

}  // namespace bondlab
