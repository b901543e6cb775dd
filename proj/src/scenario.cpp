#include "bondlab/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "bondlab/error.hpp"
#include "bondlab/optimizer.hpp"

namespace bondlab {

using nlohmann::json;

namespace {

[[noreturn]] void invalid(const std::string& field, const std::string& msg) {
  fail(ErrorKind::ConfigInvalid, field + ": " + msg, field);
}

json& section(json& root, const char* key) {
  if (!root.contains(key) || root[key].is_null()) root[key] = json::object();
  if (!root[key].is_object()) invalid(key, "must be an object");
  return root[key];
}

double number(json& obj, const char* key, double def, const std::string& field) {
  if (!obj.contains(key)) obj[key] = def;
  if (!obj[key].is_number()) invalid(field + "." + key, "must be a number");
  const double v = obj[key].get<double>();
  if (!std::isfinite(v)) invalid(field + "." + key, "must be finite");
  return v;
}

std::size_t count(json& obj, const char* key, std::size_t def, const std::string& field) {
  if (!obj.contains(key)) obj[key] = def;
  if (!obj[key].is_number_integer() || obj[key].get<long long>() < 0)
    invalid(field + "." + key, "must be a non-negative integer");
  return obj[key].get<std::size_t>();
}

std::string text(json& obj, const char* key, const std::string& def, const std::string& field) {
  if (!obj.contains(key)) obj[key] = def;
  if (!obj[key].is_string()) invalid(field + "." + key, "must be a string");
  return obj[key].get<std::string>();
}

std::vector<double> numbers(json& obj, const char* key, const std::vector<double>& def,
                            const std::string& field) {
  if (!obj.contains(key)) obj[key] = def;
  if (!obj[key].is_array()) invalid(field + "." + key, "must be an array of numbers");
  std::vector<double> out;
  for (const auto& e : obj[key]) {
    if (!e.is_number()) invalid(field + "." + key, "must be an array of numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

Curve build_initial_curve(json& spec, const MaturityGrid& grid) {
  const std::string fam = text(spec, "family", "flat_forward", "initial_curve");
  if (fam == "flat_forward") {
    const double r = number(spec, "rate", 0.05, "initial_curve");
    if (r == 0.0) return Curve::constant(grid, 1.0);
    return Curve::sample(grid, [r](double x) { return std::exp(-r * x); });
  }
  if (fam == "affine_forward") {
    const double lv = number(spec, "level", 0.02, "initial_curve");
    const double sl = number(spec, "slope", 0.01, "initial_curve");
    if (lv == 0.0 && sl == 0.0) return Curve::constant(grid, 1.0);
    return Curve::sample(grid, [lv, sl](double x) { return std::exp(-lv * x - 0.5 * sl * x * x); });
  }
  if (fam == "samples") {
    const auto v = numbers(spec, "values", {}, "initial_curve");
    const double a = number(spec, "a", 0.0, "initial_curve");
    if (v.size() != grid.size())
      invalid("initial_curve.values", "needs exactly grid.n_points samples");
    std::vector<double> g(v);
    for (double& e : g) e -= a;
    return Curve(grid, std::move(g), a);
  }
  invalid("initial_curve.family", "unknown family '" + fam + "'");
}

std::vector<Curve> build_factors(json& vol, const MaturityGrid& grid, SobolevIndex s) {
  if (!vol.contains("factors")) vol["factors"] = json::array();
  if (!vol["factors"].is_array()) invalid("volatility.factors", "must be an array");
  std::vector<Curve> out;
  std::size_t idx = 0;
  for (auto& f : vol["factors"]) {
    const std::string field = "volatility.factors[" + std::to_string(idx++) + "]";
    if (!f.is_object()) invalid(field, "must be an object");
    const std::string fam = text(f, "family", "humped", field);
    if (fam == "humped") {
      const double c = number(f, "c", 0.01, field);
      const double b = number(f, "b", 1.0, field);
      out.push_back(humped_loading(grid, c, b));
    } else if (fam == "zero") {
      out.push_back(Curve::zero(grid));
    } else if (fam == "samples") {
      const auto v = numbers(f, "values", {}, field);
      if (v.size() != grid.size()) invalid(field + ".values", "needs grid.n_points samples");
      out.emplace_back(grid, v, 0.0);
    } else if (fam == "decaying_modes") {
      const std::size_t n = count(f, "n", 8, field);
      const double c = number(f, "c", 0.01, field);
      const double sp = number(f, "s_prime", 1.0, field);
      for (auto& m : decaying_mode_loadings(grid, n, c, sp, s)) out.push_back(std::move(m));
    } else {
      invalid(field + ".family", "unknown family '" + fam + "'");
    }
    try {
      VolatilityOperator check({out.back()});
    } catch (const Error& e) {
      invalid(field, e.what());
    }
  }
  return out;
}

Utility build_utility(json& spec, const std::string& field) {
  const std::string fam = text(spec, "family", "log", field);
  if (fam == "log") return Utility::log();
  if (fam == "quadratic") return Utility::quadratic(number(spec, "mu", 2.0, field));
  if (fam == "exponential") return Utility::exponential(number(spec, "mu", 1.0, field));
  if (fam == "power") return Utility::power(number(spec, "mu", 0.5, field));
  fail(ErrorKind::UnsupportedUtility, field + ": unknown utility family '" + fam + "'",
       field + ".family");
}

}  // namespace

std::string fnv1a_hex(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string Scenario::hash() const { return fnv1a_hex(resolved.dump()); }

json curve_to_json(const Curve& c) {
  return json{{"x_max", c.grid().x_max()},
              {"n_points", c.grid().size()},
              {"a", c.a()},
              {"g", std::vector<double>(c.g().begin(), c.g().end())}};
}

Curve curve_from_json(const json& j) {
  try {
    MaturityGrid grid(j.at("x_max").get<double>(), j.at("n_points").get<std::size_t>());
    return Curve(grid, j.at("g").get<std::vector<double>>(), j.value("a", 0.0));
  } catch (const json::exception& e) {
    fail(ErrorKind::ConfigInvalid, std::string("malformed curve: ") + e.what(), "curve");
  }
}

Scenario parse_scenario(json raw, const Overrides& ov) {
  if (!raw.is_object()) invalid("scenario", "must be a JSON object");
  Scenario sc;
  json& r = raw;
  sc.name = text(r, "name", "scenario", "scenario");

  json& g = section(r, "grid");
  const double x_max = number(g, "x_max", 10.0, "grid");
  const std::size_t n_points = count(g, "n_points", 513, "grid");
  sc.grid = MaturityGrid(x_max, n_points);
  if (!r.contains("sobolev_index")) r["sobolev_index"] = 1;
  if (!r["sobolev_index"].is_number_integer() || r["sobolev_index"].get<int>() < 1)
    invalid("sobolev_index", "must be an integer >= 1");
  sc.s = SobolevIndex(r["sobolev_index"].get<int>());

  json& ic = section(r, "initial_curve");
  sc.p0 = build_initial_curve(ic, sc.grid);
  validate_initial_curve(sc.p0);

  json& vol = section(r, "volatility");
  sc.sigma = VolatilityOperator(build_factors(vol, sc.grid, sc.s));
  sc.n_factors = sc.sigma.size();

  // market price of risk: constant list, {"start","end"} linear in t, or "solve"
  if (!r.contains("market_price_of_risk"))
    r["market_price_of_risk"] = std::vector<double>(sc.n_factors, 0.0);
  json& mpr = r["market_price_of_risk"];
  std::vector<double> g0, g1;
  if (mpr.is_string()) {
    if (mpr.get<std::string>() != "solve")
      invalid("market_price_of_risk", "must be a list, {start, end} or \"solve\"");
    json& drift = section(r, "drift");
    Curve m = Curve::zero(sc.grid);
    if (drift.contains("samples")) {
      const auto v = numbers(drift, "samples", {}, "drift");
      if (v.size() != sc.grid.size()) invalid("drift.samples", "needs grid.n_points samples");
      m = Curve(sc.grid, v, 0.0);
    } else {
      const auto w = numbers(drift, "combination", std::vector<double>(sc.n_factors, 0.0), "drift");
      if (w.size() != sc.n_factors) invalid("drift.combination", "needs one weight per factor");
      m = sc.n_factors ? sc.sigma.apply(w, sc.grid) : Curve::zero(sc.grid);
    }
    DriftCurve dc = [&] {
      try {
        return DriftCurve(m);
      } catch (const Error& e) {
        invalid("drift", e.what());
      }
    }();
    g0 = solve_market_price_of_risk(sc.sigma, dc, sc.s).gamma.gamma;
    g1 = g0;
    drift["solved_gamma"] = g0;
  } else if (mpr.is_array()) {
    g0 = numbers(r, "market_price_of_risk", {}, "scenario");
    g1 = g0;
  } else if (mpr.is_object()) {
    g0 = numbers(mpr, "start", {}, "market_price_of_risk");
    g1 = numbers(mpr, "end", g0, "market_price_of_risk");
  } else {
    invalid("market_price_of_risk", "must be a list, {start, end} or \"solve\"");
  }
  if (g0.size() != sc.n_factors || g1.size() != sc.n_factors)
    invalid("market_price_of_risk", "needs one entry per factor");

  json& sim = section(r, "simulation");
  sc.sim.grid = sc.grid;
  sc.sim.s = sc.s;
  sc.sim.horizon = number(sim, "horizon", 1.0, "simulation");
  if (ov.steps) sim["n_steps"] = *ov.steps;
  if (ov.paths) sim["n_paths"] = *ov.paths;
  if (ov.seed) sim["seed"] = *ov.seed;
  sc.sim.n_steps = count(sim, "n_steps", 256, "simulation");
  sc.sim.n_paths = count(sim, "n_paths", 1000, "simulation");
  sc.sim.seed = count(sim, "seed", 1, "simulation");
  const std::string measure = text(sim, "measure", "P", "simulation");
  if (measure != "P" && measure != "Q") invalid("simulation.measure", "must be \"P\" or \"Q\"");
  sc.sim.measure = measure == "Q" ? Measure::Q : Measure::P;
  if (sc.sim.n_steps == 0) invalid("simulation.n_steps", "must be positive");
  if (sc.sim.n_paths == 0) invalid("simulation.n_paths", "must be positive");
  const std::size_t stride_default = sc.sim.n_steps % 8 == 0 ? sc.sim.n_steps / 8 : 1;
  sc.sim.record_stride = count(sim, "record_stride", stride_default, "simulation");
  if (sc.sim.record_stride == 0 || sc.sim.n_steps % sc.sim.record_stride != 0)
    invalid("simulation.record_stride", "must divide n_steps");
  sc.moment_stride = count(sim, "moment_stride", stride_default, "simulation");
  if (sc.moment_stride == 0) invalid("simulation.moment_stride", "must be positive");
  const double T = sc.sim.horizon;
  const double room = x_max - T;
  if (!(room > 0.0)) invalid("grid.x_max", "must exceed the simulation horizon");
  sc.test_maturities = numbers(sim, "test_maturities", {0.5, 1.0, 2.0, 4.0, 8.0}, "simulation");
  sc.rollover_maturities = numbers(sim, "rollover_maturities", {0.0, 1.0}, "simulation");
  sc.sim.workers = ov.fixed_order ? 1 : count(sim, "workers", 0, "simulation");
  if (ov.fixed_order) sim["workers"] = 1;

  const double tg = T;
  sc.gamma_at = [g0, g1, tg](double t) {
    std::vector<double> g(g0.size());
    const double a = std::clamp(t / tg, 0.0, 1.0);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = (1.0 - a) * g0[i] + a * g1[i];
    return g;
  };

  // optional state dependence: sigma_t = sigma (1 + strength tanh((r_t - r_0) / scale))
  if (vol.contains("state_dependent") && !vol["state_dependent"].is_null()) {
    json& sd = vol["state_dependent"];
    if (!sd.is_object()) invalid("volatility.state_dependent", "must be an object");
    const std::string kind = text(sd, "kind", "rate_level", "volatility.state_dependent");
    if (kind != "rate_level") invalid("volatility.state_dependent.kind", "unknown kind");
    const double strength = number(sd, "strength", 0.5, "volatility.state_dependent");
    const double scale = number(sd, "scale", 0.01, "volatility.state_dependent");
    if (std::abs(strength) >= 1.0)
      invalid("volatility.state_dependent.strength", "must lie in (-1, 1)");
    if (!(scale > 0.0)) invalid("volatility.state_dependent.scale", "must be positive");
    const double r0 = spot_rate(sc.p0);
    auto base = sc.sigma;
    auto gam = sc.gamma_at;
    auto grid = sc.grid;
    sc.schedule = CoefficientSchedule::state_dependent(
        [base, gam, grid, r0, strength, scale](double t, const Curve& p) {
          const double f = 1.0 + strength * std::tanh((spot_rate(p) - r0) / scale);
          std::vector<Curve> fs;
          for (const auto& c : base.factors()) fs.push_back(f * c);
          return state_from_gamma(VolatilityOperator(std::move(fs)), gam(t), grid);
        });
  } else {
    auto base = sc.sigma;
    auto gam = sc.gamma_at;
    auto grid = sc.grid;
    const bool constant = g0 == g1;
    if (constant) {
      sc.schedule = CoefficientSchedule::constant(state_from_gamma(base, g0, grid));
    } else {
      sc.schedule = CoefficientSchedule::deterministic(
          [base, gam, grid](double t) { return state_from_gamma(base, gam(t), grid); });
    }
  }

  json& ut = section(r, "utility");
  sc.utility.utility = build_utility(ut, "utility");
  sc.utility.v = number(ut, "v", 1.0, "utility");
  if (!(sc.utility.v > sc.utility.utility.lower_bound()))
    fail(ErrorKind::BudgetInfeasible, "utility.v: must exceed the lower wealth bound", "utility.v");

  json& cl = section(r, "claim");
  const std::string ctype = text(cl, "type", "zero_coupon", "claim");
  double claim_maturity = 0.0;
  if (ctype == "zero_coupon") {
    claim_maturity = number(cl, "x0", 1.0, "claim");
    if (claim_maturity < 0.0) invalid("claim.x0", "must be non-negative");
  } else if (ctype == "constant") {
    number(cl, "value", 1.0, "claim");
  } else if (ctype == "rollover") {
    claim_maturity = number(cl, "S", 1.0, "claim");
    number(cl, "units", 1.0, "claim");
  } else if (ctype == "brownian_linear") {
    const auto c = numbers(cl, "c", std::vector<double>(sc.n_factors, 1.0), "claim");
    if (c.size() != sc.n_factors) invalid("claim.c", "needs one coefficient per factor");
  } else {
    invalid("claim.type", "unknown claim type '" + ctype + "'");
  }
  sc.claim = cl;

  json& hd = section(r, "hedge");
  sc.hedge.n_paths = count(hd, "n_paths", 200, "hedge");
  {
    std::vector<double> def;
    for (std::size_t d : {4u, 2u, 1u})
      if (sc.sim.n_steps % d == 0) def.push_back(static_cast<double>(sc.sim.n_steps / d));
    const auto lv = numbers(hd, "steps", def, "hedge");
    for (double v : lv) {
      if (!(v >= 1.0) || v != std::floor(v)) invalid("hedge.steps", "must be positive integers");
      sc.hedge.steps.push_back(static_cast<std::size_t>(v));
    }
    if (sc.hedge.steps.empty()) invalid("hedge.steps", "must not be empty");
    if (!std::is_sorted(sc.hedge.steps.begin(), sc.hedge.steps.end()))
      invalid("hedge.steps", "must be ascending");
    for (std::size_t v : sc.hedge.steps)
      if (sc.hedge.steps.back() % v != 0) invalid("hedge.steps", "each level must divide the finest");
  }
  sc.hedge.basis_lo = number(hd, "basis_lo", 0.5, "hedge");
  sc.hedge.basis_hi = number(hd, "basis_hi", room, "hedge");
  if (sc.hedge.basis_lo < 0.0 || sc.hedge.basis_hi < sc.hedge.basis_lo)
    invalid("hedge.basis_lo", "basis interval must satisfy 0 <= lo <= hi");
  sc.hedge.eps_rank = number(hd, "eps_rank", 1e-10, "hedge");
  sc.hedge.eps_res_rel = number(hd, "eps_res_rel", 1e-8, "hedge");

  json& op = section(r, "optimizer");
  sc.optimizer.maturities =
      numbers(op, "maturities", default_maturities(sc.n_factors, 0.5, room), "optimizer");
  if (!op.contains("fund_families"))
    op["fund_families"] = json::array({json{{"family", "log"}},
                                       json{{"family", "power"}, {"mu", 0.5}},
                                       json{{"family", "exponential"}, {"mu", 1.0}}});
  if (!op["fund_families"].is_array()) invalid("optimizer.fund_families", "must be an array");
  for (std::size_t i = 0; i < op["fund_families"].size(); ++i)
    sc.optimizer.fund_families.push_back(build_utility(
        op["fund_families"][i], "optimizer.fund_families[" + std::to_string(i) + "]"));
  sc.optimizer.competitors = count(op, "competitors", 5, "optimizer");
  sc.optimizer.epsilon = number(op, "epsilon", 0.05, "optimizer");
  sc.optimizer.ledger_paths = count(op, "ledger_paths", 5, "optimizer");

  json& hj = section(r, "hjb");
  sc.hjb.grid.w_min = number(hj, "w_min", 0.25, "hjb");
  sc.hjb.grid.w_max = number(hj, "w_max", 4.0, "hjb");
  sc.hjb.grid.n_w = count(hj, "n_w", 101, "hjb");
  sc.hjb.grid.dt = number(hj, "dt", 1e-3, "hjb");
  sc.hjb.grid.eps_conv = number(hj, "eps_conv", 1e-12, "hjb");
  sc.hjb.trajectories = count(hj, "trajectories", 20, "hjb");

  json& out = section(r, "output");
  if (ov.out) out["dir"] = ov.out->string();
  sc.output_dir = text(out, "dir", "out", "output");
  // where results go is not part of the experiment; keep it out of the hash
  r.erase("output");

  double max_maturity = std::max(sc.hedge.basis_hi, claim_maturity);
  for (double m : sc.test_maturities) max_maturity = std::max(max_maturity, m);
  for (double m : sc.rollover_maturities) max_maturity = std::max(max_maturity, m);
  for (double m : sc.optimizer.maturities) max_maturity = std::max(max_maturity, m);
  for (double m : sc.test_maturities)
    if (m < 0.0) invalid("simulation.test_maturities", "must be non-negative");
  for (double m : sc.rollover_maturities)
    if (m < 0.0) invalid("simulation.rollover_maturities", "must be non-negative");
  sc.sim.max_maturity = max_maturity;
  try {
    sc.sim.validate();
  } catch (const Error& e) {
    fail(e.kind(), e.what(), e.field());
  }
  sc.resolved = r;
  return sc;
}

Scenario load_scenario(const std::filesystem::path& file, const Overrides& overrides) {
  std::ifstream in(file);
  if (!in) fail(ErrorKind::ConfigInvalid, "cannot open scenario file " + file.string(), "scenario");
  json raw;
  try {
    raw = json::parse(in);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::ConfigInvalid, std::string("scenario is not valid JSON: ") + e.what(),
         "scenario");
  }
  return parse_scenario(std::move(raw), overrides);
}

}  // namespace bondlab
