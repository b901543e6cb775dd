#include "bondlab/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>

#include "bondlab/dynamics.hpp"
#include "bondlab/error.hpp"
#include "bondlab/hedging.hpp"
#include "bondlab/hjb.hpp"
#include "bondlab/noise.hpp"
#include "bondlab/optimizer.hpp"
#include "bondlab/portfolio.hpp"

namespace bondlab {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class Csv {
 public:
  explicit Csv(const fs::path& file) : out_(file, std::ios::binary) {
    if (!out_) fail(ErrorKind::ConfigInvalid, "cannot write " + file.string(), "output.dir");
  }
  Csv& operator<<(double v) { return cell(num(v)); }
  Csv& operator<<(std::size_t v) { return cell(std::to_string(v)); }
  Csv& operator<<(const std::string& v) { return cell(v); }
  void end() {
    out_ << line_ << '\n';
    line_.clear();
    first_ = true;
  }

 private:
  Csv& cell(const std::string& s) {
    if (!first_) line_ += ',';
    line_ += s;
    first_ = false;
    return *this;
  }
  std::ofstream out_;
  std::string line_;
  bool first_ = true;
};

/// Output directory plus the schema entries of every file written into it.
class Outputs {
 public:
  Outputs(const Scenario& sc, std::string command) : sc_(sc), command_(std::move(command)) {
    dir_ = sc.output_dir;
    fs::create_directories(dir_);
  }

  Csv csv(const std::string& name, const std::vector<std::string>& columns,
          const std::string& description) {
    Csv c(dir_ / name);
    for (const auto& col : columns) c << col;
    c.end();
    schema_[name] = json{{"description", description}, {"columns", columns}};
    files_.push_back(dir_ / name);
    return c;
  }

  void json_file(const std::string& name, const json& j, const std::string& description) {
    std::ofstream out(dir_ / name, std::ios::binary);
    if (!out) fail(ErrorKind::ConfigInvalid, "cannot write " + (dir_ / name).string(), "output.dir");
    out << j.dump(2) << '\n';
    if (!description.empty()) schema_[name] = json{{"description", description}};
    files_.push_back(dir_ / name);
  }

  const fs::path& dir() const { return dir_; }

  CommandResult finish(json summary) {
    json_file("scenario.resolved.json", sc_.resolved, "scenario with every default filled in");
    json meta{{"command", command_},
              {"scenario_hash", sc_.hash()},
              {"scenario_name", sc_.name},
              {"seed", sc_.sim.seed},
              {"n_paths", sc_.sim.n_paths},
              {"n_steps", sc_.sim.n_steps},
              {"fixed_order", sc_.sim.workers == 1}};
    json_file("metadata.json", meta, "run provenance; every output traces to scenario_hash");
    schema_["schema.json"] = json{{"description", "this file"}};
    json_file("schema.json", schema_, "");
    CommandResult r;
    summary["scenario_hash"] = sc_.hash();
    r.summary = std::move(summary);
    r.files = files_;
    return r;
  }

 private:
  const Scenario& sc_;
  std::string command_;
  fs::path dir_;
  json schema_ = json::object();
  std::vector<fs::path> files_;
};

std::vector<std::string> indexed(const std::string& stem, std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 1; i <= n; ++i) out.push_back(stem + std::to_string(i));
  return out;
}

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

// gamma per step from a deterministic schedule.
GammaPath step_gamma(const MildSimulator& sim) {
  GammaPath g;
  for (const auto& st : sim.deterministic_states()) g.push_back(st->gamma.gamma);
  return g;
}

double total_variance(const GammaPath& g, double dt) {
  double G = 0.0;
  for (const auto& row : g) G += norm2(row) * dt;
  return G;
}

ClaimModel claim_model(const Scenario& sc) {
  const json& c = sc.claim;
  const std::string type = c.at("type").get<std::string>();
  if (type == "zero_coupon") return zero_coupon_claim(c.at("x0").get<double>(), sc.sim.horizon);
  if (type == "constant") return constant_claim(c.at("value").get<double>());
  if (type == "rollover")
    return rollover_claim(c.at("S").get<double>(), c.at("units").get<double>());
  return brownian_linear_claim(c.at("c").get<std::vector<double>>());
}

void require_deterministic(const Scenario& sc, const char* what) {
  if (!sc.schedule.is_deterministic())
    fail(ErrorKind::ConfigInvalid, std::string(what) + " needs deterministic coefficients",
         "volatility.state_dependent");
}

}  // namespace

// ---------------------------------------------------------------- simulate

CommandResult cmd_simulate(const Scenario& sc) {
  Outputs out(sc, "simulate");
  SimConfig cfg = sc.sim;
  cfg.record_stride = 1;
  const MildSimulator sim(sc.p0, sc.schedule, cfg);
  const std::size_t K = cfg.n_steps;
  const std::size_t rec = sc.sim.record_stride;
  const std::size_t R = K / rec + 1;
  const std::size_t N = cfg.n_paths;
  const auto& xs = sc.test_maturities;
  const auto& Ss = sc.rollover_maturities;
  const double window = sc.window();
  const double dt = cfg.dt();

  struct PathOut {
    std::vector<double> p;      // R x |xs|
    std::vector<double> r;      // R
    std::vector<double> units;  // |Ss| x R
    std::vector<double> value;  // |Ss| x R
    double xi_T = 0.0;
    double boundary = 0.0;
    double min_p = 0.0;
    double translate_dev = 0.0;
    PathSupNorms sup;
    GammaPath gamma;
  };
  std::vector<PathOut> res(N);
  parallel_paths(N, cfg.workers, [&](std::size_t i) {
    const CurvePath path = sim.run_path(i);
    PathOut& o = res[i];
    for (std::size_t r = 0; r < R; ++r) {
      const std::size_t k = r * rec;
      const Curve& p = path.state(k);
      for (double x : xs) o.p.push_back(p(x));
      o.r.push_back(spot_rate(p));
    }
    for (double S : Ss) {
      const RolloverPath roll = simulate_rollover(path, S);
      for (std::size_t r = 0; r < R; ++r) {
        o.units.push_back(roll.units[r * rec]);
        o.value.push_back(roll.value[r * rec]);
      }
    }
    o.xi_T = path.xi.back();
    o.boundary = boundary_residual(path);
    o.min_p = min_value(path, window);
    o.sup = path_sup_norms(path, sc.p0, sc.s, window, sc.moment_stride);
    o.gamma = path.gamma();
    if (i == 0) {
      const std::size_t n = sc.grid.floor_index(window) + 1;
      for (std::size_t k = 0; k <= K; ++k) {
        const Curve& p = path.state(k);
        for (std::size_t j = 0; j < n; ++j)
          o.translate_dev = std::max(
              o.translate_dev, std::abs(p.at_node(j) - sc.p0(path.times[k] + sc.grid.node(j))));
      }
    }
  });

  auto column = [&](auto pick) {
    std::vector<double> v(N);
    for (std::size_t i = 0; i < N; ++i) v[i] = pick(res[i]);
    return mean_se(v);
  };

  {
    Csv c = out.csv("curves.csv", {"t", "x", "mean_p", "se_p", "p0_shifted"},
                    "cross-path mean of p_t(x) at the test maturities with p0(t+x) for reference");
    for (std::size_t r = 0; r < R; ++r) {
      const double t = cfg.horizon * static_cast<double>(r * rec) / static_cast<double>(K);
      for (std::size_t m = 0; m < xs.size(); ++m) {
        const MeanSE ms = column([&](const PathOut& o) { return o.p[r * xs.size() + m]; });
        c << t << xs[m] << ms.mean << ms.se << sc.p0(t + xs[m]);
        c.end();
      }
    }
  }
  {
    Csv c = out.csv("rates.csv", {"t", "mean_r", "se_r"}, "cross-path mean of the short rate");
    for (std::size_t r = 0; r < R; ++r) {
      const double t = cfg.horizon * static_cast<double>(r * rec) / static_cast<double>(K);
      const MeanSE ms = column([&](const PathOut& o) { return o.r[r]; });
      c << t << ms.mean << ms.se;
      c.end();
    }
  }
  {
    Csv c = out.csv("rollovers.csv", {"t", "S", "mean_units", "se_units", "mean_value", "se_value"},
                    "rollover units x_t = exp(int f_u(S) du) and value x_t p_t(S)");
    for (std::size_t m = 0; m < Ss.size(); ++m)
      for (std::size_t r = 0; r < R; ++r) {
        const double t = cfg.horizon * static_cast<double>(r * rec) / static_cast<double>(K);
        const MeanSE u = column([&](const PathOut& o) { return o.units[m * R + r]; });
        const MeanSE v = column([&](const PathOut& o) { return o.value[m * R + r]; });
        c << t << Ss[m] << u.mean << u.se << v.mean << v.se;
        c.end();
      }
  }

  const MeanSE xi = column([](const PathOut& o) { return o.xi_T; });
  std::vector<double> log_xi(N);
  for (std::size_t i = 0; i < N; ++i) log_xi[i] = std::log(res[i].xi_T);
  const MeanSE lx = mean_se(log_xi);
  const double var_log_xi = lx.se * lx.se * static_cast<double>(N);
  double boundary = 0.0, min_p = INFINITY;
  std::size_t non_positive = 0;
  for (const auto& o : res) {
    boundary = std::max(boundary, o.boundary);
    min_p = std::min(min_p, o.min_p);
    if (!(o.min_p > 0.0)) ++non_positive;
  }
  std::vector<GammaPath> gammas;
  gammas.reserve(N);
  for (auto& o : res) gammas.push_back(std::move(o.gamma));
  const StrongArbitrageReport sa = strong_arbitrage_diagnostic(gammas, dt);
  double G = 0.0;
  if (!gammas.empty()) G = total_variance(gammas.front(), dt);

  json diag{{"boundary_residual_max", boundary},
            {"min_price_on_window", min_p},
            {"paths_non_positive", non_positive},
            {"translation_deviation_path0", res.empty() ? 0.0 : res[0].translate_dev},
            {"xi_T", {{"mean", xi.mean}, {"se", xi.se}, {"log_variance", var_log_xi},
                      {"path0_integrated_gamma2", G}}},
            {"strong_arbitrage", {{"max_integral", sa.max_integral},
                                  {"exp_moments", sa.exp_moments},
                                  {"exp_moments_half", sa.exp_moments_half},
                                  {"warn", sa.warn}}}};
  if (N >= 100) {
    std::vector<PathSupNorms> sups;
    for (const auto& o : res) sups.push_back(o.sup);
    const std::vector<int> us{2, 4, 8};
    const MomentReport m = moment_diagnostic(sups, us);
    diag["moments"] = {{"u", m.u},
                       {"p", m.p},
                       {"p_half", m.p_half},
                       {"q", m.q},
                       {"q_inv", m.q_inv},
                       {"max_relative_change", m.max_relative_change},
                       {"stable", m.stable},
                       {"empirical_A", m.empirical_A}};
  }
  out.json_file("diagnostics.json", diag, "path diagnostics: boundary, positivity, density, moments");
  return out.finish(diag);
}

// ---------------------------------------------------------------- hedge

CommandResult cmd_hedge(const Scenario& sc) {
  Outputs out(sc, "hedge");
  if (sc.n_factors == 0)
    fail(ErrorKind::ConfigInvalid, "hedging needs at least one factor", "volatility.factors");
  const ClaimModel claim = claim_model(sc);
  const auto& levels = sc.hedge.steps;
  const std::size_t fine = levels.back();
  const std::size_t N = sc.hedge.n_paths;
  const std::size_t n = sc.n_factors;
  const double T = sc.sim.horizon;
  HedgeOptions opt;
  opt.basis = default_atom_basis(n, sc.hedge.basis_lo, sc.hedge.basis_hi);
  opt.eps_rank = sc.hedge.eps_rank;
  opt.eps_res_rel = sc.hedge.eps_res_rel;

  Csv rep = out.csv("replication.csv",
                    {"n_steps", "dt", "rms_error", "mean_abs_error", "max_abs_error", "sf_rms",
                     "max_solve_residual", "max_atom_residual"},
                    "replication error V_0 + G_T - X per refinement level on shared noise");
  json levels_json = json::array();
  std::vector<HedgeStepReport> trace;
  std::vector<Curve> trace_states;
  for (std::size_t L : levels) {
    SimConfig cfg = sc.sim;
    cfg.n_steps = L;
    cfg.record_stride = 1;
    const MildSimulator sim(sc.p0, sc.schedule, cfg);
    std::vector<HedgeOperators> det_ops;
    if (sc.schedule.is_deterministic()) {
      std::vector<double> times;
      for (std::size_t k = 0; k < L; ++k) times.push_back(T * static_cast<double>(k) / static_cast<double>(L));
      det_ops = gram_operators(sc.schedule, sc.p0, times, sc.s);
    }
    std::vector<double> err(N), sf(N), solve_res(N), atom_res(N);
    parallel_paths(N, sc.sim.workers, [&](std::size_t i) {
      const BrownianIncrements noise =
          coarsen(draw_increments(sc.sim.seed, i, fine, n, T / static_cast<double>(fine)), fine / L);
      const CurvePath path = sim.run(noise);
      const auto path_ops = det_ops.empty() ? gram_operators(path, sc.p0, sc.s) : det_ops;
      const CompletedHedge h = complete_hedge(path, path_ops, claim.integrand, claim.mean, opt, sc.s);
      err[i] = replication_error(h.strategy, path, claim.payoff(path), sc.s);
      sf[i] = self_financing_residual(h.strategy, path, sc.s);
      for (const auto& st : h.steps) {
        solve_res[i] = std::max(solve_res[i], st.residual);
        atom_res[i] = std::max(atom_res[i], st.atom_residual);
      }
      if (i == 0 && L == fine) {
        trace = h.steps;
        trace_states = path.states;
      }
    });
    double ss = 0.0, sa = 0.0, mx = 0.0, sfs = 0.0, sr = 0.0, ar = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      ss += err[i] * err[i];
      sa += std::abs(err[i]);
      mx = std::max(mx, std::abs(err[i]));
      sfs += sf[i] * sf[i];
      sr = std::max(sr, solve_res[i]);
      ar = std::max(ar, atom_res[i]);
    }
    const double Nd = static_cast<double>(std::max<std::size_t>(N, 1));
    const double rms = std::sqrt(ss / Nd), sf_rms = std::sqrt(sfs / Nd);
    rep << L << T / static_cast<double>(L) << rms << sa / Nd << mx << sf_rms << sr << ar;
    rep.end();
    levels_json.push_back({{"n_steps", L}, {"rms_error", rms}, {"sf_rms", sf_rms},
                           {"max_solve_residual", sr}});
  }
  {
    Csv c = out.csv("hedge_report.csv",
                    {"t", "solve_residual", "atom_residual", "cash", "risky_value", "n_atoms"},
                    "per-step hedge of path 0 at the finest level");
    for (std::size_t k = 0; k < trace.size(); ++k) {
      const auto& st = trace[k];
      c << st.t << st.residual << st.atom_residual << st.cash
        << value(st.risky, trace_states[k], sc.s) << st.risky.size();
      c.end();
    }
  }
  bool decreasing = true;
  for (std::size_t l = 1; l < levels_json.size(); ++l)
    decreasing = decreasing && levels_json[l]["rms_error"].get<double>() <=
                                   levels_json[l - 1]["rms_error"].get<double>();
  json summary{{"claim", sc.claim}, {"levels", levels_json}, {"rms_decreasing_in_dt", decreasing}};
  out.json_file("hedge_summary.json", summary, "replication summary");
  return out.finish(summary);
}

// ---------------------------------------------------------------- optimize

namespace {

struct XiSample {
  std::vector<double> xi_T;
  std::vector<double> Z;  // tanh(W^1_T / sqrt(T)) under P
};

XiSample sample_density(const Scenario& sc, const GammaPath& gamma, std::size_t n_paths) {
  const std::size_t K = sc.sim.n_steps;
  const double dt = sc.sim.dt();
  const std::size_t n = sc.n_factors;
  XiSample s;
  s.xi_T.resize(n_paths);
  s.Z.resize(n_paths);
  parallel_paths(n_paths, sc.sim.workers, [&](std::size_t i) {
    const BrownianIncrements dw = draw_increments(sc.sim.seed, i, K, n, dt);
    s.xi_T[i] = girsanov_density_path(gamma, dw, dt).back();
    s.Z[i] = n ? std::tanh(dw.cumulative(0, K) / std::sqrt(sc.sim.horizon)) : 0.0;
  });
  return s;
}

}  // namespace

CommandResult cmd_optimize(const Scenario& sc) {
  Outputs out(sc, "optimize");
  const Utility& u = sc.utility.utility;
  const double v = sc.utility.v;
  SimConfig cfg = sc.sim;
  cfg.record_stride = 1;
  cfg.measure = Measure::P;
  const MildSimulator sim(sc.p0, sc.schedule, cfg);
  const std::size_t K = cfg.n_steps;
  const double dt = cfg.dt();
  const std::size_t n = sc.n_factors;
  const bool deterministic = sc.schedule.is_deterministic();
  if (!deterministic && u.family() != UtilityFamily::Log)
    fail(ErrorKind::UnsupportedUtility,
         "state-dependent coefficients are only supported for log utility", "utility.family");

  json plan{{"utility", u.name()}, {"v", v}, {"maturities", sc.optimizer.maturities}};
  std::vector<double> xi_T, Z;
  std::vector<CurvePath> ledger_paths;
  const std::size_t n_ledger = std::min(sc.optimizer.ledger_paths, cfg.n_paths);
  Calibration cal;
  GammaPath gamma;
  double G = 0.0;
  if (deterministic) {
    gamma = step_gamma(sim);
    G = total_variance(gamma, dt);
    cal = calibrate_lambda(u, LognormalXi{G}, v);
    auto smp = sample_density(sc, gamma, cfg.n_paths);
    xi_T = std::move(smp.xi_T);
    Z = std::move(smp.Z);
  } else {
    cal.lambda_hat = 1.0 / v;
    xi_T.resize(cfg.n_paths);
    Z.resize(cfg.n_paths);
    parallel_paths(cfg.n_paths, cfg.workers, [&](std::size_t i) {
      const CurvePath path = sim.run_path(i);
      xi_T[i] = path.xi.back();
      Z[i] = n ? std::tanh(path.dw.cumulative(0, K) / std::sqrt(cfg.horizon)) : 0.0;
    });
  }
  plan["lambda_hat"] = cal.lambda_hat;
  plan["budget_error"] = cal.budget_error;
  plan["sign_flag"] = cal.sign_flag;
  plan["integrated_gamma2"] = G;

  // closed form against the empirical law of xi_T
  {
    Csv c = out.csv("comparison.csv", {"quantity", "closed_form", "sample", "sample_se"},
                    "closed-form calibration against the Monte Carlo law of xi_T");
    const MeanSE xm = mean_se(xi_T);
    c << std::string("E_xi_T") << 1.0 << xm.mean << xm.se;
    c.end();
    Calibration cs;
    bool sample_ok = true;
    try {
      cs = calibrate_lambda(u, SampleXi{xi_T}, v);
    } catch (const Error&) {
      sample_ok = false;
    }
    c << std::string("lambda_hat") << cal.lambda_hat << (sample_ok ? cs.lambda_hat : NAN) << 0.0;
    c.end();
    std::vector<double> budget_terms(xi_T.size());
    for (std::size_t i = 0; i < xi_T.size(); ++i)
      budget_terms[i] = xi_T[i] * u.inverse_marginal(cal.lambda_hat * xi_T[i]);
    const MeanSE bm = mean_se(budget_terms);
    c << std::string("budget") << v << bm.mean << bm.se;
    c.end();
  }

  const WealthSample ws = optimal_terminal_wealth(cal.lambda_hat, xi_T, u);
  plan["expected_utility"] = ws.expected_utility;
  plan["expected_utility_se"] = ws.se;

  // perturbed competitors
  {
    Csv c = out.csv("competitors.csv",
                    {"epsilon", "mean_U", "se_U", "mean_gap", "se_gap", "concavity_violations",
                     "dominated"},
                    "feasible perturbations X_hat (1 + eps h); gap = U(X_hat) - U(X)");
    const double e = sc.optimizer.epsilon;
    const std::vector<double> all_eps{e, -e, 2 * e, -2 * e, 3 * e, -3 * e, 4 * e, -4 * e};
    json comp = json::array();
    for (std::size_t q = 0; q < std::min(sc.optimizer.competitors, all_eps.size()); ++q) {
      const auto X = feasible_competitor(ws.X, xi_T, Z, all_eps[q]);
      std::vector<double> uu(X.size()), gap(X.size());
      std::size_t violations = 0;
      bool feasible = true;
      for (std::size_t i = 0; i < X.size(); ++i) {
        if (!u.in_domain(X[i])) {
          feasible = false;
          break;
        }
        uu[i] = u.U(X[i]);
        const double uh = u.U(ws.X[i]);
        gap[i] = uh - uu[i];
        const double tangent = uh + cal.lambda_hat * xi_T[i] * (X[i] - ws.X[i]);
        if (uu[i] > tangent + 1e-12 * std::max({1.0, std::abs(uh), std::abs(tangent)}))
          ++violations;
      }
      if (!feasible) {
        c << all_eps[q] << NAN << NAN << NAN << NAN << std::size_t{0} << std::string("infeasible");
        c.end();
        continue;
      }
      const MeanSE mu = mean_se(uu), mg = mean_se(gap);
      const bool dominated = mg.mean >= -3.0 * mg.se;
      c << all_eps[q] << mu.mean << mu.se << mg.mean << mg.se << violations
        << std::string(dominated ? "1" : "0");
      c.end();
      comp.push_back({{"epsilon", all_eps[q]}, {"gap", mg.mean}, {"se", mg.se},
                      {"violations", violations}, {"dominated", dominated}});
    }
    plan["competitors"] = comp;
  }

  // ledgers along full curve paths
  std::vector<double> times(K + 1);
  for (std::size_t k = 0; k <= K; ++k) times[k] = cfg.horizon * static_cast<double>(k) / static_cast<double>(K);
  std::vector<CurvePath> paths(n_ledger);
  parallel_paths(n_ledger, cfg.workers, [&](std::size_t i) { paths[i] = sim.run_path(i); });

  ConditionCPortfolio theta0;
  std::vector<OptimalPath> plans(n_ledger);
  if (deterministic) {
    theta0 = condition_C_portfolio(sc.schedule, sc.p0, times, sc.optimizer.maturities);
    for (std::size_t i = 0; i < n_ledger; ++i)
      plans[i] = optimal_strategy_deterministic(u, cal.lambda_hat, gamma, theta0, paths[i], sc.p0, sc.s);
  } else {
    for (std::size_t i = 0; i < n_ledger; ++i) {
      auto lp = optimal_strategy_log_stochastic(paths[i], sc.p0, v, sc.optimizer.maturities, sc.s);
      if (i == 0) theta0 = lp.theta0;
      plans[i] = std::move(lp.path);
    }
  }
  json sf = json::array();
  {
    Csv c = out.csv("ledger.csv", {"path", "t", "V", "G", "Y", "sf_residual", "xi"},
                    "wealth V, gains G and conditional value Y of the optimal strategy");
    for (std::size_t i = 0; i < n_ledger; ++i) {
      const auto& pl = plans[i];
      const SelfFinancingCheck chk = certify_self_financing(pl.strategy, paths[i], sc.s);
      double vy = 0.0;
      for (std::size_t k = 0; k <= K; ++k) {
        c << i << times[k] << pl.ledger.V[k] << pl.ledger.G[k] << pl.Y[k]
          << pl.ledger.V[k] - pl.ledger.V[0] - pl.ledger.G[k] << paths[i].xi[k];
        c.end();
        vy = std::max(vy, std::abs(pl.ledger.V[k] - pl.Y[k]));
      }
      sf.push_back({{"path", i}, {"residual", chk.residual}, {"tolerance", chk.tolerance},
                    {"passed", chk.passed}, {"max_abs_V_minus_Y", vy}});
    }
  }
  plan["self_financing"] = sf;
  {
    Csv c = out.csv("coefficients.csv",
                    concat(concat(concat({"t"}, indexed("gamma_", n)), indexed("theta0_w_", n)),
                           {"condition_number"}),
                    "market price of risk and condition (C) weights on path 0");
    for (std::size_t k = 0; k < theta0.weights.size(); ++k) {
      c << times[k];
      const std::size_t kk = std::min(k, K - 1);
      const auto& g = deterministic ? gamma[kk] : paths[0].coefficients[kk]->gamma.gamma;
      for (double x : g) c << x;
      for (double w : theta0.weights[k]) c << w;
      c << theta0.condition_numbers[k];
      c.end();
    }
  }

  // mutual fund across the fund families on path 0
  if (deterministic && n_ledger > 0) {
    std::vector<OptimalPath> fam;
    json names = json::array();
    for (const Utility& f : sc.optimizer.fund_families) {
      const double vf = f.lower_bound() < v ? v : f.lower_bound() + 1.0;
      const Calibration cf = calibrate_lambda(f, LognormalXi{G}, vf);
      fam.push_back(optimal_strategy_deterministic(f, cf.lambda_hat, gamma, theta0, paths[0], sc.p0, sc.s));
      names.push_back(f.name());
    }
    Csv c = out.csv("mutual_fund.csv", {"t", "family", "cash", "fund_units", "rank_ratio"},
                    "theta_hat = c delta_0 + d Theta with Theta the first family's risky part");
    double worst = 0.0;
    json decomposition = json::object();
    for (std::size_t k = 0; k <= K && !fam.empty(); ++k) {
      std::vector<Atoms> at;
      for (const auto& f : fam) at.push_back(f.strategy.schedule[k]);
      worst = std::max(worst, risky_rank_ratio(at));
    }
    for (std::size_t f = 0; f < fam.size(); ++f) {
      try {
        const MutualFundReport mf = mutual_fund_decompose(fam[f].strategy, fam[0].strategy);
        for (std::size_t k = 0; k <= K; ++k) {
          std::vector<Atoms> at;
          for (const auto& g : fam) at.push_back(g.strategy.schedule[k]);
          c << times[k] << names[f].get<std::string>() << mf.c[k] << mf.d[k] << risky_rank_ratio(at);
          c.end();
        }
        decomposition[names[f].get<std::string>()] = mf.max_residual;
      } catch (const Error& e) {
        decomposition[names[f].get<std::string>()] = e.what();
      }
    }
    plan["mutual_fund"] = {{"families", names}, {"max_rank_ratio", worst},
                           {"decomposition_residual", decomposition}};
  }
  out.json_file("plan.json", plan, "calibration, competitors, ledgers and mutual fund summary");
  return out.finish(plan);
}

// ---------------------------------------------------------------- hjb

CommandResult cmd_hjb(const Scenario& sc) {
  Outputs out(sc, "hjb");
  require_deterministic(sc, "hjb");
  const Utility& u = sc.utility.utility;
  const double T = sc.sim.horizon;
  const auto gamma_at = sc.gamma_at;
  const GammaSquared g2 = [gamma_at](double t) { return norm2(gamma_at(t)); };
  // int_t^T ||gamma||^2 by Simpson; exact for the linear-in-t schedules used here
  auto remaining = [&](double t) {
    const int m = 64;
    const double h = (T - t) / m;
    double s = g2(t) + g2(T);
    for (int i = 1; i < m; ++i) s += (i % 2 ? 4.0 : 2.0) * g2(t + h * i);
    return s * h / 3.0;
  };
  const ValueGrid vg = solve_reduced_hjb(u, g2, T, sc.hjb.grid);
  const std::size_t n = sc.n_factors;
  const std::size_t layers = vg.t.size();
  const std::size_t every = std::max<std::size_t>(1, (layers - 1) / 50);
  double closed_form_err = 0.0;
  const bool is_log = u.family() == UtilityFamily::Log;
  {
    Csv c = out.csv("value_grid.csv", concat({"t", "w", "F"}, indexed("x_hat_", n)),
                    "value function F(t, w) and feedback control -gamma F_w / F_ww");
    for (std::size_t l = 0; l < layers; ++l) {
      const bool write = l % every == 0 || l + 1 == layers;
      const auto fw = vg.F_w(l);
      const auto fww = vg.F_ww(l);
      const auto g = gamma_at(vg.t[l]);
      const double rem = is_log ? remaining(vg.t[l]) : 0.0;
      for (std::size_t j = 0; j < vg.w.size(); ++j) {
        if (is_log)
          closed_form_err = std::max(closed_form_err,
                                     std::abs(vg.F[l][j] - (std::log(vg.w[j]) + 0.5 * rem)));
        if (!write) continue;
        c << vg.t[l] << vg.w[j] << vg.F[l][j];
        for (std::size_t i = 0; i < n; ++i)
          c << (std::abs(fww[j]) >= vg.eps_conv ? -g[i] * fw[j] / fww[j] : NAN);
        c.end();
      }
    }
  }

  // duality cross-validation along optimal-wealth trajectories
  SimConfig cfg = sc.sim;
  const MildSimulator sim(sc.p0, sc.schedule, cfg);
  const GammaPath gamma = step_gamma(sim);
  const std::size_t K = cfg.n_steps;
  const double dt = cfg.dt();
  const Calibration cal = calibrate_lambda(u, LognormalXi{remaining(0.0)}, sc.utility.v);
  double max_err = 0.0;
  std::size_t skipped = 0, compared = 0;
  {
    Csv c = out.csv("cross_validation.csv",
                    concat(concat(concat({"path", "t", "w"}, indexed("x_grid_", n)),
                                  indexed("x_dual_", n)),
                           {"abs_error"}),
                    "grid control against the duality control y_t gamma_t at wealth Y_t");
    for (std::size_t p = 0; p < sc.hjb.trajectories; ++p) {
      const BrownianIncrements dw = draw_increments(cfg.seed, p, K, n, dt);
      const auto xi = girsanov_density_path(gamma, dw, dt);
      for (std::size_t k = 0; k < K; ++k) {
        const double t = T * static_cast<double>(k) / static_cast<double>(K);
        const auto ker = conditional_kernel(u, cal.lambda_hat, xi[k], remaining(t));
        const auto g = gamma_at(t);
        if (!vg.contains(t, ker.Y)) {
          ++skipped;
          continue;
        }
        const auto xg = optimal_control_from_F(vg, g, t, ker.Y);
        double e = 0.0;
        c << p << t << ker.Y;
        for (double x : xg) c << x;
        for (std::size_t i = 0; i < n; ++i) {
          c << ker.y * g[i];
          e = std::max(e, std::abs(xg[i] - ker.y * g[i]));
        }
        c << e;
        c.end();
        max_err = std::max(max_err, e);
        ++compared;
      }
    }
  }

  json summary{{"utility", u.name()},
               {"clamps", vg.clamps},
               {"substeps", vg.substeps},
               {"layers", layers},
               {"max_control_error", max_err},
               {"compared_points", compared},
               {"skipped_outside_grid", skipped}};
  if (is_log) summary["max_closed_form_error"] = closed_form_err;
  if (vg.contains(0.0, sc.utility.v)) {
    std::vector<double> xi_T(cfg.n_paths);
    parallel_paths(cfg.n_paths, cfg.workers, [&](std::size_t i) {
      xi_T[i] = girsanov_density_path(gamma, draw_increments(cfg.seed, i, K, n, dt), dt).back();
    });
    const WealthSample ws = optimal_terminal_wealth(cal.lambda_hat, xi_T, u);
    const double F0 = vg.value(0.0, sc.utility.v);
    summary["dynamic_programming"] = {{"F_0_v", F0},
                                      {"expected_utility", ws.expected_utility},
                                      {"se", ws.se},
                                      {"within_3se", std::abs(F0 - ws.expected_utility) <= 3.0 * ws.se + 1e-3}};
  }
  out.json_file("hjb_summary.json", summary, "grid diagnostics and duality cross-validation");
  return out.finish(summary);
}

// ---------------------------------------------------------------- report

CommandResult cmd_report(const Scenario& sc) {
  Outputs out(sc, "report");
  json report = json::object();
  std::optional<Error> first;
  for (const char* verb : {"simulate", "hedge", "optimize", "hjb"}) {
    Scenario sub = sc;
    sub.output_dir = sc.output_dir / verb;
    try {
      report[verb] = run_command(verb, sub).summary;
    } catch (const Error& e) {
      report[verb] = error_payload(e);
      if (!first) first = e;
    }
  }
  out.json_file("report.json", report, "summaries of every command, one subdirectory each");
  CommandResult r = out.finish(report);
  if (first) throw *first;
  return r;
}

CommandResult run_command(const std::string& verb, const Scenario& sc) {
  if (verb == "simulate") return cmd_simulate(sc);
  if (verb == "hedge") return cmd_hedge(sc);
  if (verb == "optimize") return cmd_optimize(sc);
  if (verb == "hjb") return cmd_hjb(sc);
  if (verb == "report") return cmd_report(sc);
  fail(ErrorKind::ConfigInvalid, "unknown command '" + verb + "'", "command");
}

json error_payload(const std::exception& e) {
  if (const auto* be = dynamic_cast<const Error*>(&e))
    return json{{"error", std::string(to_string(be->kind()))},
                {"category", is_validation(be->kind()) ? "validation" : "numerical"},
                {"message", be->what()},
                {"field", be->field()}};
  if (dynamic_cast<const json::exception*>(&e))
    return json{{"error", "ConfigInvalid"}, {"category", "validation"}, {"message", e.what()},
                {"field", ""}};
  return json{{"error", "Internal"}, {"category", "numerical"}, {"message", e.what()}, {"field", ""}};
}

int exit_code_for(const std::exception& e) {
  if (const auto* be = dynamic_cast<const Error*>(&e)) return is_validation(be->kind()) ? 2 : 3;
  if (dynamic_cast<const json::exception*>(&e)) return 2;
  return 3;
}

}  // namespace bondlab
