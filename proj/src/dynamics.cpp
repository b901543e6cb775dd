#include "bondlab/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "bondlab/error.hpp"

namespace bondlab {

void SimConfig::validate() const {
  if (!(horizon > 0.0) || !std::isfinite(horizon))
    fail(ErrorKind::ConfigInvalid, "horizon must be positive", "simulation.horizon");
  if (n_steps == 0) fail(ErrorKind::ConfigInvalid, "n_steps must be positive", "simulation.n_steps");
  if (record_stride == 0 || n_steps % record_stride != 0)
    fail(ErrorKind::ConfigInvalid, "record stride must divide n_steps", "simulation.record_stride");
  if (max_maturity < 0.0)
    fail(ErrorKind::ConfigInvalid, "max maturity must be non-negative", "simulation.max_maturity");
  if (grid.x_max() < horizon + max_maturity - 1e-12)
    fail(ErrorKind::ConfigInvalid,
         "grid too short: x_max " + std::to_string(grid.x_max()) + " < horizon + max maturity " +
             std::to_string(horizon + max_maturity),
         "grid.x_max");
}

const Curve& CurvePath::state(std::size_t k) const {
  if (!has_state(k))
    fail(ErrorKind::ConfigInvalid, "state at step " + std::to_string(k) + " was not recorded");
  return states[k / stride];
}

GammaPath CurvePath::gamma() const {
  GammaPath g;
  g.reserve(coefficients.size());
  for (const auto& c : coefficients) g.push_back(c->gamma.gamma);
  return g;
}

void validate_initial_curve(const Curve& p0) {
  if (std::abs(p0.at_node(0) - 1.0) > 1e-12)
    fail(ErrorKind::NonPositiveInitialCurve, "initial curve must satisfy p0(0) = 1",
         "initial_curve");
  if (p0.a() < 0.0)
    fail(ErrorKind::NonPositiveInitialCurve, "initial curve constant part is negative",
         "initial_curve");
  for (std::size_t j = 0; j < p0.size(); ++j)
    if (!(p0.at_node(j) > 0.0))
      fail(ErrorKind::NonPositiveInitialCurve,
           "initial curve is not positive at node " + std::to_string(j), "initial_curve");
}

MildSimulator::MildSimulator(Curve p0, CoefficientSchedule schedule, SimConfig config)
    : p0_(std::move(p0)), schedule_(std::move(schedule)), config_(std::move(config)) {
  config_.validate();
  if (!(p0_.grid() == config_.grid))
    fail(ErrorKind::GridMismatch, "initial curve grid differs from the simulation grid");
  validate_initial_curve(p0_);
  const double dt = config_.dt();
  if (schedule_.is_deterministic()) {
    det_states_.reserve(config_.n_steps);
    tables_.reserve(config_.n_steps);
    for (std::size_t k = 0; k < config_.n_steps; ++k) {
      auto st = std::make_shared<const MarketState>(schedule_.sample(static_cast<double>(k) * dt));
      if (k == 0) n_factors_ = st->sigma.size();
      tables_.push_back(make_table(k, *st));
      det_states_.push_back(std::move(st));
    }
  } else {
    n_factors_ = schedule_.sample(0.0, p0_).sigma.size();
  }
}

MildSimulator::StepTable MildSimulator::make_table(std::size_t k, const MarketState& st) const {
  const auto& grid = config_.grid;
  const std::size_t n = st.sigma.size();
  if (n != n_factors_ && !(k == 0 && n_factors_ == 0))
    fail(ErrorKind::ConfigInvalid, "factor count changed along the schedule");
  if (st.gamma.gamma.size() != n)
    fail(ErrorKind::ConfigInvalid, "gamma length does not match the factor count");
  const Curve& m = st.drift.curve();
  if (!(m.grid() == grid)) fail(ErrorKind::GridMismatch, "drift grid differs");
  for (std::size_t i = 0; i < n; ++i)
    if (!(st.sigma[i].grid() == grid)) fail(ErrorKind::GridMismatch, "loading grid differs");

  const double dt = config_.dt();
  const double t = static_cast<double>(k) * dt;
  StepTable tab;
  tab.first = grid.floor_index(t);
  const std::size_t len = grid.size() - tab.first;
  tab.drift.resize(len);
  tab.loading.assign(n, std::vector<double>(len));
  for (std::size_t r = 0; r < len; ++r) {
    const double x = std::max(grid.node(tab.first + r) - t, 0.0);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double s = st.sigma[i](x);
      tab.loading[i][r] = s;
      var += s * s;
    }
    tab.drift[r] = (m(x) - 0.5 * var) * dt;
  }
  double var_inf = 0.0;
  tab.loading_inf.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    tab.loading_inf[i] = st.sigma[i].a();
    var_inf += tab.loading_inf[i] * tab.loading_inf[i];
  }
  tab.drift_inf = (m.a() - 0.5 * var_inf) * dt;
  return tab;
}

Curve MildSimulator::evaluate(double t, std::span<const double> phi, double phi_inf) const {
  const auto& grid = config_.grid;
  const double a = p0_.a() * std::exp(phi_inf);
  std::vector<double> g(grid.size());
  const double x_max = grid.x_max();
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double cal = t + grid.node(i);
    if (cal <= x_max * (1.0 + 1e-12)) {
      g[i] = p0_(cal) * std::exp(interpolate(phi, grid.dx(), cal)) - a;
    } else {
      g[i] = 0.0;
    }
  }
  return Curve(grid, std::move(g), a);
}

CurvePath MildSimulator::run(const BrownianIncrements& noise) const {
  const std::size_t K = config_.n_steps;
  const std::size_t n = n_factors_;
  if (noise.steps() != K || noise.factors() != n)
    fail(ErrorKind::ConfigInvalid, "noise shape does not match steps x factors");
  const double dt = config_.dt();
  const auto& grid = config_.grid;
  const bool deterministic = schedule_.is_deterministic();
  const bool q_driven = config_.measure == Measure::Q;

  CurvePath path;
  path.stride = config_.record_stride;
  path.times.resize(K + 1);
  for (std::size_t k = 0; k <= K; ++k)
    path.times[k] = config_.horizon * static_cast<double>(k) / static_cast<double>(K);
  path.dw = BrownianIncrements(K, n);
  path.dw_q = BrownianIncrements(K, n);
  path.coefficients.reserve(K);
  path.xi.resize(K + 1);
  path.xi[0] = 1.0;
  path.states.reserve(K / path.stride + 1);
  path.states.push_back(p0_);
  path.log_level.push_back(0.0);

  std::vector<double> phi(grid.size(), 0.0);
  double phi_inf = 0.0;
  double log_xi = 0.0;
  Curve current = p0_;
  StepTable local;

  for (std::size_t k = 0; k < K; ++k) {
    std::shared_ptr<const MarketState> st =
        deterministic ? det_states_[k]
                      : std::make_shared<const MarketState>(schedule_.sample(path.times[k], current));
    const auto& gamma = st->gamma.gamma;
    if (gamma.size() != n) fail(ErrorKind::ConfigInvalid, "gamma length changed along the path");
    double g2 = 0.0, gdw = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double dw, dwq;
      if (q_driven) {
        dwq = noise(k, i);
        dw = dwq - gamma[i] * dt;
      } else {
        dw = noise(k, i);
        dwq = dw + gamma[i] * dt;
      }
      path.dw(k, i) = dw;
      path.dw_q(k, i) = dwq;
      g2 += gamma[i] * gamma[i];
      gdw += gamma[i] * dw;
    }
    log_xi += -0.5 * g2 * dt - gdw;
    path.xi[k + 1] = std::exp(log_xi);

    if (!deterministic) local = make_table(k, *st);
    const StepTable& tab = deterministic ? tables_[k] : local;
    const std::size_t len = tab.drift.size();
    double* ph = phi.data() + tab.first;
    for (std::size_t r = 0; r < len; ++r) ph[r] += tab.drift[r];
    phi_inf += tab.drift_inf;
    for (std::size_t i = 0; i < n; ++i) {
      const double w = path.dw(k, i);
      const double* ld = tab.loading[i].data();
      for (std::size_t r = 0; r < len; ++r) ph[r] += ld[r] * w;
      phi_inf += tab.loading_inf[i] * w;
    }
    path.coefficients.push_back(std::move(st));

    const bool record = (k + 1) % path.stride == 0;
    if (record || !deterministic) {
      current = evaluate(path.times[k + 1], phi, phi_inf);
      if (record) {
        path.states.push_back(current);
        path.log_level.push_back(phi_inf);
      }
    }
  }
  return path;
}

BrownianIncrements MildSimulator::draw(std::uint64_t path) const {
  return draw_increments(config_.seed, path, config_.n_steps, n_factors_, config_.dt());
}

CurvePath MildSimulator::run_path(std::uint64_t path) const { return run(draw(path)); }

CurvePath simulate_mild(const Curve& p0, const CoefficientSchedule& schedule,
                        const SimConfig& config, const BrownianIncrements& noise) {
  return MildSimulator(p0, schedule, config).run(noise);
}

double spot_rate(const Curve& p) {
  const double p_zero = p.at_node(0);
  if (!(p_zero > 0.0)) fail(ErrorKind::DegenerateCurve, "curve is not positive at 0");
  return -derivative_at(p.g(), p.grid().dx(), 0.0) / p_zero;
}

double forward_rate(const Curve& p, double x) {
  const double px = p(x);
  if (!(px > 0.0))
    fail(ErrorKind::DegenerateCurve, "curve is not positive at " + std::to_string(x));
  return -derivative_at(p.g(), p.grid().dx(), x) / px;
}

namespace {

void require_all_states(const CurvePath& path, const char* what) {
  if (path.stride != 1)
    fail(ErrorKind::ConfigInvalid, std::string(what) + " needs every state recorded");
}

}  // namespace

double boundary_residual(const CurvePath& path) {
  require_all_states(path, "boundary_residual");
  const double dt = path.dt();
  double integral = 0.0, worst = 0.0;
  for (std::size_t k = 0; k <= path.steps(); ++k) {
    const Curve& p = path.state(k);
    worst = std::max(worst, std::abs(p.at_node(0) - std::exp(-integral)));
    if (k < path.steps()) integral += spot_rate(p) * dt;
  }
  return worst;
}

RolloverPath simulate_rollover(const CurvePath& path, double S) {
  require_all_states(path, "simulate_rollover");
  if (S < 0.0) fail(ErrorKind::ConfigInvalid, "rollover maturity must be non-negative");
  const Curve& p0 = path.state(0);
  if (S + path.horizon() > p0.grid().x_max() + 1e-12)
    fail(ErrorKind::ConfigInvalid, "rollover maturity plus horizon exceeds x_max");
  const double dt = path.dt();
  RolloverPath r;
  r.units.resize(path.steps() + 1);
  r.value.resize(path.steps() + 1);
  double integral = 0.0;
  for (std::size_t k = 0; k <= path.steps(); ++k) {
    const Curve& p = path.state(k);
    r.units[k] = std::exp(integral);
    r.value[k] = r.units[k] * p(S);
    if (k < path.steps()) integral += forward_rate(p, S) * dt;
  }
  return r;
}

std::vector<Curve> undiscount(const CurvePath& path) {
  std::vector<Curve> out;
  out.reserve(path.states.size());
  for (const auto& p : path.states) {
    const double p_zero = p.at_node(0);
    if (!(p_zero > 0.0)) fail(ErrorKind::DegenerateCurve, "discount factor is not positive");
    out.push_back((1.0 / p_zero) * p);
  }
  return out;
}

double min_value(const CurvePath& path, double window) {
  double lo = INFINITY;
  for (const auto& p : path.states) {
    const std::size_t n = p.grid().floor_index(window) + 1;
    for (std::size_t j = 0; j < n; ++j) lo = std::min(lo, p.at_node(j));
  }
  return lo;
}

PathSupNorms path_sup_norms(const CurvePath& path, const Curve& p0, SobolevIndex s,
                            double window, std::size_t every) {
  if (every == 0) fail(ErrorKind::ConfigInvalid, "state stride must be positive");
  PathSupNorms out;
  const auto& grid = p0.grid();
  const std::size_t n = grid.floor_index(window) + 1;
  std::vector<double> gq(grid.size(), 0.0), gqi(grid.size(), 0.0);
  for (std::size_t r = 0; r < path.states.size(); ++r) {
    if (r % every != 0 && r + 1 != path.states.size()) continue;
    const Curve& p = path.states[r];
    const double t = path.times[r * path.stride];
    out.p = std::max(out.p, sobolev_norm(p, s, window));
    const double aq = std::exp(path.log_level[r]);
    for (std::size_t j = 0; j < n; ++j) {
      const double q = p.at_node(j) / p0(t + grid.node(j));
      gq[j] = q - aq;
      gqi[j] = 1.0 / q - 1.0 / aq;
      out.ratio_bound = std::max(out.ratio_bound, std::max(q, 1.0 / q));
    }
    out.q = std::max(out.q, sobolev_norm(Curve(grid, gq, aq), s, window));
    out.q_inv = std::max(out.q_inv, sobolev_norm(Curve(grid, gqi, 1.0 / aq), s, window));
  }
  return out;
}

MomentReport moment_diagnostic(std::span<const PathSupNorms> paths, std::span<const int> us,
                               double stability_tol) {
  if (paths.size() < 100)
    fail(ErrorKind::ConfigInvalid, "moment diagnostic needs at least 100 paths");
  MomentReport r;
  r.n_paths = paths.size();
  const std::size_t half = paths.size() / 2;
  auto moment = [&](auto field, int u, std::size_t count) {
    double s = 0.0;
    for (std::size_t p = 0; p < count; ++p) s += std::pow(field(paths[p]), u);
    return s / static_cast<double>(count);
  };
  auto track = [&](double full, double part) {
    const double rel = std::abs(full - part) / std::max(std::abs(full), 1e-300);
    r.max_relative_change = std::max(r.max_relative_change, rel);
  };
  for (int u : us) {
    r.u.push_back(u);
    auto fp = [](const PathSupNorms& x) { return x.p; };
    auto fq = [](const PathSupNorms& x) { return x.q; };
    auto fqi = [](const PathSupNorms& x) { return x.q_inv; };
    r.p.push_back(moment(fp, u, paths.size()));
    r.q.push_back(moment(fq, u, paths.size()));
    r.q_inv.push_back(moment(fqi, u, paths.size()));
    r.p_half.push_back(moment(fp, u, half));
    r.q_half.push_back(moment(fq, u, half));
    r.q_inv_half.push_back(moment(fqi, u, half));
    track(r.p.back(), r.p_half.back());
    track(r.q.back(), r.q_half.back());
    track(r.q_inv.back(), r.q_inv_half.back());
  }
  for (const auto& p : paths) r.empirical_A = std::max(r.empirical_A, p.ratio_bound);
  r.stable = r.max_relative_change < stability_tol;
  return r;
}

}  // namespace bondlab
