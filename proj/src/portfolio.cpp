#include "bondlab/portfolio.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "bondlab/error.hpp"

namespace bondlab {

void PathPrefix::require(std::size_t j, bool strict) const {
  if (strict ? j >= k_ : j > k_)
    fail(ErrorKind::AdaptednessViolation,
         "strategy at step " + std::to_string(k_) + " read data from step " + std::to_string(j));
}

double PathPrefix::time(std::size_t j) const {
  require(j, false);
  return path_->times[j];
}

const Curve& PathPrefix::state(std::size_t j) const {
  require(j, false);
  return path_->state(j);
}

const MarketState& PathPrefix::coefficients(std::size_t j) const {
  require(j, false);
  if (j >= path_->coefficients.size())
    fail(ErrorKind::ConfigInvalid, "no coefficients after the last step");
  return *path_->coefficients[j];
}

double PathPrefix::xi(std::size_t j) const {
  require(j, false);
  return path_->xi[j];
}

double PathPrefix::dw(std::size_t j, std::size_t i) const {
  require(j, true);
  return path_->dw(j, i);
}

double PathPrefix::dw_q(std::size_t j, std::size_t i) const {
  require(j, true);
  return path_->dw_q(j, i);
}

PortfolioStrategy build_strategy(const CurvePath& path, const StrategyRule& rule) {
  PortfolioStrategy s;
  s.schedule.reserve(path.steps() + 1);
  for (std::size_t k = 0; k <= path.steps(); ++k) s.schedule.push_back(rule(PathPrefix(path, k)));
  return s;
}

Atoms cash(double weight) { return {DualAtom{0.0, weight, AtomOrder::Dirac}}; }

Atoms zero_coupon(double maturity_date, double t, double weight) {
  if (maturity_date < t) fail(ErrorKind::ConfigInvalid, "zero-coupon already matured");
  return {DualAtom{maturity_date - t, weight, AtomOrder::Dirac}};
}

Atoms rollover(double S, double units) { return {DualAtom{S, units, AtomOrder::Dirac}}; }

Atoms derivative_atom(double x, double weight) {
  return {DualAtom{x, weight, AtomOrder::Derivative}};
}

Atoms scaled(const Atoms& theta, double c) {
  Atoms out = theta;
  for (auto& a : out) a.weight *= c;
  return out;
}

Atoms combined(const Atoms& a, const Atoms& b) {
  Atoms out = a;
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

double value(const Atoms& theta, const Curve& p, SobolevIndex s) { return pair(theta, p, s); }

namespace {

void require_matching(const PortfolioStrategy& strategy, const CurvePath& path) {
  if (strategy.schedule.size() != path.steps() + 1)
    fail(ErrorKind::ConfigInvalid, "strategy length does not match the path");
  if (path.stride != 1) fail(ErrorKind::ConfigInvalid, "gains need every state recorded");
}

// <theta_j, p_j m_j> and <theta_j, p_j sigma^i_j>
struct StepPairings {
  double drift = 0.0;
  std::vector<double> vol;
};

StepPairings step_pairings(const Atoms& theta, const Curve& p, const MarketState& st,
                           SobolevIndex s) {
  StepPairings out;
  out.drift = pair_product(theta, p, st.drift.curve(), s);
  out.vol.resize(st.sigma.size());
  for (std::size_t i = 0; i < st.sigma.size(); ++i)
    out.vol[i] = pair_product(theta, p, st.sigma[i], s);
  return out;
}

}  // namespace

std::vector<double> gains(const PortfolioStrategy& strategy, const CurvePath& path,
                          SobolevIndex s) {
  require_matching(strategy, path);
  const double dt = path.dt();
  std::vector<double> G(path.steps() + 1, 0.0);
  for (std::size_t j = 0; j < path.steps(); ++j) {
    const auto pr = step_pairings(strategy.schedule[j], path.state(j), *path.coefficients[j], s);
    double inc = pr.drift * dt;
    for (std::size_t i = 0; i < pr.vol.size(); ++i) inc += pr.vol[i] * path.dw(j, i);
    G[j + 1] = G[j] + inc;
  }
  return G;
}

LedgerPath ledger(const PortfolioStrategy& strategy, const CurvePath& path, SobolevIndex s) {
  LedgerPath l;
  l.G = gains(strategy, path, s);
  l.V.resize(path.steps() + 1);
  for (std::size_t k = 0; k <= path.steps(); ++k)
    l.V[k] = value(strategy.schedule[k], path.state(k), s);
  return l;
}

double self_financing_residual(const PortfolioStrategy& strategy, const CurvePath& path,
                               SobolevIndex s) {
  const LedgerPath l = ledger(strategy, path, s);
  double worst = 0.0;
  for (std::size_t k = 0; k < l.V.size(); ++k)
    worst = std::max(worst, std::abs(l.V[k] - l.V[0] - l.G[k]));
  return worst;
}

SelfFinancingCheck certify_self_financing(const PortfolioStrategy& strategy,
                                          const CurvePath& path, SobolevIndex s) {
  require_matching(strategy, path);
  const LedgerPath l = ledger(strategy, path, s);
  SelfFinancingCheck c;
  double v_star = 0.0;
  for (std::size_t k = 0; k < l.V.size(); ++k) {
    v_star = std::max(v_star, std::abs(l.V[k]));
    c.residual = std::max(c.residual, std::abs(l.V[k] - l.V[0] - l.G[k]));
  }
  double max_r = 0.0, max_m = 0.0, max_vol2 = 0.0;
  for (std::size_t j = 0; j < path.steps(); ++j) {
    const Curve& p = path.state(j);
    max_r = std::max(max_r, std::abs(spot_rate(p)));
    const auto& st = *path.coefficients[j];
    for (double v : st.drift.curve().g()) max_m = std::max(max_m, std::abs(v + st.drift.curve().a()));
    const auto pr = step_pairings(strategy.schedule[j], p, st, s);
    double v2 = 0.0;
    for (double v : pr.vol) v2 += v * v;
    max_vol2 = std::max(max_vol2, v2);
  }
  const double dt = path.dt();
  const double v_ref = std::max(v_star, 1e-300);
  c.scale = v_star * (max_r + max_m) + std::sqrt(path.horizon() / dt) * max_vol2 / v_ref;
  c.tolerance = 10.0 * dt * c.scale + 1e-10 * std::max(1.0, v_star);
  c.passed = c.residual <= c.tolerance;
  return c;
}

double admissibility_integrand(const PortfolioStrategy& strategy, const CurvePath& path,
                               SobolevIndex s) {
  require_matching(strategy, path);
  const double dt = path.dt();
  double drift = 0.0, vol = 0.0;
  for (std::size_t j = 0; j < path.steps(); ++j) {
    const auto pr = step_pairings(strategy.schedule[j], path.state(j), *path.coefficients[j], s);
    drift += std::abs(pr.drift) * dt;
    for (double v : pr.vol) vol += v * v * dt;
  }
  return drift * drift + vol;
}

double admissibility_norm(std::span<const PortfolioStrategy> strategies,
                          std::span<const CurvePath> paths, SobolevIndex s) {
  if (strategies.size() != paths.size())
    fail(ErrorKind::ConfigInvalid, "one strategy per path is required");
  if (paths.size() < 100)
    fail(ErrorKind::ConfigInvalid, "admissibility estimate needs at least 100 paths");
  double total = 0.0;
  for (std::size_t p = 0; p < paths.size(); ++p)
    total += admissibility_integrand(strategies[p], paths[p], s);
  return std::sqrt(total / static_cast<double>(paths.size()));
}

}  // namespace bondlab
