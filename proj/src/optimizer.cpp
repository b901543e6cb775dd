#include "bondlab/optimizer.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "bondlab/error.hpp"
#include "bondlab/noise.hpp"

namespace bondlab {

double budget(const Utility& u, const XiLaw& law, double lambda) {
  if (const auto* ln = std::get_if<LognormalXi>(&law)) {
    const double G = ln->total_variance;
    switch (u.family()) {
      case UtilityFamily::Log: return 1.0 / lambda;
      case UtilityFamily::Quadratic: return u.mu() - lambda * std::exp(G);
      case UtilityFamily::Exponential: return (-std::log(lambda) - 0.5 * G) / u.mu();
      case UtilityFamily::Power: {
        const double b = 1.0 / (u.mu() - 1.0);
        return std::pow(lambda, b) * std::exp(0.5 * G * b * (1.0 + b));
      }
    }
  }
  const auto xi = std::get<SampleXi>(law).xi;
  double s = 0.0;
  for (double x : xi) s += x * u.inverse_marginal(lambda * x);
  return s / static_cast<double>(xi.size());
}

namespace {

// E[xi_T] and E[xi_T^2]; a sample need not have unit mean.
std::pair<double, double> moments(const XiLaw& law) {
  if (const auto* ln = std::get_if<LognormalXi>(&law)) return {1.0, std::exp(ln->total_variance)};
  const auto xi = std::get<SampleXi>(law).xi;
  double s1 = 0.0, s2 = 0.0;
  for (double x : xi) {
    s1 += x;
    s2 += x * x;
  }
  const double n = static_cast<double>(xi.size());
  return {s1 / n, s2 / n};
}

}  // namespace

Calibration calibrate_lambda(const Utility& u, const XiLaw& law, double v, double rel_tol) {
  if (!(v > u.lower_bound()))
    fail(ErrorKind::BudgetInfeasible, "initial wealth must exceed the utility's lower bound",
         "utility.v");
  if (const auto* smp = std::get_if<SampleXi>(&law); smp && smp->xi.empty())
    fail(ErrorKind::ConfigInvalid, "empty xi sample");
  Calibration c;
  if (u.family() == UtilityFamily::Log) {
    c.lambda_hat = 1.0 / v;
  } else if (u.family() == UtilityFamily::Quadratic) {
    const auto [m1, m2] = moments(law);
    c.lambda_hat = (u.mu() * m1 - v) / m2;
    c.sign_flag = !(c.lambda_hat > 0.0);
  } else {
    auto phi = [&](double ln_lambda) {
      ++c.evaluations;
      return budget(u, law, std::exp(ln_lambda));
    };
    const double guess = std::log(u.marginal(v));
    double lo = guess, hi = guess;
    double f_lo = phi(lo), f_hi = f_lo;
    double step = 1.0;
    int expansions = 0;
    while (f_lo < v) {
      if (++expansions > 200) fail(ErrorKind::BracketFailure, "cannot bracket lambda from below");
      hi = lo;
      f_hi = f_lo;
      lo -= step;
      step *= 2.0;
      const double f = phi(lo);
      if (!(f >= f_hi)) fail(ErrorKind::BracketFailure, "budget is not decreasing in lambda");
      f_lo = f;
    }
    step = 1.0;
    while (f_hi > v) {
      if (++expansions > 200) fail(ErrorKind::BracketFailure, "cannot bracket lambda from above");
      lo = hi;
      f_lo = f_hi;
      hi += step;
      step *= 2.0;
      const double f = phi(hi);
      if (!(f <= f_lo)) fail(ErrorKind::BracketFailure, "budget is not decreasing in lambda");
      f_hi = f;
    }
    // phi(lo) >= v >= phi(hi)
    while (hi - lo > rel_tol) {
      const double mid = 0.5 * (lo + hi);
      const double f = phi(mid);
      if (f > f_lo || f < f_hi) fail(ErrorKind::BracketFailure, "budget is not monotone");
      if (f >= v) {
        lo = mid;
        f_lo = f;
      } else {
        hi = mid;
        f_hi = f;
      }
      if (c.evaluations > 10000) fail(ErrorKind::BracketFailure, "bisection did not converge");
    }
    c.lambda_hat = std::exp(0.5 * (lo + hi));
  }
  c.budget_error = std::abs(budget(u, law, c.lambda_hat) - v);
  return c;
}

WealthSample optimal_terminal_wealth(double lambda_hat, std::span<const double> xi_T,
                                     const Utility& u) {
  WealthSample w;
  w.X.reserve(xi_T.size());
  std::vector<double> util;
  util.reserve(xi_T.size());
  for (double xi : xi_T) {
    w.X.push_back(u.inverse_marginal(lambda_hat * xi));
    util.push_back(u.in_domain(w.X.back()) ? u.U(w.X.back()) : -INFINITY);
  }
  const MeanSE m = mean_se(util);
  w.expected_utility = m.mean;
  w.se = m.se;
  return w;
}

std::vector<double> feasible_competitor(std::span<const double> X_hat,
                                        std::span<const double> xi_T,
                                        std::span<const double> Z, double eps) {
  const std::size_t n = X_hat.size();
  if (xi_T.size() != n || Z.size() != n)
    fail(ErrorKind::ConfigInvalid, "competitor inputs differ in length");
  double num = 0.0, den = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    num += xi_T[j] * X_hat[j] * Z[j];
    den += xi_T[j] * X_hat[j];
  }
  const double shift = num / den;
  std::vector<double> X(n);
  for (std::size_t j = 0; j < n; ++j) X[j] = X_hat[j] * (1.0 + eps * (Z[j] - shift));
  return X;
}

Atoms ConditionCPortfolio::atoms(std::size_t k) const {
  Atoms out;
  for (std::size_t j = 0; j < maturities.size(); ++j)
    out.push_back({maturities[j], weights[k][j], AtomOrder::Dirac});
  return out;
}

PortfolioStrategy ConditionCPortfolio::strategy() const {
  PortfolioStrategy s;
  for (std::size_t k = 0; k < weights.size(); ++k) s.schedule.push_back(atoms(k));
  return s;
}

ConditionCPortfolio condition_C_portfolio(std::span<const MarketState* const> states,
                                          const Curve& p0, std::span<const double> times,
                                          std::vector<double> maturities, double eps_rank) {
  if (states.size() != times.size())
    fail(ErrorKind::ConfigInvalid, "one coefficient set per time is required");
  ConditionCPortfolio out;
  out.maturities = std::move(maturities);
  const auto m = static_cast<Eigen::Index>(out.maturities.size());
  for (std::size_t k = 0; k < times.size(); ++k) {
    const MarketState& st = *states[k];
    const auto n = static_cast<Eigen::Index>(st.sigma.size());
    if (n != m)
      fail(ErrorKind::ConfigInvalid, "condition (C) needs as many maturities as factors",
           "optimizer.maturities");
    Eigen::VectorXd gamma(n);
    for (Eigen::Index i = 0; i < n; ++i) gamma(i) = st.gamma.gamma[static_cast<std::size_t>(i)];
    if (n == 0 || gamma.norm() == 0.0) {
      out.weights.emplace_back(static_cast<std::size_t>(m), 0.0);
      out.condition_numbers.push_back(n == 0 ? 1.0 : 0.0);
      continue;
    }
    Eigen::MatrixXd M(n, m);
    for (Eigen::Index j = 0; j < m; ++j) {
      const double S = out.maturities[static_cast<std::size_t>(j)];
      const double l = p0(times[k] + S);
      for (Eigen::Index i = 0; i < n; ++i) M(i, j) = l * st.sigma[static_cast<std::size_t>(i)](S);
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    const double smax = sv(0), smin = sv(sv.size() - 1);
    if (!(smin > eps_rank * smax))
      fail(ErrorKind::ConditionCFails,
           "condition (C) fails at t = " + std::to_string(times[k]) + ": M is rank deficient");
    out.condition_numbers.push_back(smax / smin);
    const Eigen::VectorXd w = M.partialPivLu().solve(gamma);
    out.max_residual = std::max(out.max_residual, (M * w - gamma).norm());
    out.weights.emplace_back(w.data(), w.data() + w.size());
  }
  return out;
}

ConditionCPortfolio condition_C_portfolio(const CoefficientSchedule& schedule, const Curve& p0,
                                          std::span<const double> times,
                                          std::vector<double> maturities, double eps_rank) {
  std::vector<MarketState> states;
  states.reserve(times.size());
  for (double t : times) states.push_back(schedule.sample(t));
  std::vector<const MarketState*> ptrs;
  for (const auto& s : states) ptrs.push_back(&s);
  return condition_C_portfolio(ptrs, p0, times, std::move(maturities), eps_rank);
}

std::vector<double> default_maturities(std::size_t n, double lo, double hi) {
  std::vector<double> out;
  for (std::size_t j = 0; j < n; ++j)
    out.push_back(n == 1 ? 0.5 * (lo + hi)
                         : lo + (hi - lo) * static_cast<double>(j) / static_cast<double>(n - 1));
  return out;
}

namespace {

OptimalPath assemble(const ConditionCPortfolio& theta0, const CurvePath& path, const Curve& p0,
                     SobolevIndex s, const std::vector<double>& y, const std::vector<double>& Y) {
  const std::size_t K = path.steps();
  if (theta0.weights.size() != K + 1)
    fail(ErrorKind::ConfigInvalid, "theta0 must cover every time of the path");
  OptimalPath out;
  out.y = y;
  out.Y = Y;
  out.x.resize(K + 1);
  out.strategy.schedule.reserve(K + 1);
  for (std::size_t k = 0; k <= K; ++k) {
    const Curve& p = path.state(k);
    const double t = path.times[k];
    Atoms risky;
    double risky_value = 0.0;
    for (std::size_t j = 0; j < theta0.maturities.size(); ++j) {
      const double S = theta0.maturities[j];
      const double pt = p(S);
      if (!(pt > 0.0)) fail(ErrorKind::DegenerateCurve, "bond price is not positive");
      const double w = y[k] * theta0.weights[k][j] * p0(t + S) / pt;
      risky.push_back({S, w, AtomOrder::Dirac});
      risky_value += w * pt;
    }
    const double p_zero = p.at_node(0);
    if (!(p_zero > 0.0)) fail(ErrorKind::DegenerateCurve, "discount factor is not positive");
    out.x[k] = (Y[k] - risky_value) / p_zero;
    out.strategy.schedule.push_back(combined(cash(out.x[k]), risky));
  }
  out.ledger = ledger(out.strategy, path, s);
  return out;
}

}  // namespace

OptimalPath optimal_strategy_deterministic(const Utility& u, double lambda_hat,
                                           const GammaPath& gamma,
                                           const ConditionCPortfolio& theta0,
                                           const CurvePath& path, const Curve& p0,
                                           SobolevIndex s) {
  const std::size_t K = path.steps();
  if (gamma.size() != K) fail(ErrorKind::ConfigInvalid, "gamma schedule length mismatch");
  const double dt = path.dt();
  std::vector<double> remaining(K + 1, 0.0);
  for (std::size_t k = K; k-- > 0;) {
    double g2 = 0.0;
    for (double v : gamma[k]) g2 += v * v;
    remaining[k] = remaining[k + 1] + g2 * dt;
  }
  std::vector<double> y(K + 1), Y(K + 1);
  for (std::size_t k = 0; k <= K; ++k) {
    const auto ker = conditional_kernel(u, lambda_hat, path.xi[k], remaining[k]);
    y[k] = ker.y;
    Y[k] = ker.Y;
  }
  return assemble(theta0, path, p0, s, y, Y);
}

std::vector<std::pair<double, double>> risky_weights(const Atoms& theta) {
  std::map<double, double> merged;
  for (const auto& a : theta) {
    if (a.order != AtomOrder::Dirac || a.location == 0.0) continue;
    merged[a.location] += a.weight;
  }
  return {merged.begin(), merged.end()};
}

namespace {

double cash_weight(const Atoms& theta) {
  double c = 0.0;
  for (const auto& a : theta)
    if (a.order == AtomOrder::Dirac && a.location == 0.0) c += a.weight;
  return c;
}

}  // namespace

MutualFundReport mutual_fund_decompose(const PortfolioStrategy& theta_hat,
                                       const PortfolioStrategy& reference, double tol) {
  if (theta_hat.schedule.size() != reference.schedule.size())
    fail(ErrorKind::ConfigInvalid, "strategies differ in length");
  MutualFundReport r;
  for (std::size_t k = 0; k < theta_hat.schedule.size(); ++k) {
    std::map<double, std::pair<double, double>> joint;
    for (auto [S, w] : risky_weights(theta_hat.schedule[k])) joint[S].first += w;
    for (auto [S, w] : risky_weights(reference.schedule[k])) joint[S].second += w;
    double num = 0.0, den = 0.0, scale = 0.0;
    for (const auto& [S, w] : joint) {
      num += w.first * w.second;
      den += w.second * w.second;
      scale = std::max(scale, std::abs(w.first));
    }
    const double d = den > 0.0 ? num / den : 0.0;
    double worst = 0.0;
    for (const auto& [S, w] : joint) worst = std::max(worst, std::abs(w.first - d * w.second));
    worst /= std::max(1.0, scale);
    r.max_residual = std::max(r.max_residual, worst);
    r.d.push_back(d);
    r.c.push_back(cash_weight(theta_hat.schedule[k]) - d * cash_weight(reference.schedule[k]));
  }
  if (r.max_residual > tol)
    fail(ErrorKind::DecompositionFails,
         "risky parts are not proportional (residual " + std::to_string(r.max_residual) + ")");
  return r;
}

double risky_rank_ratio(std::span<const Atoms> portfolios) {
  std::map<double, std::size_t> column;
  for (const auto& p : portfolios)
    for (auto [S, w] : risky_weights(p)) column.emplace(S, 0);
  std::size_t c = 0;
  for (auto& [S, idx] : column) idx = c++;
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(portfolios.size()),
                                            static_cast<Eigen::Index>(column.size()));
  for (std::size_t r = 0; r < portfolios.size(); ++r)
    for (auto [S, w] : risky_weights(portfolios[r]))
      M(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(column[S])) += w;
  if (M.size() == 0) return 0.0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(M);
  const auto& sv = svd.singularValues();
  if (sv.size() < 2 || sv(0) == 0.0) return 0.0;
  return sv(1) / sv(0);
}

LogStochasticPlan optimal_strategy_log_stochastic(const CurvePath& path, const Curve& p0,
                                                  double v, std::vector<double> maturities,
                                                  SobolevIndex s, double eps_rank) {
  if (!(v > 0.0)) fail(ErrorKind::BudgetInfeasible, "log utility needs v > 0", "utility.v");
  const std::size_t K = path.steps();
  std::vector<const MarketState*> states;
  for (std::size_t k = 0; k <= K; ++k)
    states.push_back(path.coefficients[std::min(k, K - 1)].get());
  LogStochasticPlan plan;
  plan.theta0 = condition_C_portfolio(states, p0, path.times, std::move(maturities), eps_rank);
  std::vector<double> y(K + 1);
  for (std::size_t k = 0; k <= K; ++k) y[k] = v / path.xi[k];
  plan.path = assemble(plan.theta0, path, p0, s, y, y);
  return plan;
}

std::vector<double> log_ratio_law(const OptimalPath& plan, const ConditionCPortfolio& theta0,
                                  const CurvePath& path, std::size_t k) {
  const Curve& p = path.state(k);
  const double V = plan.ledger.V[k];
  std::vector<double> out;
  const auto risky = risky_weights(plan.strategy.schedule[k]);
  for (std::size_t j = 0; j < theta0.maturities.size(); ++j) {
    const double S = theta0.maturities[j];
    const double w0 = theta0.weights[k][j];
    double w_hat = 0.0;
    for (auto [loc, w] : risky)
      if (loc == S) w_hat = w;
    out.push_back(w0 != 0.0 ? (w_hat / w0) * p(S) / V : 0.0);
  }
  return out;
}

}  // namespace bondlab
