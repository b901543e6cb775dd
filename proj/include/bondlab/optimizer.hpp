#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <variant>
#include <vector>

#include "bondlab/curve_space.hpp"
#include "bondlab/dynamics.hpp"
#include "bondlab/market_model.hpp"
#include "bondlab/portfolio.hpp"
#include "bondlab/utility.hpp"

namespace bondlab {

/// P-law of xi_T for deterministic gamma: ln xi_T ~ N(-G/2, G), G = int ||gamma||^2.
struct LognormalXi {
  double total_variance = 0.0;
};

/// Monte Carlo sample of xi_T.
struct SampleXi {
  std::span<const double> xi;
};

using XiLaw = std::variant<LognormalXi, SampleXi>;

/// phi(lambda) = E_P[xi_T I(lambda xi_T)].
double budget(const Utility& u, const XiLaw& law, double lambda);

struct Calibration {
  double lambda_hat = 0.0;
  double budget_error = 0.0;
  std::size_t evaluations = 0;
  /// Quadratic utility with v >= mu gives lambda <= 0, outside the usual range.
  bool sign_flag = false;
};

/// Solves phi(lambda) = v. Log and quadratic budgets are inverted exactly (phi = 1/lambda
/// and phi affine); the other families bisect on ln lambda with a geometric bracket.
Calibration calibrate_lambda(const Utility& u, const XiLaw& law, double v,
                             double rel_tol = 1e-10);

struct WealthSample {
  std::vector<double> X;
  double expected_utility = 0.0;
  double se = 0.0;
};

WealthSample optimal_terminal_wealth(double lambda_hat, std::span<const double> xi_T,
                                     const Utility& u);

/// X = X_hat (1 + eps h) with h = Z - E[xi X_hat Z]/E[xi X_hat] on the sample, so that
/// E[xi X] = E[xi X_hat] holds exactly in sample.
std::vector<double> feasible_competitor(std::span<const double> X_hat,
                                        std::span<const double> xi_T,
                                        std::span<const double> Z, double eps);

/// theta^0_t = sum_j w_j(t) delta_{S_j} with M w = gamma_t, M_ij = p0(t + S_j) sigma^i_t(S_j).
struct ConditionCPortfolio {
  std::vector<double> maturities;
  std::vector<std::vector<double>> weights;  ///< one row per time
  std::vector<double> condition_numbers;
  double max_residual = 0.0;

  Atoms atoms(std::size_t k) const;
  PortfolioStrategy strategy() const;
};

ConditionCPortfolio condition_C_portfolio(std::span<const MarketState* const> states,
                                          const Curve& p0, std::span<const double> times,
                                          std::vector<double> maturities,
                                          double eps_rank = 1e-10);
ConditionCPortfolio condition_C_portfolio(const CoefficientSchedule& schedule, const Curve& p0,
                                          std::span<const double> times,
                                          std::vector<double> maturities,
                                          double eps_rank = 1e-10);

/// Equally spaced maturities in [lo, hi], n of them.
std::vector<double> default_maturities(std::size_t n, double lo, double hi);

struct OptimalPath {
  PortfolioStrategy strategy;
  LedgerPath ledger;
  std::vector<double> y;  ///< risky multiplier
  std::vector<double> x;  ///< cash units
  std::vector<double> Y;  ///< E_Q[X_hat | F_t]
};

/// theta_hat_t = x_t delta_0 + y_t (L_t p0 / p_t) theta^0_t for deterministic coefficients.
OptimalPath optimal_strategy_deterministic(const Utility& u, double lambda_hat,
                                           const GammaPath& gamma,
                                           const ConditionCPortfolio& theta0,
                                           const CurvePath& path, const Curve& p0,
                                           SobolevIndex s);

struct MutualFundReport {
  std::vector<double> c;
  std::vector<double> d;
  double max_residual = 0.0;
};

/// theta_hat_t = c_t delta_0 + d_t Theta_t, atomwise least squares.
MutualFundReport mutual_fund_decompose(const PortfolioStrategy& theta_hat,
                                       const PortfolioStrategy& reference,
                                       double tol = 1e-8);

/// Risky (non-cash Dirac) weights keyed by maturity, merged over equal locations.
std::vector<std::pair<double, double>> risky_weights(const Atoms& theta);

/// sigma_2 / sigma_1 of the matrix whose rows are the risky weights of each portfolio.
double risky_rank_ratio(std::span<const Atoms> portfolios);

struct LogStochasticPlan {
  OptimalPath path;
  ConditionCPortfolio theta0;
};

/// Log utility with path-dependent coefficients: theta^0 solved per step along the path,
/// y_t = Y_t = v / xi_t.
LogStochasticPlan optimal_strategy_log_stochastic(const CurvePath& path, const Curve& p0,
                                                  double v, std::vector<double> maturities,
                                                  SobolevIndex s, double eps_rank = 1e-10);

/// Investment ratio theta_bar(S) p_t(S) / V_t(theta_hat) for each atom, written as
/// (theta_hat weight / theta^0 weight) p_t(S) / Y_t.
std::vector<double> log_ratio_law(const OptimalPath& plan, const ConditionCPortfolio& theta0,
                                  const CurvePath& path, std::size_t k);

}  // namespace bondlab
