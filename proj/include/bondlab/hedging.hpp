#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "bondlab/curve_space.hpp"
#include "bondlab/dynamics.hpp"
#include "bondlab/market_model.hpp"
#include "bondlab/portfolio.hpp"
#include "bondlab/utility.hpp"

namespace bondlab {

/// B^i = (L_t p_0) sigma^i_t and A_ij = (B^i, B^j) in E^s.
struct HedgeOperators {
  double t = 0.0;
  std::vector<Curve> B;
  Eigen::MatrixXd A;
};

HedgeOperators gram_operators_at(const VolatilityOperator& sigma, const Curve& p0, double t,
                                 SobolevIndex s);
/// Deterministic schedule sampled at `times`.
std::vector<HedgeOperators> gram_operators(const CoefficientSchedule& schedule, const Curve& p0,
                                           std::span<const double> times, SobolevIndex s);
/// From the coefficients recorded along one path (one entry per step).
std::vector<HedgeOperators> gram_operators(const CurvePath& path, const Curve& p0,
                                           SobolevIndex s);

struct HedgeStep {
  Curve eta;
  std::vector<double> attained;  ///< B* eta, from direct inner products
  double residual = 0.0;         ///< ||B* eta - x||_2
  std::size_t rank = 0;
};

/// eta = B A^+ x on the eigenvalues of A above eps_rank * lambda_max.
/// Throws OutOfRange when the residual exceeds eps_res_rel * ||x||.
HedgeStep solve_hedge_step(const HedgeOperators& ops, std::span<const double> x, SobolevIndex s,
                           double eps_rank = 1e-10, double eps_res_rel = 1e-8);

/// B* g
std::vector<double> adjoint_apply(const HedgeOperators& ops, const Curve& g, SobolevIndex s);

struct AtomBasis {
  std::vector<double> maturities;
};

/// M = 2n+1 equally spaced maturities in [lo, hi].
AtomBasis default_atom_basis(std::size_t n_factors, double lo, double hi);

struct AtomProjection {
  Atoms atoms;
  double residual = 0.0;
};

/// Minimum-norm atom weights w with sum_j w_j p_t(S_j) sigma^i_t(S_j) = target_i.
AtomProjection project_to_atoms(const Curve& p, const VolatilityOperator& sigma,
                                std::span<const double> target, const AtomBasis& basis,
                                SobolevIndex s);

using IntegrandRule = std::function<std::vector<double>(const PathPrefix&)>;
using ConditionalMean = std::function<double(const PathPrefix&)>;

struct HedgeOptions {
  AtomBasis basis;
  double eps_rank = 1e-10;
  double eps_res_rel = 1e-8;
};

struct HedgeStepReport {
  double t = 0.0;
  double residual = 0.0;
  double atom_residual = 0.0;
  double cash = 0.0;
  Atoms risky;
};

struct CompletedHedge {
  PortfolioStrategy strategy;
  std::vector<HedgeStepReport> steps;
};

/// theta_t = a_t delta_0 + theta_bar_t with a_t = (E_Q[X|F_t] - V_t(theta_bar)) / p_t(0).
/// `ops` holds one entry per step k < K; the last portfolio is pure cash.
CompletedHedge complete_hedge(const CurvePath& path, std::span<const HedgeOperators> ops,
                              const IntegrandRule& integrand, const ConditionalMean& mean,
                              const HedgeOptions& options, SobolevIndex s);

/// Claim with a known martingale representation under Q.
struct ClaimModel {
  IntegrandRule integrand;
  ConditionalMean mean;
  std::function<double(const CurvePath&)> payoff;
};

ClaimModel constant_claim(double c);
/// X = p_T(x0); E_Q[X|F_t] = p_t(x0 + T - t).
ClaimModel zero_coupon_claim(double x0, double horizon);
/// X = value at T of `units` S-rollovers started at 0.
ClaimModel rollover_claim(double S, double units);
/// X = sum_i c_i W~^i_T.
ClaimModel brownian_linear_claim(std::vector<double> c);

/// Replication error V_0 + G_T(theta) - X.
double replication_error(const PortfolioStrategy& strategy, const CurvePath& path, double claim,
                         SobolevIndex s);

struct IntegrandPath {
  std::vector<std::vector<double>> x;  ///< one row per step
};

/// x_t = y_t gamma_t with y_t = -E_Q[lambda xi_T I'(lambda xi_T) | F_t] (deterministic gamma).
IntegrandPath clark_ocone_integrand_deterministic(const GammaPath& gamma, const Utility& u,
                                                  double lambda_hat, std::span<const double> xi,
                                                  double dt);

struct WeightedSequenceIndex {
  double s_seq = 0.0;
  /// (1 + i^2)^{s/2} for the 1-based factor index i.
  double weight(std::size_t i) const;
};

struct WeightedConditionReport {
  double sampled_k = 0.0;  ///< max over sampled z of ||z|| / ||A^{1/2} z||_{s}
  double exact_k = 0.0;    ///< 1 / sigma_min(W A^{1/2}), a bound the samples approach
  bool unbounded = false;
  std::size_t samples = 0;
};

WeightedConditionReport weighted_condition_diagnostic(std::span<const Eigen::MatrixXd> As,
                                                      WeightedSequenceIndex index,
                                                      std::size_t n_random = 64,
                                                      std::uint64_t seed = 0);

/// Singular values of B, descending.
std::vector<double> singular_values(const HedgeOperators& ops);

/// Least-squares slope of log(values[k]) against log(k + 1).
double loglog_slope(std::span<const double> values);

}  // namespace bondlab
