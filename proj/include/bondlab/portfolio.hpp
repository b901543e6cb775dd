#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "bondlab/curve_space.hpp"
#include "bondlab/dynamics.hpp"

namespace bondlab {

/// Read-only view of a path up to step k. Anything later throws AdaptednessViolation.
class PathPrefix {
 public:
  PathPrefix(const CurvePath& path, std::size_t k) : path_(&path), k_(k) {}

  std::size_t step() const noexcept { return k_; }
  double time() const noexcept { return path_->times[k_]; }
  double time(std::size_t j) const;
  double dt() const noexcept { return path_->dt(); }
  const Curve& state() const { return path_->state(k_); }
  const Curve& state(std::size_t j) const;
  const MarketState& coefficients(std::size_t j) const;
  const MarketState& coefficients() const { return coefficients(k_); }
  double xi() const noexcept { return path_->xi[k_]; }
  double xi(std::size_t j) const;
  /// Increment over [t_j, t_{j+1}]; available for j < k only.
  double dw(std::size_t j, std::size_t i) const;
  double dw_q(std::size_t j, std::size_t i) const;

 private:
  void require(std::size_t j, bool strict) const;
  const CurvePath* path_;
  std::size_t k_;
};

/// Portfolio theta_{t_k} for k = 0..K.
struct PortfolioStrategy {
  std::vector<Atoms> schedule;
};

using StrategyRule = std::function<Atoms(const PathPrefix&)>;

PortfolioStrategy build_strategy(const CurvePath& path, const StrategyRule& rule);

// ---- primitives ----
Atoms cash(double weight);
/// Zero-coupon with fixed maturity date `maturity_date`, seen at time t.
Atoms zero_coupon(double maturity_date, double t, double weight = 1.0);
Atoms rollover(double S, double units);
Atoms derivative_atom(double x, double weight);
Atoms scaled(const Atoms& theta, double c);
Atoms combined(const Atoms& a, const Atoms& b);

double value(const Atoms& theta, const Curve& p, SobolevIndex s);

struct LedgerPath {
  std::vector<double> V;
  std::vector<double> G;
};

/// G_{t_k} = sum_{j<k} <theta_j, p_j m_j> dt + sum_i <theta_j, p_j sigma^i_j> dW^i_j.
std::vector<double> gains(const PortfolioStrategy& strategy, const CurvePath& path,
                          SobolevIndex s);
LedgerPath ledger(const PortfolioStrategy& strategy, const CurvePath& path, SobolevIndex s);
double self_financing_residual(const PortfolioStrategy& strategy, const CurvePath& path,
                               SobolevIndex s);

struct SelfFinancingCheck {
  double residual = 0.0;
  double tolerance = 0.0;
  double scale = 0.0;  ///< scenario scale constant C in tol = 10 dt C + 1e-10 max(1, V*)
  bool passed = false;
};

/// Certifies self-financing with tol_sf = 10 dt C + 1e-10 max(1, V*), where
/// V* = max |V|, C = V* (max|r| + max|m|) + sqrt(T/dt) max_k sum_i <theta_k, p_k sigma^i_k>^2 / V*.
SelfFinancingCheck certify_self_financing(const PortfolioStrategy& strategy,
                                          const CurvePath& path, SobolevIndex s);

/// sqrt of the Monte Carlo mean of (int |<theta,pm>| dt)^2 + int sum_i <theta,p sigma^i>^2 dt.
double admissibility_norm(std::span<const PortfolioStrategy> strategies,
                          std::span<const CurvePath> paths, SobolevIndex s);

/// Per-path integrand of admissibility_norm.
double admissibility_integrand(const PortfolioStrategy& strategy, const CurvePath& path,
                               SobolevIndex s);

}  // namespace bondlab
