#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "bondlab/curve_space.hpp"
#include "bondlab/noise.hpp"

namespace bondlab {

/// Factor loadings sigma^1..sigma^n, each vanishing at maturity 0.
class VolatilityOperator {
 public:
  VolatilityOperator() = default;
  explicit VolatilityOperator(std::vector<Curve> factors);

  std::size_t size() const noexcept { return factors_.size(); }
  const Curve& operator[](std::size_t i) const { return factors_[i]; }
  const std::vector<Curve>& factors() const noexcept { return factors_; }

  /// sum_i gamma_i sigma^i
  Curve apply(std::span<const double> gamma, const MaturityGrid& grid) const;
  double hilbert_schmidt_squared(SobolevIndex s) const;

 private:
  std::vector<Curve> factors_;
};

class DriftCurve {
 public:
  explicit DriftCurve(Curve m);
  const Curve& curve() const noexcept { return m_; }

 private:
  Curve m_;
};

struct MarketPriceOfRisk {
  std::vector<double> gamma;
  double norm_squared() const noexcept;
};

/// Coefficients in force over one time step.
struct MarketState {
  DriftCurve drift;
  VolatilityOperator sigma;
  MarketPriceOfRisk gamma;
};

/// Builds a state with m = sigma gamma.
MarketState state_from_gamma(VolatilityOperator sigma, std::vector<double> gamma,
                             const MaturityGrid& grid);

class CoefficientSchedule {
 public:
  enum class Kind { Deterministic, StateDependent };
  using TimeSampler = std::function<MarketState(double t)>;
  using StateSampler = std::function<MarketState(double t, const Curve& p)>;

  static CoefficientSchedule deterministic(TimeSampler sampler);
  static CoefficientSchedule constant(MarketState state);
  static CoefficientSchedule state_dependent(StateSampler sampler);

  Kind kind() const noexcept { return kind_; }
  bool is_deterministic() const noexcept { return kind_ == Kind::Deterministic; }
  /// Deterministic schedules ignore p.
  MarketState sample(double t, const Curve& p) const;
  MarketState sample(double t) const;

 private:
  Kind kind_ = Kind::Deterministic;
  TimeSampler time_;
  StateSampler state_;
};

// ---- loading families ----

/// c x e^{-b x}
Curve humped_loading(const MaturityGrid& grid, double c, double b);

/// n loadings C (1+i^2)^{-s'/2-1/2} phi_i with phi_i(x) = sin(i pi x / L) e^{-x/2}
/// normalised in E^{s+1}; L is the grid length.
std::vector<Curve> decaying_mode_loadings(const MaturityGrid& grid, std::size_t n, double c,
                                          double s_prime, SobolevIndex s);

// ---- market price of risk ----

struct RiskSolveReport {
  MarketPriceOfRisk gamma;
  double residual = 0.0;
  std::size_t retained_rank = 0;
};

/// Minimum-norm gamma with sigma gamma = m in E^s; Gram eigenvalues at or below
/// eps_rank * lambda_max are dropped. Throws ArbitrageDetected when the residual
/// exceeds eps_res_rel * ||m||.
RiskSolveReport solve_market_price_of_risk(const VolatilityOperator& sigma, const DriftCurve& m,
                                           SobolevIndex s, double eps_rank = 1e-10,
                                           double eps_res_rel = 1e-8);

/// gamma^i at each step, one row per step.
using GammaPath = std::vector<std::vector<double>>;

/// xi_{t_k}, k = 0..K, by left-point sums.
std::vector<double> girsanov_density_path(const GammaPath& gamma, const BrownianIncrements& dw,
                                          double dt);

BrownianIncrements q_brownian_increments(const BrownianIncrements& dw, const GammaPath& gamma,
                                         double dt);
/// Inverse map dW = dW~ - gamma dt.
BrownianIncrements p_brownian_increments(const BrownianIncrements& dw_q, const GammaPath& gamma,
                                         double dt);

struct StrongArbitrageReport {
  double max_integral = 0.0;
  std::vector<double> exp_moments;       ///< a = 1..4, full sample
  std::vector<double> exp_moments_half;  ///< a = 1..4, first half of the sample
  bool warn = false;
};

/// Empirical E[exp(a int ||gamma||^2 dt)] for a = 1..4. WARN when the half-sample and
/// full-sample estimates differ by more than 10%.
StrongArbitrageReport strong_arbitrage_diagnostic(std::span<const GammaPath> paths, double dt);

}  // namespace bondlab
