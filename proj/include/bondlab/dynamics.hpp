#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "bondlab/curve_space.hpp"
#include "bondlab/market_model.hpp"
#include "bondlab/noise.hpp"

namespace bondlab {

enum class Measure { P, Q };

struct SimConfig {
  double horizon = 1.0;
  std::size_t n_steps = 256;
  std::size_t n_paths = 1;
  std::uint64_t seed = 0;
  MaturityGrid grid{10.0, 513};
  SobolevIndex s{1};
  /// Sampling measure; under Q the driving noise is W~ and dW = dW~ - gamma dt.
  Measure measure = Measure::P;
  /// Record every stride-th state (stride must divide n_steps).
  std::size_t record_stride = 1;
  /// Largest maturity any portfolio will read; x_max must cover horizon + this.
  double max_maturity = 0.0;
  std::size_t workers = 0;

  double dt() const noexcept { return horizon / static_cast<double>(n_steps); }
  void validate() const;
};

struct CurvePath {
  std::vector<double> times;  ///< t_0..t_K
  std::size_t stride = 1;
  std::vector<Curve> states;  ///< p at t_0, t_stride, ..., t_K
  /// Constant-part log growth at each recorded state (log of q at infinity).
  std::vector<double> log_level;
  BrownianIncrements dw;    ///< increments of W under P
  BrownianIncrements dw_q;  ///< increments of W~ = W + int gamma dt
  std::vector<std::shared_ptr<const MarketState>> coefficients;  ///< one per step
  std::vector<double> xi;   ///< Girsanov density at t_0..t_K

  std::size_t steps() const noexcept { return times.empty() ? 0 : times.size() - 1; }
  double dt() const noexcept { return times.size() < 2 ? 0.0 : times[1] - times[0]; }
  double horizon() const noexcept { return times.empty() ? 0.0 : times.back(); }
  bool has_state(std::size_t k) const noexcept { return k % stride == 0 && k <= steps(); }
  const Curve& state(std::size_t k) const;
  const Curve& final_state() const { return states.back(); }
  std::size_t n_factors() const noexcept { return dw.factors(); }
  GammaPath gamma() const;
};

/// Mild solution of the moving-frame curve equation with coefficients frozen over each
/// step. The exponent is accumulated on fixed calendar maturities T = t + x, so the
/// initial curve is interpolated once per evaluation rather than once per step.
class MildSimulator {
 public:
  MildSimulator(Curve p0, CoefficientSchedule schedule, SimConfig config);

  const SimConfig& config() const noexcept { return config_; }
  const Curve& initial() const noexcept { return p0_; }
  std::size_t n_factors() const noexcept { return n_factors_; }
  const CoefficientSchedule& schedule() const noexcept { return schedule_; }
  /// Per-step coefficients of a deterministic schedule (empty otherwise).
  const std::vector<std::shared_ptr<const MarketState>>& deterministic_states() const noexcept {
    return det_states_;
  }

  /// `noise` holds increments of the sampling-measure Brownian motion.
  CurvePath run(const BrownianIncrements& noise) const;
  CurvePath run_path(std::uint64_t path) const;
  BrownianIncrements draw(std::uint64_t path) const;

 private:
  struct StepTable {
    std::size_t first = 0;               ///< first calendar node touched
    std::vector<double> drift;           ///< (m - 1/2 sum sigma^2) dt per node
    std::vector<std::vector<double>> loading;  ///< sigma^i per node
    double drift_inf = 0.0;
    std::vector<double> loading_inf;
  };
  StepTable make_table(std::size_t k, const MarketState& st) const;
  Curve evaluate(double t, std::span<const double> phi, double phi_inf) const;

  Curve p0_;
  CoefficientSchedule schedule_;
  SimConfig config_;
  std::size_t n_factors_ = 0;
  std::vector<std::shared_ptr<const MarketState>> det_states_;
  std::vector<StepTable> tables_;
};

/// Convenience wrapper around MildSimulator::run.
CurvePath simulate_mild(const Curve& p0, const CoefficientSchedule& schedule,
                        const SimConfig& config, const BrownianIncrements& noise);

/// Rejects initial curves that are not positive or do not start at 1.
void validate_initial_curve(const Curve& p0);

double spot_rate(const Curve& p);
double forward_rate(const Curve& p, double x);

/// max_k |p_{t_k}(0) - exp(-sum_{j<k} r_{t_j} dt)|; needs every state recorded.
double boundary_residual(const CurvePath& path);

struct RolloverPath {
  std::vector<double> units;   ///< x_t
  std::vector<double> value;   ///< q_t(S) = x_t p_t(S)
};

RolloverPath simulate_rollover(const CurvePath& path, double S);

/// p_t / p_t(0) for every recorded state.
std::vector<Curve> undiscount(const CurvePath& path);

/// Smallest node value of every recorded state on [0, window].
double min_value(const CurvePath& path, double window);

struct PathSupNorms {
  double p = 0.0;      ///< sup_t ||p_t||
  double q = 0.0;      ///< sup_t ||p_t / L_t p_0||
  double q_inv = 0.0;  ///< sup_t ||L_t p_0 / p_t||
  double ratio_bound = 1.0;  ///< max over nodes of max(q, 1/q)
};

/// Sup over recorded states of E^s norms restricted to [0, window]. Only every
/// `every`-th recorded state (and the last) enters the sup.
PathSupNorms path_sup_norms(const CurvePath& path, const Curve& p0, SobolevIndex s,
                            double window, std::size_t every = 1);

struct MomentReport {
  std::vector<int> u;
  std::vector<double> p, q, q_inv;                 ///< full sample
  std::vector<double> p_half, q_half, q_inv_half;  ///< first half of the sample
  double max_relative_change = 0.0;
  bool stable = true;
  double empirical_A = 1.0;
  std::size_t n_paths = 0;
};

/// Empirical E[sup_t ||.||^u]; stable when doubling the sample changes every
/// moment by less than `stability_tol` relative.
MomentReport moment_diagnostic(std::span<const PathSupNorms> paths, std::span<const int> us,
                               double stability_tol = 0.1);

}  // namespace bondlab
