#include "bondlab/market_model.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "bondlab/error.hpp"

namespace bondlab {

namespace {

// Vanishing-at-zero check for loadings and drift.
void require_zero_at_origin(const Curve& f, const char* what) {
  double scale = std::abs(f.a());
  for (double v : f.g()) scale = std::max(scale, std::abs(v));
  if (std::abs(f.at_node(0)) > 1e-12 * std::max(1.0, scale))
    fail(ErrorKind::ConfigInvalid, std::string(what) + " must vanish at maturity 0");
}

}  // namespace

VolatilityOperator::VolatilityOperator(std::vector<Curve> factors) : factors_(std::move(factors)) {
  for (std::size_t i = 0; i < factors_.size(); ++i) {
    require_zero_at_origin(factors_[i], "volatility loading");
    if (i > 0) require_same_grid(factors_[0], factors_[i]);
  }
}

Curve VolatilityOperator::apply(std::span<const double> gamma, const MaturityGrid& grid) const {
  if (gamma.size() != factors_.size())
    fail(ErrorKind::ConfigInvalid, "gamma length does not match the factor count");
  std::vector<double> g(grid.size(), 0.0);
  double a = 0.0;
  for (std::size_t i = 0; i < factors_.size(); ++i) {
    const Curve& f = factors_[i];
    if (!(f.grid() == grid)) fail(ErrorKind::GridMismatch, "loading grid differs");
    for (std::size_t j = 0; j < g.size(); ++j) g[j] += gamma[i] * f.g()[j];
    a += gamma[i] * f.a();
  }
  return Curve(grid, std::move(g), a);
}

double VolatilityOperator::hilbert_schmidt_squared(SobolevIndex s) const {
  double t = 0.0;
  for (const auto& f : factors_) {
    const double n = sobolev_norm(f, s);
    t += n * n;
  }
  return t;
}

DriftCurve::DriftCurve(Curve m) : m_(std::move(m)) { require_zero_at_origin(m_, "drift"); }

double MarketPriceOfRisk::norm_squared() const noexcept {
  double s = 0.0;
  for (double v : gamma) s += v * v;
  return s;
}

MarketState state_from_gamma(VolatilityOperator sigma, std::vector<double> gamma,
                             const MaturityGrid& grid) {
  Curve m = sigma.apply(gamma, grid);
  return MarketState{DriftCurve(std::move(m)), std::move(sigma),
                     MarketPriceOfRisk{std::move(gamma)}};
}

CoefficientSchedule CoefficientSchedule::deterministic(TimeSampler sampler) {
  CoefficientSchedule c;
  c.kind_ = Kind::Deterministic;
  c.time_ = std::move(sampler);
  return c;
}

CoefficientSchedule CoefficientSchedule::constant(MarketState state) {
  auto shared = std::make_shared<const MarketState>(std::move(state));
  return deterministic([shared](double) { return *shared; });
}

CoefficientSchedule CoefficientSchedule::state_dependent(StateSampler sampler) {
  CoefficientSchedule c;
  c.kind_ = Kind::StateDependent;
  c.state_ = std::move(sampler);
  return c;
}

MarketState CoefficientSchedule::sample(double t, const Curve& p) const {
  return kind_ == Kind::Deterministic ? time_(t) : state_(t, p);
}

MarketState CoefficientSchedule::sample(double t) const {
  if (kind_ != Kind::Deterministic)
    fail(ErrorKind::ConfigInvalid, "state-dependent schedule needs the current curve");
  return time_(t);
}

Curve humped_loading(const MaturityGrid& grid, double c, double b) {
  return Curve::sample(grid, [c, b](double x) { return c * x * std::exp(-b * x); });
}

std::vector<Curve> decaying_mode_loadings(const MaturityGrid& grid, std::size_t n, double c,
                                          double s_prime, SobolevIndex s) {
  const double len = grid.x_max();
  std::vector<Curve> out;
  out.reserve(n);
  for (std::size_t i = 1; i <= n; ++i) {
    const double k = static_cast<double>(i) * std::numbers::pi / len;
    Curve phi = Curve::sample(grid, [k](double x) { return std::sin(k * x) * std::exp(-0.5 * x); });
    const double norm = sobolev_norm(phi, s.next());
    const double di = static_cast<double>(i);
    const double scale = c * std::pow(1.0 + di * di, -0.5 * s_prime - 0.5) / norm;
    out.push_back(scale * phi);
  }
  return out;
}

RiskSolveReport solve_market_price_of_risk(const VolatilityOperator& sigma, const DriftCurve& m,
                                           SobolevIndex s, double eps_rank,
                                           double eps_res_rel) {
  const std::size_t n = sigma.size();
  const Curve& mc = m.curve();
  RiskSolveReport report;
  report.gamma.gamma.assign(n, 0.0);
  if (n > 0) {
    Eigen::MatrixXd gram(n, n);
    Eigen::VectorXd rhs(n);
    for (std::size_t i = 0; i < n; ++i) {
      require_same_grid(sigma[i], mc);
      rhs(i) = inner_product(sigma[i], mc, s);
      for (std::size_t j = 0; j <= i; ++j)
        gram(i, j) = gram(j, i) = inner_product(sigma[i], sigma[j], s);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    const Eigen::VectorXd lam = eig.eigenvalues();
    const double lam_max = std::max(lam.maxCoeff(), 0.0);
    // Gram rounding is ~1e-16 lam_max, so the cut acts on eigenvalues as in the hedge solve
    const double cut = eps_rank * lam_max;
    Eigen::VectorXd coef = eig.eigenvectors().transpose() * rhs;
    for (Eigen::Index i = 0; i < lam.size(); ++i) {
      if (lam(i) > 0.0 && lam(i) > cut) {
        coef(i) /= lam(i);
        ++report.retained_rank;
      } else {
        coef(i) = 0.0;
      }
    }
    const Eigen::VectorXd gamma = eig.eigenvectors() * coef;
    for (std::size_t i = 0; i < n; ++i) report.gamma.gamma[i] = gamma(static_cast<Eigen::Index>(i));
  }
  const Curve fitted = n > 0 ? sigma.apply(report.gamma.gamma, mc.grid()) : Curve::zero(mc.grid());
  report.residual = sobolev_norm(fitted - mc, s);
  const double tol = eps_res_rel * sobolev_norm(mc, s);
  if (report.residual > tol)
    fail(ErrorKind::ArbitrageDetected,
         "drift is not in the range of the volatility operator (residual " +
             std::to_string(report.residual) + ")");
  return report;
}

std::vector<double> girsanov_density_path(const GammaPath& gamma, const BrownianIncrements& dw,
                                          double dt) {
  if (gamma.size() != dw.steps())
    fail(ErrorKind::ConfigInvalid, "gamma schedule and increments disagree in length");
  std::vector<double> xi(dw.steps() + 1);
  double log_xi = 0.0;
  xi[0] = 1.0;
  for (std::size_t k = 0; k < dw.steps(); ++k) {
    double g2 = 0.0, gdw = 0.0;
    for (std::size_t i = 0; i < dw.factors(); ++i) {
      g2 += gamma[k][i] * gamma[k][i];
      gdw += gamma[k][i] * dw(k, i);
    }
    log_xi += -0.5 * g2 * dt - gdw;
    xi[k + 1] = std::exp(log_xi);
  }
  return xi;
}

BrownianIncrements q_brownian_increments(const BrownianIncrements& dw, const GammaPath& gamma,
                                         double dt) {
  BrownianIncrements out(dw.steps(), dw.factors());
  for (std::size_t k = 0; k < dw.steps(); ++k)
    for (std::size_t i = 0; i < dw.factors(); ++i) out(k, i) = dw(k, i) + gamma[k][i] * dt;
  return out;
}

BrownianIncrements p_brownian_increments(const BrownianIncrements& dw_q, const GammaPath& gamma,
                                         double dt) {
  BrownianIncrements out(dw_q.steps(), dw_q.factors());
  for (std::size_t k = 0; k < dw_q.steps(); ++k)
    for (std::size_t i = 0; i < dw_q.factors(); ++i) out(k, i) = dw_q(k, i) - gamma[k][i] * dt;
  return out;
}

StrongArbitrageReport strong_arbitrage_diagnostic(std::span<const GammaPath> paths, double dt) {
  StrongArbitrageReport r;
  std::vector<double> integrals;
  integrals.reserve(paths.size());
  for (const auto& path : paths) {
    double acc = 0.0;
    for (const auto& row : path)
      for (double v : row) acc += v * v * dt;
    integrals.push_back(acc);
    r.max_integral = std::max(r.max_integral, acc);
  }
  const std::size_t half = paths.size() / 2;
  for (int a = 1; a <= 4; ++a) {
    double full = 0.0, first = 0.0;
    for (std::size_t p = 0; p < integrals.size(); ++p) {
      const double e = std::exp(a * integrals[p]);
      full += e;
      if (p < half) first += e;
    }
    full = integrals.empty() ? 1.0 : full / static_cast<double>(integrals.size());
    first = half == 0 ? full : first / static_cast<double>(half);
    r.exp_moments.push_back(full);
    r.exp_moments_half.push_back(first);
    if (std::abs(full - first) > 0.1 * std::abs(full)) r.warn = true;
  }
  return r;
}

}  // namespace bondlab
