#include "bondlab/hedging.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "bondlab/error.hpp"

namespace bondlab {

HedgeOperators gram_operators_at(const VolatilityOperator& sigma, const Curve& p0, double t,
                                 SobolevIndex s) {
  HedgeOperators ops;
  ops.t = t;
  const Curve l = translate(p0, t);
  const std::size_t n = sigma.size();
  ops.B.reserve(n);
  for (std::size_t i = 0; i < n; ++i) ops.B.push_back(multiply(l, sigma[i]));
  ops.A.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      const double v = inner_product(ops.B[i], ops.B[j], s);
      ops.A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
      ops.A(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
    }
  return ops;
}

std::vector<HedgeOperators> gram_operators(const CoefficientSchedule& schedule, const Curve& p0,
                                           std::span<const double> times, SobolevIndex s) {
  if (!schedule.is_deterministic())
    fail(ErrorKind::ConfigInvalid, "schedule-level operators need a deterministic schedule");
  std::vector<HedgeOperators> out;
  out.reserve(times.size());
  for (double t : times) out.push_back(gram_operators_at(schedule.sample(t).sigma, p0, t, s));
  return out;
}

std::vector<HedgeOperators> gram_operators(const CurvePath& path, const Curve& p0,
                                           SobolevIndex s) {
  std::vector<HedgeOperators> out;
  out.reserve(path.coefficients.size());
  for (std::size_t k = 0; k < path.coefficients.size(); ++k)
    out.push_back(gram_operators_at(path.coefficients[k]->sigma, p0, path.times[k], s));
  return out;
}

std::vector<double> adjoint_apply(const HedgeOperators& ops, const Curve& g, SobolevIndex s) {
  std::vector<double> x(ops.B.size());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = inner_product(ops.B[i], g, s);
  return x;
}

HedgeStep solve_hedge_step(const HedgeOperators& ops, std::span<const double> x, SobolevIndex s,
                           double eps_rank, double eps_res_rel) {
  const std::size_t n = ops.B.size();
  if (x.size() != n) fail(ErrorKind::ConfigInvalid, "integrand length does not match factors");
  if (n == 0) fail(ErrorKind::ConfigInvalid, "hedging needs at least one factor");
  const MaturityGrid& grid = ops.B[0].grid();
  Eigen::Map<const Eigen::VectorXd> xv(x.data(), static_cast<Eigen::Index>(n));

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(ops.A);
  const Eigen::VectorXd lam = eig.eigenvalues();
  const double lam_max = std::max(lam.maxCoeff(), 0.0);
  Eigen::VectorXd z = eig.eigenvectors().transpose() * xv;
  HedgeStep step{Curve::zero(grid), {}, 0.0, 0};
  for (Eigen::Index k = 0; k < lam.size(); ++k) {
    if (lam_max > 0.0 && lam(k) > eps_rank * lam_max) {
      z(k) /= lam(k);
      ++step.rank;
    } else {
      z(k) = 0.0;
    }
  }
  const Eigen::VectorXd c = eig.eigenvectors() * z;
  std::vector<double> g(grid.size(), 0.0);
  double a = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double ci = c(static_cast<Eigen::Index>(i));
    const auto bg = ops.B[i].g();
    for (std::size_t j = 0; j < g.size(); ++j) g[j] += ci * bg[j];
    a += ci * ops.B[i].a();
  }
  step.eta = Curve(grid, std::move(g), a);
  step.attained = adjoint_apply(ops, step.eta, s);
  double r2 = 0.0, x2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    r2 += (step.attained[i] - x[i]) * (step.attained[i] - x[i]);
    x2 += x[i] * x[i];
  }
  step.residual = std::sqrt(r2);
  if (step.residual > eps_res_rel * std::sqrt(x2))
    fail(ErrorKind::OutOfRange, "integrand is not attainable (residual " +
                                    std::to_string(step.residual) + ", |x| " +
                                    std::to_string(std::sqrt(x2)) + ")");
  return step;
}

AtomBasis default_atom_basis(std::size_t n_factors, double lo, double hi) {
  const std::size_t m = 2 * n_factors + 1;
  if (!(hi >= lo) || lo < 0.0) fail(ErrorKind::ConfigInvalid, "bad atom basis interval");
  AtomBasis b;
  for (std::size_t j = 0; j < m; ++j)
    b.maturities.push_back(m == 1 ? lo : lo + (hi - lo) * static_cast<double>(j) /
                                               static_cast<double>(m - 1));
  return b;
}

AtomProjection project_to_atoms(const Curve& p, const VolatilityOperator& sigma,
                                std::span<const double> target, const AtomBasis& basis,
                                SobolevIndex s) {
  const auto n = static_cast<Eigen::Index>(sigma.size());
  const auto m = static_cast<Eigen::Index>(basis.maturities.size());
  if (static_cast<Eigen::Index>(target.size()) != n)
    fail(ErrorKind::ConfigInvalid, "projection target length does not match factors");
  Eigen::MatrixXd P(n, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    const DualAtom atom{basis.maturities[static_cast<std::size_t>(j)], 1.0, AtomOrder::Dirac};
    for (Eigen::Index i = 0; i < n; ++i)
      P(i, j) = pair_product(std::span(&atom, 1), p, sigma[static_cast<std::size_t>(i)], s);
  }
  Eigen::Map<const Eigen::VectorXd> tv(target.data(), n);
  const Eigen::VectorXd w = P.completeOrthogonalDecomposition().solve(tv);
  AtomProjection out;
  out.residual = (P * w - tv).norm();
  for (Eigen::Index j = 0; j < m; ++j)
    out.atoms.push_back({basis.maturities[static_cast<std::size_t>(j)], w(j), AtomOrder::Dirac});
  return out;
}

CompletedHedge complete_hedge(const CurvePath& path, std::span<const HedgeOperators> ops,
                              const IntegrandRule& integrand, const ConditionalMean& mean,
                              const HedgeOptions& options, SobolevIndex s) {
  const std::size_t K = path.steps();
  if (ops.size() < K) fail(ErrorKind::ConfigInvalid, "one operator set per step is required");
  CompletedHedge out;
  out.strategy.schedule.reserve(K + 1);
  out.steps.reserve(K + 1);
  for (std::size_t k = 0; k <= K; ++k) {
    const PathPrefix prefix(path, k);
    const Curve& p = prefix.state();
    HedgeStepReport rep;
    rep.t = prefix.time();
    if (k < K) {
      const std::vector<double> x = integrand(prefix);
      const HedgeStep step = solve_hedge_step(ops[k], x, s, options.eps_rank, options.eps_res_rel);
      rep.residual = step.residual;
      const AtomProjection proj =
          project_to_atoms(p, prefix.coefficients().sigma, step.attained, options.basis, s);
      rep.atom_residual = proj.residual;
      rep.risky = proj.atoms;
    }
    const double p_zero = p.at_node(0);
    if (!(p_zero > 0.0)) fail(ErrorKind::DegenerateCurve, "discount factor is not positive");
    rep.cash = (mean(prefix) - value(rep.risky, p, s)) / p_zero;
    out.strategy.schedule.push_back(combined(cash(rep.cash), rep.risky));
    out.steps.push_back(std::move(rep));
  }
  return out;
}

namespace {

std::vector<double> pairings_at(const Curve& p, const VolatilityOperator& sigma, double x,
                                double weight, SobolevIndex s) {
  const DualAtom atom{x, weight, AtomOrder::Dirac};
  std::vector<double> out(sigma.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = pair_product(std::span(&atom, 1), p, sigma[i], s);
  return out;
}

double rollover_units(const PathPrefix& prefix, double S) {
  double integral = 0.0;
  for (std::size_t j = 0; j < prefix.step(); ++j)
    integral += forward_rate(prefix.state(j), S) * prefix.dt();
  return std::exp(integral);
}

}  // namespace

ClaimModel constant_claim(double c) {
  ClaimModel m;
  m.integrand = [](const PathPrefix& pre) {
    return std::vector<double>(pre.coefficients().sigma.size(), 0.0);
  };
  m.mean = [c](const PathPrefix&) { return c; };
  m.payoff = [c](const CurvePath&) { return c; };
  return m;
}

ClaimModel zero_coupon_claim(double x0, double horizon) {
  ClaimModel m;
  m.integrand = [x0, horizon](const PathPrefix& pre) {
    return pairings_at(pre.state(), pre.coefficients().sigma, x0 + horizon - pre.time(), 1.0,
                       SobolevIndex(1));
  };
  m.mean = [x0, horizon](const PathPrefix& pre) { return pre.state()(x0 + horizon - pre.time()); };
  m.payoff = [x0](const CurvePath& path) { return path.final_state()(x0); };
  return m;
}

ClaimModel rollover_claim(double S, double units) {
  ClaimModel m;
  m.integrand = [S, units](const PathPrefix& pre) {
    return pairings_at(pre.state(), pre.coefficients().sigma, S, units * rollover_units(pre, S),
                       SobolevIndex(1));
  };
  m.mean = [S, units](const PathPrefix& pre) {
    return units * rollover_units(pre, S) * pre.state()(S);
  };
  m.payoff = [S, units](const CurvePath& path) {
    return units * simulate_rollover(path, S).value.back();
  };
  return m;
}

ClaimModel brownian_linear_claim(std::vector<double> c) {
  ClaimModel m;
  m.integrand = [c](const PathPrefix&) { return c; };
  m.mean = [c](const PathPrefix& pre) {
    double v = 0.0;
    for (std::size_t j = 0; j < pre.step(); ++j)
      for (std::size_t i = 0; i < c.size(); ++i) v += c[i] * pre.dw_q(j, i);
    return v;
  };
  m.payoff = [c](const CurvePath& path) {
    double v = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) v += c[i] * path.dw_q.cumulative(i, path.steps());
    return v;
  };
  return m;
}

double replication_error(const PortfolioStrategy& strategy, const CurvePath& path, double claim,
                         SobolevIndex s) {
  const auto G = gains(strategy, path, s);
  return value(strategy.schedule.front(), path.state(0), s) + G.back() - claim;
}

IntegrandPath clark_ocone_integrand_deterministic(const GammaPath& gamma, const Utility& u,
                                                  double lambda_hat, std::span<const double> xi,
                                                  double dt) {
  const std::size_t K = gamma.size();
  if (xi.size() < K) fail(ErrorKind::ConfigInvalid, "density path shorter than the schedule");
  // remaining[k] = sum_{j >= k} ||gamma_j||^2 dt
  std::vector<double> remaining(K + 1, 0.0);
  for (std::size_t k = K; k-- > 0;) {
    double g2 = 0.0;
    for (double v : gamma[k]) g2 += v * v;
    remaining[k] = remaining[k + 1] + g2 * dt;
  }
  IntegrandPath out;
  out.x.resize(K);
  for (std::size_t k = 0; k < K; ++k) {
    const double y = conditional_kernel(u, lambda_hat, xi[k], remaining[k]).y;
    out.x[k].resize(gamma[k].size());
    for (std::size_t i = 0; i < gamma[k].size(); ++i) out.x[k][i] = y * gamma[k][i];
  }
  return out;
}

double WeightedSequenceIndex::weight(std::size_t i) const {
  const double di = static_cast<double>(i);
  return std::pow(1.0 + di * di, 0.5 * s_seq);
}

WeightedConditionReport weighted_condition_diagnostic(std::span<const Eigen::MatrixXd> As,
                                                      WeightedSequenceIndex index,
                                                      std::size_t n_random, std::uint64_t seed) {
  WeightedConditionReport rep;
  std::mt19937_64 gen(path_seed(seed, 0));
  std::normal_distribution<double> normal;
  for (const auto& A : As) {
    const Eigen::Index n = A.rows();
    if (n == 0) continue;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(A);
    Eigen::VectorXd lam = eig.eigenvalues().cwiseMax(0.0);
    const double lam_max = lam.maxCoeff();
    const Eigen::MatrixXd root =
        eig.eigenvectors() * lam.cwiseSqrt().asDiagonal() * eig.eigenvectors().transpose();
    Eigen::VectorXd w(n);
    for (Eigen::Index i = 0; i < n; ++i) w(i) = index.weight(static_cast<std::size_t>(i + 1));
    const Eigen::MatrixXd WR = w.asDiagonal() * root;
    if (lam.minCoeff() <= 1e-14 * std::max(lam_max, 1e-300)) rep.unbounded = true;

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(WR);
    const double smin = svd.singularValues().minCoeff();
    rep.exact_k = std::max(rep.exact_k, smin > 0.0 ? 1.0 / smin
                                                   : std::numeric_limits<double>::infinity());

    auto probe = [&](const Eigen::VectorXd& z) {
      const double den = (WR * z).norm();
      const double ratio = den > 0.0 ? z.norm() / den : std::numeric_limits<double>::infinity();
      rep.sampled_k = std::max(rep.sampled_k, ratio);
      ++rep.samples;
    };
    for (Eigen::Index c = 0; c < n; ++c) probe(eig.eigenvectors().col(c));
    for (std::size_t r = 0; r < n_random; ++r) {
      Eigen::VectorXd z(n);
      for (Eigen::Index i = 0; i < n; ++i) z(i) = normal(gen);
      probe(z);
    }
  }
  if (rep.unbounded) rep.sampled_k = std::numeric_limits<double>::infinity();
  return rep;
}

std::vector<double> singular_values(const HedgeOperators& ops) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(ops.A);
  std::vector<double> sv;
  for (Eigen::Index k = eig.eigenvalues().size(); k-- > 0;)
    sv.push_back(std::sqrt(std::max(eig.eigenvalues()(k), 0.0)));
  return sv;
}

double loglog_slope(std::span<const double> values) {
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  std::size_t n = 0;
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (!(values[k] > 0.0)) continue;
    const double x = std::log(static_cast<double>(k + 1));
    const double y = std::log(values[k]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++n;
  }
  if (n < 2) return 0.0;
  const double dn = static_cast<double>(n);
  return (dn * sxy - sx * sy) / (dn * sxx - sx * sx);
}

}  // namespace bondlab
