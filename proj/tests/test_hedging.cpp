#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "bondlab/error.hpp"
#include "bondlab/hedging.hpp"
#include "bondlab/noise.hpp"
#include "bondlab/utility.hpp"
#include "support.hpp"

using namespace bondlab;

namespace {

Curve random_curve(const MaturityGrid& g, std::mt19937_64& rng) {
  std::normal_distribution<double> N;
  const double a = N(rng), b = N(rng), c = std::abs(N(rng)) + 0.2, k = N(rng);
  return Curve::sample(g, [=](double x) { return (a + b * x) * std::exp(-c * x) * std::cos(k * x); }, 0.1 * a);
}

CurvePath run(const Curve& p0, const CoefficientSchedule& sched, std::size_t K, std::uint64_t p,
              std::size_t fine = 0) {
  auto cfg = support::config(p0.grid(), K);
  cfg.seed = 4;
  const MildSimulator sim(p0, sched, cfg);
  if (fine == 0) return sim.run_path(p);
  return sim.run(coarsen(draw_increments(4, p, fine, sim.n_factors(), 1.0 / fine), fine / K));
}

}  // namespace

TEST_CASE("Gram operators") {
  const auto g = support::standard_grid();
  const Curve p0 = support::exp_curve(g, 0.05);
  const SobolevIndex s(1);
  const auto zero = gram_operators_at(VolatilityOperator({Curve::zero(g)}), p0, 0.3, s);
  CHECK(zero.A(0, 0) == 0.0);
  const Curve s1 = support::hump(g, 0.01, 1.0);
  const auto one = gram_operators_at(VolatilityOperator({s1}), p0, 0.5, s);
  CHECK(one.A(0, 0) ==
        doctest::Approx(std::pow(sobolev_norm(multiply(translate(p0, 0.5), s1), s), 2)).epsilon(1e-13));
  // orthogonalise p0 sigma^2 against p0 sigma^1 at t = 0
  const Curve h = support::hump(g, 0.02, 0.4);
  const double c = inner_product(multiply(p0, h), multiply(p0, s1), s) /
                   inner_product(multiply(p0, s1), multiply(p0, s1), s);
  const Curve s2 = h - c * s1;
  const auto two = gram_operators_at(VolatilityOperator({s1, 3.0 * s2}), p0, 0.0, s);
  CHECK(std::abs(two.A(0, 1)) <= 1e-15 * two.A.norm());
  CHECK(two.A(1, 1) == doctest::Approx(9.0 * std::pow(sobolev_norm(multiply(p0, s2), s), 2)).epsilon(1e-12));
}

TEST_CASE("pseudo-inverse solve") {
  const auto g = support::standard_grid();
  const Curve p0 = support::exp_curve(g, 0.05);
  const SobolevIndex s(1);
  const VolatilityOperator sig({support::hump(g, 0.01, 1.0), support::hump(g, 0.008, 0.5),
                                support::hump(g, 0.005, 0.25)});
  const auto ops = gram_operators_at(sig, p0, 0.25, s);
  SUBCASE("zero integrand") {
    const auto st = solve_hedge_step(ops, std::vector<double>(3, 0.0), s);
    CHECK(sobolev_norm(st.eta, s) == 0.0);
    CHECK(st.residual == 0.0);
  }
  SUBCASE("random attainable integrands") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 100; ++trial) {
      const auto x = adjoint_apply(ops, random_curve(g, rng), s);
      const auto st = solve_hedge_step(ops, x, s);
      double n = 0.0;
      for (double v : x) n += v * v;
      CHECK(st.residual <= 1e-10 * std::sqrt(n));
      CHECK(st.rank == 3);
    }
  }
  SUBCASE("dead factor is out of range") {
    const auto dead = gram_operators_at(VolatilityOperator({support::hump(g, 0.01, 1.0), Curve::zero(g)}), p0, 0.0, s);
    try {
      solve_hedge_step(dead, std::vector<double>{0.001, 0.001}, s);
      FAIL("expected OutOfRange");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::OutOfRange);
    }
    CHECK_NOTHROW(solve_hedge_step(dead, std::vector<double>{0.001, 0.0}, s));
  }
}

TEST_CASE("atom projection matches the attained pairings") {
  const auto g = support::standard_grid();
  const Curve p = support::exp_curve(g, 0.04);
  const VolatilityOperator sig({support::hump(g, 0.01, 1.0), support::hump(g, 0.008, 0.5)});
  const auto basis = default_atom_basis(2, 0.5, 9.0);
  CHECK(basis.maturities.size() == 5);
  const std::vector<double> target{0.003, -0.001};
  const auto proj = project_to_atoms(p, sig, target, basis, SobolevIndex(1));
  CHECK(proj.residual <= 1e-15);
  for (std::size_t i = 0; i < 2; ++i)
    CHECK(pair_product(proj.atoms, p, sig[i], SobolevIndex(1)) == doctest::Approx(target[i]).epsilon(1e-12));
}

TEST_CASE("constant claim is held in cash") {
  const auto g = support::standard_grid();
  const Curve p0 = support::exp_curve(g, 0.05);
  const auto sched = support::one_factor(g, 0.01, 1.0, 0.2);
  const CurvePath path = run(p0, sched, 32, 0);
  const auto ops = gram_operators(path, p0, SobolevIndex(1));
  const ClaimModel claim = constant_claim(2.0);
  HedgeOptions opt;
  opt.basis = default_atom_basis(1, 0.5, 9.0);
  const auto h = complete_hedge(path, ops, claim.integrand, claim.mean, opt, SobolevIndex(1));
  for (std::size_t k = 0; k < h.strategy.schedule.size(); ++k) {
    CHECK(value(h.strategy.schedule[k], path.state(k), SobolevIndex(1)) == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(h.steps[k].cash == doctest::Approx(2.0 / path.state(k).at_node(0)).epsilon(1e-14));
  }
  CHECK(std::abs(replication_error(h.strategy, path, 2.0, SobolevIndex(1))) <= 1e-14);
}

TEST_CASE("zero-coupon claim: conditional value and refinement") {
  const auto g = support::standard_grid();
  const Curve p0 = support::exp_curve(g, 0.05);
  const auto sched = support::one_factor(g, 0.01, 1.0, 0.2);
  const ClaimModel claim = zero_coupon_claim(2.0, 1.0);
  HedgeOptions opt;
  opt.basis = default_atom_basis(1, 0.5, 9.0);
  const SobolevIndex s(1);
  std::vector<double> rms;
  for (std::size_t K : {8u, 32u, 128u}) {
    double ss = 0.0;
    for (std::size_t p = 0; p < 24; ++p) {
      const CurvePath path = run(p0, sched, K, p, 256);
      const auto ops = gram_operators(path, p0, s);
      const auto h = complete_hedge(path, ops, claim.integrand, claim.mean, opt, s);
      if (K == 32 && p == 0) {
        // V_t(theta) = E_Q[X | F_t] by construction
        for (std::size_t k = 0; k <= K; ++k)
          CHECK(value(h.strategy.schedule[k], path.state(k), s) ==
                doctest::Approx(path.state(k)(3.0 - path.times[k])).epsilon(1e-13));
        // adding c delta_0 to the risky part lowers the cash by exactly c
        const auto& st = h.steps[3];
        const Curve& p3 = path.state(3);
        const double a = (path.state(3)(3.0 - path.times[3]) - value(st.risky, p3, s)) / p3.at_node(0);
        const double a2 = (path.state(3)(3.0 - path.times[3]) - value(combined(st.risky, cash(0.7)), p3, s)) / p3.at_node(0);
        CHECK(a2 == doctest::Approx(a - 0.7).epsilon(1e-13));
      }
      const double e = replication_error(h.strategy, path, claim.payoff(path), s);
      ss += e * e;
    }
    rms.push_back(std::sqrt(ss / 24));
  }
  for (std::size_t l = 1; l < rms.size(); ++l) CHECK(rms[l] < rms[l - 1]);
}

TEST_CASE("Clark-Ocone integrands") {
  const std::size_t K = 200;
  const double dt = 1.0 / K;
  const GammaPath gamma(K, std::vector<double>{0.2});
  const GammaPath none(K, std::vector<double>{0.0});
  const auto dw = draw_increments(2, 0, K, 1, dt);
  const auto xi = girsanov_density_path(gamma, dw, dt);
  SUBCASE("zero gamma") {
    const auto x = clark_ocone_integrand_deterministic(none, Utility::power(0.5), 1.0,
                                                       girsanov_density_path(none, dw, dt), dt);
    for (const auto& row : x.x) CHECK(row[0] == 0.0);
  }
  SUBCASE("log: x = v gamma / xi") {
    const double v = 2.0;
    const auto x = clark_ocone_integrand_deterministic(gamma, Utility::log(), 1.0 / v, xi, dt);
    for (std::size_t k = 0; k < K; ++k) CHECK(x.x[k][0] == doctest::Approx(v * 0.2 / xi[k]).epsilon(1e-14));
  }
  SUBCASE("quadratic: the integrand reproduces the conditional value") {
    // Y_T - Y_0 = sum x_k dW~_k up to discretisation; the opposite sign fails
    const Utility u = Utility::quadratic(3.0);
    const double lam = 1.5;
    double good = 0.0, flipped = 0.0;
    for (std::size_t p = 0; p < 50; ++p) {
      const auto w = draw_increments(11, p, K, 1, dt);
      const auto xp = girsanov_density_path(gamma, w, dt);
      const auto wq = q_brownian_increments(w, gamma, dt);
      const auto x = clark_ocone_integrand_deterministic(gamma, u, lam, xp, dt);
      double sum = 0.0;
      for (std::size_t k = 0; k < K; ++k) sum += x.x[k][0] * wq(k, 0);
      const double Y0 = conditional_kernel(u, lam, 1.0, 0.04).Y;
      const double YT = u.inverse_marginal(lam * xp.back());
      good += std::pow(YT - Y0 - sum, 2);
      flipped += std::pow(YT - Y0 + sum, 2);
    }
    CHECK(std::sqrt(good / 50) < 0.02);
    CHECK(std::sqrt(flipped / 50) > 5.0 * std::sqrt(good / 50));
  }
}

TEST_CASE("weighted condition diagnostic") {
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(3, 3);
  A.diagonal() << 4.0, 1.0, 0.25;
  const std::vector<Eigen::MatrixXd> As{A};
  const auto r0 = weighted_condition_diagnostic(As, WeightedSequenceIndex{0.0});
  // W = I: 1 / sigma_min(A^{1/2}) = 1 / 0.5
  CHECK(r0.exact_k == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(r0.sampled_k <= r0.exact_k * (1.0 + 1e-12));
  CHECK(r0.sampled_k == doctest::Approx(2.0).epsilon(1e-12));
  const auto r1 = weighted_condition_diagnostic(As, WeightedSequenceIndex{1.0});
  // weights sqrt(2), sqrt(5), sqrt(10): diag W A^{1/2} = 2 sqrt 2, sqrt 5, sqrt(10)/2
  CHECK(r1.exact_k == doctest::Approx(1.0 / std::min({2.0 * std::sqrt(2.0), std::sqrt(5.0), std::sqrt(10.0) / 2.0})).epsilon(1e-12));
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(2, 2);
  S(0, 0) = 1.0;
  const std::vector<Eigen::MatrixXd> singular{S};
  CHECK(weighted_condition_diagnostic(singular, WeightedSequenceIndex{0.0}).unbounded);
}

TEST_CASE("compactness signature on decaying modes") {
  const MaturityGrid g(10.0, 1025);
  const Curve p0 = support::exp_curve(g, 0.03);
  const double sp = 1.0;
  const auto modes = decaying_mode_loadings(g, 12, 0.01, sp, SobolevIndex(1));
  const auto ops = gram_operators_at(VolatilityOperator(modes), p0, 0.0, SobolevIndex(1));
  const auto sv = singular_values(ops);
  for (std::size_t k = 1; k < sv.size(); ++k) CHECK(sv[k] <= sv[k - 1]);
  // loadings decay like i^{-s'-1} in E^{s+1}; singular values of B decay at least as fast
  CHECK(loglog_slope(sv) <= -(sp + 1.0));
}
