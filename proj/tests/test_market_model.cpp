#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "bondlab/error.hpp"
#include "bondlab/market_model.hpp"
#include "bondlab/noise.hpp"
#include "support.hpp"

using namespace bondlab;

namespace {

ErrorKind kind_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error thrown");
  return ErrorKind::ConfigInvalid;
}

GammaPath constant_gamma(std::size_t K, std::vector<double> g) { return GammaPath(K, g); }

}  // namespace

TEST_CASE("loadings and drift must vanish at zero") {
  const auto g = support::standard_grid();
  const Curve bad = Curve::sample(g, [](double x) { return 0.01 + x; });
  CHECK(kind_of([&] { VolatilityOperator({bad}); }) == ErrorKind::ConfigInvalid);
  CHECK(kind_of([&] { DriftCurve{bad}; }) == ErrorKind::ConfigInvalid);
  CHECK_NOTHROW(VolatilityOperator({support::hump(g, 0.01, 1.0)}));
  CHECK(kind_of([&] { state_from_gamma(VolatilityOperator({support::hump(g, 0.01, 1.0)}), {1.0, 2.0}, g); }) ==
        ErrorKind::ConfigInvalid);
}

TEST_CASE("humped loading family") {
  const auto g = support::standard_grid();
  const Curve h = humped_loading(g, 0.01, 1.0);
  for (std::size_t j = 0; j < g.size(); j += 37)
    CHECK(h.at_node(j) == doctest::Approx(0.01 * g.node(j) * std::exp(-g.node(j))).epsilon(1e-14));
}

TEST_CASE("decaying modes obey the weighted norm bound") {
  const auto g = support::standard_grid();
  const SobolevIndex s(1);
  const double c = 0.02, sp = 1.5;
  const auto modes = decaying_mode_loadings(g, 8, c, sp, s);
  REQUIRE(modes.size() == 8);
  for (std::size_t i = 0; i < modes.size(); ++i) {
    const double ii = static_cast<double>(i + 1);
    CHECK(modes[i].at_node(0) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(sobolev_norm(modes[i], s.next()) <= c * std::pow(1.0 + ii * ii, -sp / 2 - 0.5) * (1.0 + 1e-9));
  }
}

TEST_CASE("market price of risk solve") {
  const auto g = support::standard_grid();
  const SobolevIndex s(1);
  const Curve s1 = support::hump(g, 0.01, 1.0);
  SUBCASE("single factor reproduces the drift") {
    const auto rep = solve_market_price_of_risk(VolatilityOperator({s1}), DriftCurve(s1), s);
    REQUIRE(rep.gamma.gamma.size() == 1);
    CHECK(rep.gamma.gamma[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(rep.retained_rank == 1);
  }
  SUBCASE("zero volatility with a drift is arbitrage") {
    CHECK(kind_of([&] {
            solve_market_price_of_risk(VolatilityOperator({Curve::zero(g)}), DriftCurve(s1), s);
          }) == ErrorKind::ArbitrageDetected);
  }
  SUBCASE("orthogonal pair") {
    // Gram-Schmidt in E^s gives an orthogonal second loading that still vanishes at 0
    const Curve h = support::hump(g, 0.02, 0.3);
    const Curve s2 = h - (inner_product(h, s1, s) / inner_product(s1, s1, s)) * s1;
    CHECK(std::abs(inner_product(s1, s2, s)) < 1e-18);
    const VolatilityOperator sig({s1, s2});
    const Curve m = sig.apply(std::vector<double>{0.3, 0.1}, g);
    const auto rep = solve_market_price_of_risk(sig, DriftCurve(m), s);
    CHECK(rep.gamma.gamma[0] == doctest::Approx(0.3).epsilon(1e-10));
    CHECK(rep.gamma.gamma[1] == doctest::Approx(0.1).epsilon(1e-10));
  }
  SUBCASE("minimum norm among kernel perturbations") {
    const VolatilityOperator sig({s1, s1, support::hump(g, 0.01, 0.5)});
    const std::vector<double> g_true{0.4, 0.2, -0.3};
    const Curve m = sig.apply(g_true, g);
    const auto rep = solve_market_price_of_risk(sig, DriftCurve(m), s);
    const auto& gm = rep.gamma.gamma;
    CHECK(rep.retained_rank == 2);
    CHECK(gm[0] == doctest::Approx(0.3).epsilon(1e-8));
    CHECK(gm[1] == doctest::Approx(0.3).epsilon(1e-8));
    CHECK(gm[2] == doctest::Approx(-0.3).epsilon(1e-8));
    std::mt19937_64 rng(5);
    std::normal_distribution<double> N;
    for (int k = 0; k < 50; ++k) {
      const double a = N(rng);
      const std::vector<double> other{gm[0] + a, gm[1] - a, gm[2]};
      CHECK(rep.gamma.norm_squared() <= MarketPriceOfRisk{other}.norm_squared() + 1e-15);
    }
  }
}

TEST_CASE("Girsanov density") {
  const std::size_t K = 64, N = 10000;
  const double T = 1.0, dt = T / K;
  SUBCASE("zero gamma gives xi = 1") {
    const auto dw = draw_increments(1, 0, K, 1, dt);
    for (double x : girsanov_density_path(constant_gamma(K, {0.0}), dw, dt)) CHECK(x == 1.0);
    const auto q = q_brownian_increments(dw, constant_gamma(K, {0.0}), dt);
    for (std::size_t k = 0; k < K; ++k) CHECK(q(k, 0) == dw(k, 0));
  }
  SUBCASE("constant gamma 0.3: lognormal law under P") {
    const auto gam = constant_gamma(K, {0.3});
    std::vector<double> xi(N), lx(N), wt(N), wxi(N);
    std::size_t below = 0;
    for (std::size_t p = 0; p < N; ++p) {
      const auto dw = draw_increments(42, p, K, 1, dt);
      xi[p] = girsanov_density_path(gam, dw, dt).back();
      lx[p] = std::log(xi[p]);
      const auto q = q_brownian_increments(dw, gam, dt);
      wt[p] = q.cumulative(0, K);
      wxi[p] = xi[p] * wt[p];
      if (lx[p] < -0.045) ++below;
    }
    const MeanSE m = mean_se(xi);
    CHECK(std::abs(m.mean - 1.0) <= 3.0 * m.se);
    const MeanSE ml = mean_se(lx);
    const double var = ml.se * ml.se * N;
    // sample variance of a Gaussian has relative SE sqrt(2/N)
    CHECK(std::abs(var - 0.09) <= 3.0 * 0.09 * std::sqrt(2.0 / N));
    CHECK(std::abs(ml.mean + 0.045) <= 3.0 * ml.se);
    // median of a Gaussian equals its mean
    const double frac = static_cast<double>(below) / N;
    CHECK(std::abs(frac - 0.5) <= 3.0 * 0.5 / std::sqrt(static_cast<double>(N)));
    const MeanSE mw = mean_se(wt);
    CHECK(std::abs(mw.mean - 0.3) <= 3.0 * mw.se);
    const MeanSE mq = mean_se(wxi);
    CHECK(std::abs(mq.mean) <= 3.0 * mq.se);
  }
  SUBCASE("P and Q increments invert each other") {
    const auto gam = constant_gamma(K, {0.2});
    const auto dw = draw_increments(3, 9, K, 1, dt);
    const auto back = p_brownian_increments(q_brownian_increments(dw, gam, dt), gam, dt);
    for (std::size_t k = 0; k < K; ++k) CHECK(back(k, 0) == doctest::Approx(dw(k, 0)).epsilon(1e-14));
  }
}

TEST_CASE("strong arbitrage diagnostic") {
  const std::size_t K = 100;
  const double dt = 0.01;
  std::vector<GammaPath> zero(10, constant_gamma(K, {0.0, 0.0}));
  const auto z = strong_arbitrage_diagnostic(zero, dt);
  for (double m : z.exp_moments) CHECK(m == 1.0);
  CHECK_FALSE(z.warn);
  std::vector<GammaPath> c(10, constant_gamma(K, {0.3}));
  const auto r = strong_arbitrage_diagnostic(c, dt);
  CHECK(r.max_integral == doctest::Approx(0.09).epsilon(1e-12));
  CHECK(r.exp_moments[1] == doctest::Approx(std::exp(0.18)).epsilon(1e-12));
  CHECK(r.exp_moments[1] == doctest::Approx(1.1972).epsilon(1e-4));
  CHECK_FALSE(r.warn);
}

TEST_CASE("schedules") {
  const auto g = support::standard_grid();
  const auto det = support::one_factor(g, 0.01, 1.0, 0.2);
  CHECK(det.is_deterministic());
  const MarketState a = det.sample(0.3);
  const MarketState b = det.sample(0.3, Curve::constant(g, 1.0));
  CHECK(a.gamma.gamma == b.gamma.gamma);
  CHECK(a.drift.curve().at_node(0) == 0.0);
  const auto sd = CoefficientSchedule::state_dependent([g](double, const Curve& p) {
    return state_from_gamma(VolatilityOperator({p.at_node(0) * support::hump(g, 0.01, 1.0)}), {0.1}, g);
  });
  CHECK_FALSE(sd.is_deterministic());
  CHECK_THROWS_AS(sd.sample(0.0), Error);
  CHECK(sd.sample(0.0, Curve::constant(g, 0.5)).sigma[0].at_node(64) ==
        doctest::Approx(0.5 * 0.01 * g.node(64) * std::exp(-g.node(64))));
}
