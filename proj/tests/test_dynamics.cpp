#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "bondlab/dynamics.hpp"
#include "bondlab/error.hpp"
#include "bondlab/noise.hpp"
#include "support.hpp"

using namespace bondlab;

namespace {

double simpson(const std::function<double(double)>& f, double a, double b, int m = 2000) {
  const double h = (b - a) / m;
  double s = f(a) + f(b);
  for (int i = 1; i < m; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + h * i);
  return s * h / 3.0;
}

}  // namespace

TEST_CASE("zero coefficients translate the initial curve") {
  const auto g = support::standard_grid();
  const Curve p0 = support::exp_curve(g, 0.05);
  auto cfg = support::config(g, 256);
  const MildSimulator sim(p0, support::zero_coefficients(g), cfg);
  const CurvePath path = sim.run_path(0);
  double worst = 0.0;
  const std::size_t inside = g.floor_index(g.x_max() - cfg.horizon) + 1;
  for (std::size_t k = 0; k <= cfg.n_steps; ++k)
    for (std::size_t j = 0; j < inside; ++j)
      worst = std::max(worst, std::abs(path.state(k).at_node(j) - std::exp(-0.05 * (path.times[k] + g.node(j)))));
  CHECK(worst <= g.dx() * g.dx() / 8.0 * 0.0025 + 1e-15);
  for (double x : path.xi) CHECK(x == 1.0);
}

TEST_CASE("zero rates stay flat") {
  const auto g = support::standard_grid();
  const MildSimulator sim(Curve::constant(g, 1.0), support::zero_coefficients(g), support::config(g, 64));
  const CurvePath path = sim.run_path(0);
  for (const auto& p : path.states)
    for (std::size_t j = 0; j < g.size(); ++j) CHECK(p.at_node(j) == 1.0);
  CHECK(boundary_residual(path) == 0.0);
  const auto roll = simulate_rollover(path, 2.0);
  for (double u : roll.units) CHECK(u == 1.0);
  for (double v : roll.value) CHECK(v == 1.0);
}

TEST_CASE("rates from curves") {
  const auto g = support::standard_grid();
  CHECK(spot_rate(Curve::constant(g, 1.0)) == 0.0);
  CHECK(spot_rate(support::exp_curve(g, 0.05)) == doctest::Approx(0.05).epsilon(1e-4));
  CHECK(std::abs(spot_rate(support::exp_curve(g, 0.05)) - 0.05) <= 0.05 * 0.05 * g.dx() * g.dx());
  const Curve affine = Curve::sample(g, [](double x) { return std::exp(-0.02 * x - 0.005 * x * x); });
  CHECK(std::abs(spot_rate(affine) - 0.02) <= g.dx() * g.dx());
  CHECK(std::abs(forward_rate(affine, 3.0) - 0.05) <= 0.01 * g.dx());
  CHECK_THROWS_AS(spot_rate(Curve::zero(g)), Error);
}

TEST_CASE("deterministic flat forward: boundary and rollover") {
  const auto g = support::standard_grid();
  const MildSimulator sim(support::exp_curve(g, 0.05), support::zero_coefficients(g), support::config(g, 256));
  const CurvePath path = sim.run_path(0);
  CHECK(std::abs(path.final_state().at_node(0) - std::exp(-0.05)) <= g.dx() * g.dx() / 8.0 * 0.0025);
  CHECK(boundary_residual(path) <= 1e-6);
  const auto bank = simulate_rollover(path, 0.0);
  CHECK(std::abs(bank.units.back() - std::exp(0.05)) <= 1e-3);
  for (double v : bank.value) CHECK(std::abs(v - 1.0) <= 1e-6);
  for (const auto& p : undiscount(path)) CHECK(std::abs(p.at_node(0) - 1.0) <= 4e-16);
}

TEST_CASE("initial curve and configuration validation") {
  const auto g = support::standard_grid();
  const Curve bad = Curve::constant(g, 0.9);
  try {
    MildSimulator(bad, support::zero_coefficients(g), support::config(g, 16));
    FAIL("expected NonPositiveInitialCurve");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NonPositiveInitialCurve);
  }
  auto cfg = support::config(g, 16);
  cfg.max_maturity = 9.5;
  try {
    MildSimulator(Curve::constant(g, 1.0), support::zero_coefficients(g), cfg);
    FAIL("expected ConfigInvalid");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ConfigInvalid);
    CHECK(e.field() == "grid.x_max");
  }
  cfg.max_maturity = 0.0;
  cfg.record_stride = 3;
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("one factor: Q-martingale, positivity and log variance") {
  const auto g = support::standard_grid();
  const Curve p0 = support::exp_curve(g, 0.05);
  auto cfg = support::config(g, 128);
  cfg.record_stride = 128;
  cfg.seed = 17;
  const std::size_t N = 4000;
  const std::vector<double> xs{0.5, 1.0, 2.0, 4.0, 8.0};

  cfg.measure = Measure::Q;
  const MildSimulator simq(p0, support::one_factor(g, 0.01, 1.0, 0.2), cfg);
  std::vector<std::vector<double>> v(xs.size(), std::vector<double>(N));
  std::vector<double> lp(N);
  double lowest = INFINITY;
  for (std::size_t p = 0; p < N; ++p) {
    const CurvePath path = simq.run_path(p);
    for (std::size_t m = 0; m < xs.size(); ++m) v[m][p] = path.final_state()(xs[m]);
    lp[p] = std::log(path.final_state()(2.0));
    lowest = std::min(lowest, min_value(path, g.x_max() - 1.0));
  }
  CHECK(lowest > 0.0);
  for (std::size_t m = 0; m < xs.size(); ++m) {
    const MeanSE ms = mean_se(v[m]);
    CHECK(std::abs(ms.mean - p0(1.0 + xs[m])) <= 3.0 * ms.se);
  }
  // Var ln p_T(x) = int_0^T sigma(T - s + x)^2 ds
  const double x = 2.0;
  const double expect = simpson([x](double s) {
    const double y = 1.0 - s + x;
    return std::pow(0.01 * y * std::exp(-y), 2);
  }, 0.0, 1.0);
  const MeanSE ml = mean_se(lp);
  const double var = ml.se * ml.se * N;
  CHECK(std::abs(var - expect) <= 3.0 * expect * std::sqrt(2.0 / N));
}

TEST_CASE("boundary residual is first order in dt") {
  const auto g = support::standard_grid();
  const Curve p0 = support::exp_curve(g, 0.05);
  const auto sched = support::one_factor(g, 0.01, 1.0, 0.2);
  double prev = 0.0;
  for (std::size_t K : {64u, 128u, 256u}) {
    double sum = 0.0;
    for (std::size_t p = 0; p < 20; ++p) {
      const BrownianIncrements fine = draw_increments(5, p, 256, 1, 1.0 / 256);
      const MildSimulator sim(p0, sched, support::config(g, K));
      sum += boundary_residual(sim.run(coarsen(fine, 256 / K)));
    }
    if (prev > 0.0) {
      CHECK(prev / sum > 1.6);
      CHECK(prev / sum < 2.5);
    }
    prev = sum;
  }
}

TEST_CASE("determinism across worker counts") {
  const auto g = support::standard_grid();
  auto cfg = support::config(g, 32);
  cfg.record_stride = 32;
  const MildSimulator sim(support::exp_curve(g, 0.03), support::one_factor(g, 0.01, 1.0, 0.2), cfg);
  std::vector<double> a(40), b(40);
  parallel_paths(40, 1, [&](std::size_t p) { a[p] = sim.run_path(p).final_state()(1.5); });
  parallel_paths(40, 4, [&](std::size_t p) { b[p] = sim.run_path(p).final_state()(1.5); });
  CHECK(a == b);
  CHECK(mean_se(a).mean == mean_se(b).mean);
}

TEST_CASE("moment diagnostic") {
  const auto g = support::standard_grid();
  auto cfg = support::config(g, 32);
  cfg.record_stride = 4;
  const Curve p0 = support::exp_curve(g, 0.05);
  const MildSimulator sim(p0, support::one_factor(g, 0.01, 1.0, 0.2), cfg);
  std::vector<PathSupNorms> sups;
  for (std::size_t p = 0; p < 200; ++p)
    sups.push_back(path_sup_norms(sim.run_path(p), p0, SobolevIndex(1), 9.0));
  const std::vector<int> us{1, 2, 4, 8};
  const MomentReport r = moment_diagnostic(sups, us);
  CHECK(r.stable);
  CHECK(r.empirical_A >= 1.0);
  // the ratio q is close to 1, so its moments are close to 1
  for (double q : r.q) CHECK(q == doctest::Approx(1.0).epsilon(0.01));
  CHECK_THROWS_AS(moment_diagnostic(std::span(sups).first(50), us), Error);
}
