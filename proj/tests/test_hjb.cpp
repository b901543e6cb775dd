#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "bondlab/error.hpp"
#include "bondlab/hjb.hpp"

using namespace bondlab;

namespace {

// ||gamma_t||^2 = 0.04 + 0.02 t and its integral over [t, T]
double g2(double t) { return 0.04 + 0.02 * t; }
double g2_remaining(double t, double T) { return 0.04 * (T - t) + 0.01 * (T * T - t * t); }

HjbGrid grid(double lo, double hi) {
  HjbGrid g;
  g.w_min = lo;
  g.w_max = hi;
  g.n_w = 101;
  g.dt = 1e-3;
  return g;
}

}  // namespace

TEST_CASE("zero market price of risk freezes the terminal layer") {
  for (const Utility& u : {Utility::log(), Utility::power(0.5), Utility::exponential(1.0), Utility::quadratic(5.0)}) {
    const auto vg = solve_reduced_hjb(u, [](double) { return 0.0; }, 1.0, grid(0.5, 3.0));
    for (std::size_t k = 0; k < vg.t.size(); k += 100)
      for (std::size_t j = 0; j < vg.w.size(); ++j) CHECK(vg.F[k][j] == u.U(vg.w[j]));
    const std::vector<double> zero{0.0};
    CHECK(optimal_control_from_F(vg, zero, 0.3, 1.7)[0] == 0.0);
  }
}

TEST_CASE("log utility: F = ln w + 1/2 int_t^T ||gamma||^2") {
  const double T = 1.0;
  const auto vg = solve_reduced_hjb(Utility::log(), g2, T, grid(0.5, 3.0));
  CHECK(vg.clamps == 0);
  for (std::size_t j = 0; j < vg.w.size(); ++j) CHECK(vg.F.back()[j] == std::log(vg.w[j]));
  double worst = 0.0;
  for (std::size_t k = 0; k < vg.t.size(); ++k)
    for (std::size_t j = 0; j < vg.w.size(); ++j)
      worst = std::max(worst, std::abs(vg.F[k][j] - std::log(vg.w[j]) - 0.5 * g2_remaining(vg.t[k], T)));
  CHECK(worst <= 1e-3);
  const std::vector<double> gamma{0.2, -0.1};
  for (double t : {0.0, 0.4, 0.9})
    for (double w : {0.7, 1.0, 2.2}) {
      const auto x = optimal_control_from_F(vg, gamma, t, w);
      CHECK(x[0] == doctest::Approx(0.2 * w).epsilon(1e-2));
      CHECK(x[1] == doctest::Approx(-0.1 * w).epsilon(1e-2));
    }
  // value at the initial wealth equals E_P[ln X_hat] = ln v + G / 2
  CHECK(vg.value(0.0, 1.5) == doctest::Approx(std::log(1.5) + 0.5 * g2_remaining(0.0, T)).epsilon(1e-3));
}

TEST_CASE("power utility: F = h(t) w^mu / mu") {
  const double mu = 0.5, T = 1.0;
  const auto vg = solve_reduced_hjb(Utility::power(mu), g2, T, grid(0.5, 3.0));
  // h(t) = exp(-mu / (2 (mu - 1)) int_t^T ||gamma||^2)
  double worst = 0.0;
  for (std::size_t k = 0; k < vg.t.size(); ++k) {
    const double h = std::exp(-mu / (2.0 * (mu - 1.0)) * g2_remaining(vg.t[k], T));
    for (std::size_t j = 0; j < vg.w.size(); ++j)
      worst = std::max(worst, std::abs(vg.F[k][j] - h * std::pow(vg.w[j], mu) / mu));
  }
  CHECK(worst <= 2e-3);
  const std::vector<double> gamma{0.2};
  for (double w : {0.8, 1.5, 2.5})
    CHECK(optimal_control_from_F(vg, gamma, 0.2, w)[0] == doctest::Approx(0.2 * w / (1.0 - mu)).epsilon(1e-2));
}

TEST_CASE("exponential utility: monotone, concave, control flat in wealth") {
  const double mu = 1.0;
  const auto vg = solve_reduced_hjb(Utility::exponential(mu), g2, 1.0, grid(-1.0, 3.0));
  for (std::size_t k = 0; k < vg.t.size(); k += 50) {
    const auto fw = vg.F_w(k);
    const auto fww = vg.F_ww(k);
    for (std::size_t j = 1; j + 1 < vg.w.size(); ++j) {
      CHECK(fw[j] > 0.0);
      CHECK(fww[j] < 0.0);
    }
  }
  const std::vector<double> gamma{0.25};
  for (double t : {0.0, 0.5})
    for (double w : {-0.5, 0.5, 1.5, 2.5})
      CHECK(optimal_control_from_F(vg, gamma, t, w)[0] == doctest::Approx(0.25 / mu).epsilon(1e-2));
}

TEST_CASE("validation and degenerate concavity") {
  auto kind = [](auto&& f) {
    try {
      f();
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::ConfigInvalid;
  };
  HjbGrid g = grid(0.5, 3.0);
  g.n_w = 4;
  CHECK(kind([&] { solve_reduced_hjb(Utility::log(), g2, 1.0, g); }) == ErrorKind::ConfigInvalid);
  CHECK(kind([&] { solve_reduced_hjb(Utility::log(), g2, 1.0, grid(0.0, 3.0)); }) == ErrorKind::OutOfDomain);
  g = grid(0.5, 3.0);
  g.dt = 0.3;
  CHECK(kind([&] { solve_reduced_hjb(Utility::log(), g2, 1.0, g); }) == ErrorKind::ConfigInvalid);
  // exp(-40) curvature sits below the concavity floor on most of the grid
  g = grid(20.0, 60.0);
  g.eps_conv = 1e-12;
  CHECK(kind([&] { solve_reduced_hjb(Utility::exponential(1.0), g2, 1.0, g); }) == ErrorKind::DegenerateConcavity);
  const auto vg = solve_reduced_hjb(Utility::log(), g2, 1.0, grid(0.5, 3.0));
  const std::vector<double> gamma{0.2};
  CHECK(kind([&] { optimal_control_from_F(vg, gamma, 0.5, 5.0); }) == ErrorKind::OutOfDomain);
}
