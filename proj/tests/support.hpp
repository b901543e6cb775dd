#pragma once

#include <cmath>
#include <vector>

#include "bondlab/curve_space.hpp"
#include "bondlab/dynamics.hpp"
#include "bondlab/market_model.hpp"

namespace support {

using namespace bondlab;

inline MaturityGrid standard_grid() { return MaturityGrid(10.0, 513); }

inline Curve exp_curve(const MaturityGrid& g, double r) {
  return Curve::sample(g, [r](double x) { return std::exp(-r * x); });
}

/// sigma(x) = c x e^{-b x}
inline Curve hump(const MaturityGrid& g, double c, double b) {
  return Curve::sample(g, [c, b](double x) { return c * x * std::exp(-b * x); });
}

inline SimConfig config(const MaturityGrid& g, std::size_t steps, double T = 1.0) {
  SimConfig c;
  c.grid = g;
  c.horizon = T;
  c.n_steps = steps;
  c.record_stride = 1;
  c.workers = 1;
  return c;
}

inline CoefficientSchedule one_factor(const MaturityGrid& g, double c, double b, double gamma) {
  return CoefficientSchedule::constant(
      state_from_gamma(VolatilityOperator({hump(g, c, b)}), {gamma}, g));
}

inline CoefficientSchedule zero_coefficients(const MaturityGrid& g, std::size_t factors = 1) {
  std::vector<Curve> f(factors, Curve::zero(g));
  return CoefficientSchedule::constant(
      state_from_gamma(VolatilityOperator(std::move(f)), std::vector<double>(factors, 0.0), g));
}

}  // namespace support
