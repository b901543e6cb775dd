#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "bondlab/utility.hpp"

namespace bondlab {

struct HjbGrid {
  double w_min = 0.25;
  double w_max = 4.0;
  std::size_t n_w = 101;
  double dt = 1e-3;
  double eps_conv = 1e-12;
  /// Safety factor of the explicit step bound dt <= cfl dw^2 min F_ww^2 / (|gamma|^2 F_w^2).
  double cfl = 0.8;
};

/// ||gamma_t||^2 as a function of t.
using GammaSquared = std::function<double(double)>;

/// Value function on layers t_0 = 0 < ... < t_n = T and nodes w_j.
struct ValueGrid {
  std::vector<double> t;
  std::vector<double> w;
  std::vector<std::vector<double>> F;  ///< F[layer][node]
  std::size_t clamps = 0;
  std::size_t substeps = 0;
  double eps_conv = 1e-12;

  double dw() const { return w[1] - w[0]; }
  std::vector<double> F_w(std::size_t layer) const;
  std::vector<double> F_ww(std::size_t layer) const;
  /// Linear in t and w.
  double value(double t, double w) const;
  double F_w_at(double t, double w) const;
  double F_ww_at(double t, double w) const;
  bool contains(double t, double w) const;
};

/// Explicit backward march of F_t F_ww = 1/2 ||gamma_t||^2 F_w^2 from F(T, w) = U(w).
ValueGrid solve_reduced_hjb(const Utility& u, const GammaSquared& gamma2, double horizon,
                            const HjbGrid& grid);

/// x^i = -gamma^i F_w / F_ww at (t, w).
std::vector<double> optimal_control_from_F(const ValueGrid& vg, std::span<const double> gamma,
                                           double t, double w);

}  // namespace bondlab
