#pragma once

#include <string>

namespace bondlab {

enum class UtilityFamily { Quadratic, Exponential, Power, Log };

/// Concave utility with marginal inverse I = (U')^{-1}.
///   quadratic   U = mu x - x^2/2          a = -inf, B = R
///   exponential U = 1 - exp(-mu x)/mu     a = -inf, B = ]0, inf[   (mu > 0)
///   power       U = x^mu / mu             a = 0,    B = ]0, inf[   (mu < 1, mu != 0)
///   log         U = ln x                  a = 0,    B = ]0, inf[
class Utility {
 public:
  static Utility quadratic(double mu);
  static Utility exponential(double mu);
  static Utility power(double mu);
  static Utility log();

  UtilityFamily family() const noexcept { return family_; }
  double mu() const noexcept { return mu_; }
  std::string name() const;

  /// Lower wealth bound a (-inf or 0).
  double lower_bound() const noexcept;
  bool in_domain(double x) const noexcept;
  bool in_marginal_range(double y) const noexcept;
  /// Exponent r of the growth estimate |I(y)| + |y I'(y)| <= C (|y|^r + |y|^-r).
  double growth_exponent() const noexcept;

  double U(double x) const;
  double marginal(double x) const;
  double inverse_marginal(double y) const;
  double inverse_marginal_derivative(double y) const;

 private:
  Utility(UtilityFamily f, double mu) : family_(f), mu_(mu) {}
  UtilityFamily family_;
  double mu_;
};

double inverse_marginal(const Utility& u, double y);

/// Y_t = E_Q[I(lambda xi_T) | F_t] and y_t = -E_Q[lambda xi_T I'(lambda xi_T) | F_t] for
/// deterministic gamma. Under Q, ln(xi_T / xi_t) ~ N(+G/2, G) with G = int_t^T ||gamma||^2.
struct ConditionalKernel {
  double Y = 0.0;
  double y = 0.0;
};

ConditionalKernel conditional_kernel(const Utility& u, double lambda_hat, double xi_t,
                                     double remaining_variance);

}  // namespace bondlab
