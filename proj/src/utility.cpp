#include "bondlab/utility.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "bondlab/error.hpp"

namespace bondlab {

Utility Utility::quadratic(double mu) {
  if (!std::isfinite(mu)) fail(ErrorKind::ConfigInvalid, "quadratic mu must be finite", "utility.mu");
  return Utility(UtilityFamily::Quadratic, mu);
}

Utility Utility::exponential(double mu) {
  if (!(mu > 0.0) || !std::isfinite(mu))
    fail(ErrorKind::ConfigInvalid, "exponential utility needs mu > 0", "utility.mu");
  return Utility(UtilityFamily::Exponential, mu);
}

Utility Utility::power(double mu) {
  if (!(mu < 1.0) || mu == 0.0 || !std::isfinite(mu))
    fail(ErrorKind::ConfigInvalid, "power utility needs mu < 1 and mu != 0", "utility.mu");
  return Utility(UtilityFamily::Power, mu);
}

Utility Utility::log() { return Utility(UtilityFamily::Log, 0.0); }

std::string Utility::name() const {
  std::ostringstream os;
  switch (family_) {
    case UtilityFamily::Quadratic: os << "quadratic(mu=" << mu_ << ")"; break;
    case UtilityFamily::Exponential: os << "exponential(mu=" << mu_ << ")"; break;
    case UtilityFamily::Power: os << "power(mu=" << mu_ << ")"; break;
    case UtilityFamily::Log: os << "log"; break;
  }
  return os.str();
}

double Utility::lower_bound() const noexcept {
  switch (family_) {
    case UtilityFamily::Quadratic:
    case UtilityFamily::Exponential:
      return -std::numeric_limits<double>::infinity();
    default:
      return 0.0;
  }
}

bool Utility::in_domain(double x) const noexcept { return std::isfinite(x) && x > lower_bound(); }

bool Utility::in_marginal_range(double y) const noexcept {
  if (!std::isfinite(y)) return false;
  return family_ == UtilityFamily::Quadratic || y > 0.0;
}

double Utility::growth_exponent() const noexcept {
  switch (family_) {
    case UtilityFamily::Power: return 1.0 / (1.0 - mu_);
    default: return 1.0;
  }
}

double Utility::U(double x) const {
  if (!in_domain(x)) fail(ErrorKind::OutOfDomain, "wealth outside the utility domain");
  switch (family_) {
    case UtilityFamily::Quadratic: return mu_ * x - 0.5 * x * x;
    case UtilityFamily::Exponential: return 1.0 - std::exp(-mu_ * x) / mu_;
    case UtilityFamily::Power: return std::pow(x, mu_) / mu_;
    case UtilityFamily::Log: return std::log(x);
  }
  return 0.0;
}

double Utility::marginal(double x) const {
  if (!in_domain(x)) fail(ErrorKind::OutOfDomain, "wealth outside the utility domain");
  switch (family_) {
    case UtilityFamily::Quadratic: return mu_ - x;
    case UtilityFamily::Exponential: return std::exp(-mu_ * x);
    case UtilityFamily::Power: return std::pow(x, mu_ - 1.0);
    case UtilityFamily::Log: return 1.0 / x;
  }
  return 0.0;
}

double Utility::inverse_marginal(double y) const {
  if (!in_marginal_range(y)) fail(ErrorKind::OutOfDomain, "argument outside the range of U'");
  switch (family_) {
    case UtilityFamily::Quadratic: return mu_ - y;
    case UtilityFamily::Exponential: return -std::log(y) / mu_;
    case UtilityFamily::Power: return std::pow(y, 1.0 / (mu_ - 1.0));
    case UtilityFamily::Log: return 1.0 / y;
  }
  return 0.0;
}

double Utility::inverse_marginal_derivative(double y) const {
  if (!in_marginal_range(y)) fail(ErrorKind::OutOfDomain, "argument outside the range of U'");
  switch (family_) {
    case UtilityFamily::Quadratic: return -1.0;
    case UtilityFamily::Exponential: return -1.0 / (mu_ * y);
    case UtilityFamily::Power: {
      const double b = 1.0 / (mu_ - 1.0);
      return b * std::pow(y, b - 1.0);
    }
    case UtilityFamily::Log: return -1.0 / (y * y);
  }
  return 0.0;
}

double inverse_marginal(const Utility& u, double y) { return u.inverse_marginal(y); }

ConditionalKernel conditional_kernel(const Utility& u, double lambda_hat, double xi_t,
                                     double remaining_variance) {
  const double G = remaining_variance;
  const double c = lambda_hat * xi_t;
  ConditionalKernel k;
  switch (u.family()) {
    case UtilityFamily::Log:
      if (!(c > 0.0)) fail(ErrorKind::OutOfDomain, "log kernel needs lambda xi > 0");
      k.Y = 1.0 / c;
      k.y = 1.0 / c;
      break;
    case UtilityFamily::Quadratic:
      k.y = c * std::exp(G);
      k.Y = u.mu() - k.y;
      break;
    case UtilityFamily::Exponential:
      if (!(c > 0.0)) fail(ErrorKind::OutOfDomain, "exponential kernel needs lambda xi > 0");
      k.Y = -(std::log(c) + 0.5 * G) / u.mu();
      k.y = 1.0 / u.mu();
      break;
    case UtilityFamily::Power: {
      if (!(c > 0.0)) fail(ErrorKind::OutOfDomain, "power kernel needs lambda xi > 0");
      const double b = 1.0 / (u.mu() - 1.0);
      k.Y = std::pow(c, b) * std::exp(0.5 * b * G + 0.5 * b * b * G);
      k.y = -b * k.Y;
      break;
    }
  }
  return k;
}

}  // namespace bondlab
