#include "bondlab/curve_space.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "bondlab/error.hpp"

namespace bondlab {

namespace {

// Relative slack when deciding whether a location sits on the last node.
constexpr double kEdgeSlack = 1e-12;

double sobolev_square(std::span<const double> g, double dx, int order, std::size_t n) {
  double total = 0.0;
  std::vector<double> work(g.begin(), g.end());
  std::vector<double> sq(n);
  for (std::size_t j = 0; j < n; ++j) sq[j] = work[j] * work[j];
  total += trapezoid(sq, dx, n);
  for (int k = 1; k <= order; ++k) {
    work = fd_derivative(work, dx);
    for (std::size_t j = 0; j < n; ++j) sq[j] = work[j] * work[j];
    total += trapezoid(sq, dx, n);
  }
  return total;
}

}  // namespace

MaturityGrid::MaturityGrid(double x_max, std::size_t n_points) : x_max_(x_max), n_(n_points) {
  if (!(x_max > 0.0) || !std::isfinite(x_max))
    fail(ErrorKind::ConfigInvalid, "grid x_max must be positive and finite", "grid.x_max");
  if (n_points < 4)
    fail(ErrorKind::ConfigInvalid, "grid needs at least 4 points", "grid.n_points");
  dx_ = x_max / static_cast<double>(n_points - 1);
}

std::size_t MaturityGrid::floor_index(double x) const noexcept {
  if (!(x > 0.0)) return 0;
  double r = x / dx_;
  auto j = static_cast<std::size_t>(std::floor(r + kEdgeSlack * (1.0 + r)));
  return std::min(j, n_ - 1);
}

SobolevIndex::SobolevIndex(int s) : order(s) {
  if (s < 1) fail(ErrorKind::ConfigInvalid, "Sobolev order must be >= 1", "sobolev_index");
}

Curve::Curve(MaturityGrid grid, std::vector<double> g, double a)
    : grid_(grid), g_(std::move(g)), a_(a) {
  if (g_.size() != grid_.size())
    fail(ErrorKind::GridMismatch, "curve sample count " + std::to_string(g_.size()) +
                                      " does not match grid size " +
                                      std::to_string(grid_.size()));
  if (!std::isfinite(a_)) fail(ErrorKind::ConfigInvalid, "curve constant part is not finite");
  for (double v : g_)
    if (!std::isfinite(v)) fail(ErrorKind::ConfigInvalid, "curve has non-finite samples");
}

Curve Curve::constant(const MaturityGrid& grid, double a) {
  return Curve(grid, std::vector<double>(grid.size(), 0.0), a);
}

Curve Curve::sample(const MaturityGrid& grid, const std::function<double(double)>& f,
                    double a) {
  std::vector<double> g(grid.size());
  for (std::size_t j = 0; j < g.size(); ++j) g[j] = f(grid.node(j)) - a;
  return Curve(grid, std::move(g), a);
}

double Curve::operator()(double x) const noexcept {
  return interpolate(g_, grid_.dx(), x) + a_;
}

std::vector<double> Curve::values() const {
  std::vector<double> v(g_);
  for (double& e : v) e += a_;
  return v;
}

std::vector<double> fd_derivative(std::span<const double> v, double dx) {
  const std::size_t n = v.size();
  std::vector<double> d(n);
  if (n < 3) return std::vector<double>(n, 0.0);
  const double h2 = 2.0 * dx;
  d[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / h2;
  for (std::size_t j = 1; j + 1 < n; ++j) d[j] = (v[j + 1] - v[j - 1]) / h2;
  d[n - 1] = (3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) / h2;
  return d;
}

double trapezoid(std::span<const double> v, double dx, std::size_t n) {
  if (n < 2) return 0.0;
  double s = 0.5 * (v[0] + v[n - 1]);
  for (std::size_t j = 1; j + 1 < n; ++j) s += v[j];
  return s * dx;
}

double interpolate(std::span<const double> v, double dx, double x) noexcept {
  const std::size_t n = v.size();
  if (!(x > 0.0)) return v[0];
  const double r = x / dx;
  const double last = static_cast<double>(n - 1);
  if (r >= last) return r <= last * (1.0 + kEdgeSlack) ? v[n - 1] : 0.0;
  const auto j = static_cast<std::size_t>(r);
  const double alpha = r - static_cast<double>(j);
  return (1.0 - alpha) * v[j] + alpha * v[j + 1];
}

double derivative_at(std::span<const double> v, double dx, double x) noexcept {
  const std::size_t n = v.size();
  if (n < 3) return 0.0;
  const double h2 = 2.0 * dx;
  auto d = [&](std::size_t j) {
    if (j == 0) return (-3.0 * v[0] + 4.0 * v[1] - v[2]) / h2;
    if (j == n - 1) return (3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) / h2;
    return (v[j + 1] - v[j - 1]) / h2;
  };
  if (!(x > 0.0)) return d(0);
  const double r = x / dx;
  const double last = static_cast<double>(n - 1);
  if (r >= last) return r <= last * (1.0 + kEdgeSlack) ? d(n - 1) : 0.0;
  const auto j = static_cast<std::size_t>(r);
  const double alpha = r - static_cast<double>(j);
  return (1.0 - alpha) * d(j) + alpha * d(j + 1);
}

double sobolev_norm(const Curve& f, SobolevIndex s) {
  return std::sqrt(sobolev_square(f.g(), f.grid().dx(), s.order, f.size()) + f.a() * f.a());
}

double sobolev_norm(const Curve& f, SobolevIndex s, double x_hi) {
  const std::size_t n = f.grid().floor_index(x_hi) + 1;
  return std::sqrt(sobolev_square(f.g(), f.grid().dx(), s.order, n) + f.a() * f.a());
}

double inner_product(const Curve& f, const Curve& h, SobolevIndex s) {
  require_same_grid(f, h);
  const std::size_t n = f.size();
  const double dx = f.grid().dx();
  std::vector<double> u(f.g().begin(), f.g().end());
  std::vector<double> w(h.g().begin(), h.g().end());
  std::vector<double> prod(n);
  double total = 0.0;
  for (int k = 0; k <= s.order; ++k) {
    if (k > 0) {
      u = fd_derivative(u, dx);
      w = fd_derivative(w, dx);
    }
    for (std::size_t j = 0; j < n; ++j) prod[j] = u[j] * w[j];
    total += trapezoid(prod, dx, n);
  }
  return total + f.a() * h.a();
}

void check_atoms(std::span<const DualAtom> theta, const MaturityGrid& grid, SobolevIndex s) {
  for (const auto& atom : theta) {
    if (atom.location < 0.0 || atom.location > grid.x_max() * (1.0 + kEdgeSlack))
      fail(ErrorKind::AtomBeyondGrid,
           "atom at " + std::to_string(atom.location) + " outside [0, " +
               std::to_string(grid.x_max()) + "]");
    if (atom.order == AtomOrder::Derivative && s.order < 2)
      fail(ErrorKind::OrderUnsupported, "derivative atoms need Sobolev order >= 2");
  }
}

double pair(std::span<const DualAtom> theta, const Curve& f, SobolevIndex s) {
  check_atoms(theta, f.grid(), s);
  double total = 0.0;
  for (const auto& atom : theta) {
    if (atom.order == AtomOrder::Dirac)
      total += atom.weight * f(atom.location);
    else
      total += atom.weight * derivative_at(f.g(), f.grid().dx(), atom.location);
  }
  return total;
}

double pair_product(std::span<const DualAtom> theta, const Curve& f, const Curve& h,
                    SobolevIndex s) {
  require_same_grid(f, h);
  bool has_derivative = false;
  for (const auto& atom : theta) has_derivative |= atom.order == AtomOrder::Derivative;
  if (has_derivative) return pair(theta, multiply(f, h), s);
  check_atoms(theta, f.grid(), s);
  const double dx = f.grid().dx();
  const std::size_t n = f.size();
  const double last = static_cast<double>(n - 1);
  double total = 0.0;
  for (const auto& atom : theta) {
    const double r = atom.location / dx;
    double v;
    if (r >= last) {
      v = r <= last * (1.0 + kEdgeSlack) ? f.at_node(n - 1) * h.at_node(n - 1) : f.a() * h.a();
    } else {
      const auto j = static_cast<std::size_t>(std::max(r, 0.0));
      const double alpha = std::max(r, 0.0) - static_cast<double>(j);
      v = (1.0 - alpha) * f.at_node(j) * h.at_node(j) +
          alpha * f.at_node(j + 1) * h.at_node(j + 1);
    }
    total += atom.weight * v;
  }
  return total;
}

Curve translate(const Curve& f, double t) {
  if (t < 0.0) fail(ErrorKind::ConfigInvalid, "translation needs t >= 0");
  if (t == 0.0) return f;
  const auto& grid = f.grid();
  std::vector<double> g(f.size());
  for (std::size_t j = 0; j < g.size(); ++j) g[j] = interpolate(f.g(), grid.dx(), grid.node(j) + t);
  return Curve(grid, std::move(g), f.a());
}

Curve derivative(const Curve& f) {
  return Curve(f.grid(), fd_derivative(f.g(), f.grid().dx()), 0.0);
}

Curve multiply(const Curve& f, const Curve& h) {
  require_same_grid(f, h);
  const double a = f.a() * h.a();
  std::vector<double> g(f.size());
  for (std::size_t j = 0; j < g.size(); ++j) g[j] = f.at_node(j) * h.at_node(j) - a;
  return Curve(f.grid(), std::move(g), a);
}

Curve operator+(const Curve& f, const Curve& h) {
  require_same_grid(f, h);
  std::vector<double> g(f.size());
  for (std::size_t j = 0; j < g.size(); ++j) g[j] = f.g()[j] + h.g()[j];
  return Curve(f.grid(), std::move(g), f.a() + h.a());
}

Curve operator-(const Curve& f, const Curve& h) { return f + (-1.0) * h; }

Curve operator*(double c, const Curve& f) {
  std::vector<double> g(f.g().begin(), f.g().end());
  for (double& e : g) e *= c;
  return Curve(f.grid(), std::move(g), c * f.a());
}

void require_same_grid(const Curve& f, const Curve& h) {
  if (!(f.grid() == h.grid()))
    fail(ErrorKind::GridMismatch, "curves live on different grids");
}

}  // namespace bondlab
