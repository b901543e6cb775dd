#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace bondlab {

/// Uniform grid x_j = j*dx on [0, x_max].
class MaturityGrid {
 public:
  MaturityGrid(double x_max, std::size_t n_points);

  double x_max() const noexcept { return x_max_; }
  std::size_t size() const noexcept { return n_; }
  double dx() const noexcept { return dx_; }
  double node(std::size_t j) const noexcept { return static_cast<double>(j) * dx_; }

  /// Index of the last node not beyond x (clamped to the grid).
  std::size_t floor_index(double x) const noexcept;

  bool operator==(const MaturityGrid& o) const noexcept {
    return x_max_ == o.x_max_ && n_ == o.n_;
  }

 private:
  double x_max_;
  std::size_t n_;
  double dx_;
};

struct SobolevIndex {
  int order = 1;
  explicit SobolevIndex(int s = 1);
  SobolevIndex next() const { return SobolevIndex(order + 1); }
};

/// Element of E^s sampled on a grid: value f(x_j) = g[j] + a.
/// The grid part is treated as zero beyond x_max.
class Curve {
 public:
  Curve(MaturityGrid grid, std::vector<double> g, double a = 0.0);

  static Curve constant(const MaturityGrid& grid, double a);
  static Curve zero(const MaturityGrid& grid) { return constant(grid, 0.0); }
  /// Samples f at the nodes; `a` is the limit at infinity and g = f - a.
  static Curve sample(const MaturityGrid& grid, const std::function<double(double)>& f,
                      double a = 0.0);

  const MaturityGrid& grid() const noexcept { return grid_; }
  std::span<const double> g() const noexcept { return g_; }
  double a() const noexcept { return a_; }
  std::size_t size() const noexcept { return g_.size(); }

  double at_node(std::size_t j) const noexcept { return g_[j] + a_; }
  /// Linear interpolation between nodes; the grid part is zero past x_max.
  double operator()(double x) const noexcept;
  std::vector<double> values() const;

 private:
  MaturityGrid grid_;
  std::vector<double> g_;
  double a_;
};

enum class AtomOrder { Dirac = 0, Derivative = 1 };

struct DualAtom {
  double location = 0.0;
  double weight = 0.0;
  AtomOrder order = AtomOrder::Dirac;
};

using Atoms = std::vector<DualAtom>;

// ---- finite differences and quadrature on raw samples ----

/// First derivative, central in the interior and one-sided second order at the ends.
std::vector<double> fd_derivative(std::span<const double> v, double dx);
/// Trapezoid rule over the first n samples.
double trapezoid(std::span<const double> v, double dx, std::size_t n);
/// Linear interpolation of samples at x >= 0, zero past the last node.
double interpolate(std::span<const double> v, double dx, double x) noexcept;
/// interpolate(fd_derivative(v, dx), dx, x) evaluated from the neighbouring stencils only.
double derivative_at(std::span<const double> v, double dx, double x) noexcept;

// ---- E^s operations ----

double sobolev_norm(const Curve& f, SobolevIndex s);
/// Norm restricted to [0, x_hi] (x_hi snapped down to a node).
double sobolev_norm(const Curve& f, SobolevIndex s, double x_hi);
/// Polar form of the E^s norm.
double inner_product(const Curve& f, const Curve& h, SobolevIndex s);

double pair(std::span<const DualAtom> theta, const Curve& f, SobolevIndex s);
/// Same as pair(theta, multiply(f, h), s) without forming the product on the whole grid.
double pair_product(std::span<const DualAtom> theta, const Curve& f, const Curve& h,
                    SobolevIndex s);
/// Throws AtomBeyondGrid / OrderUnsupported for atoms the grid or s cannot price.
void check_atoms(std::span<const DualAtom> theta, const MaturityGrid& grid, SobolevIndex s);

Curve translate(const Curve& f, double t);
Curve derivative(const Curve& f);
Curve multiply(const Curve& f, const Curve& h);

Curve operator+(const Curve& f, const Curve& h);
Curve operator-(const Curve& f, const Curve& h);
Curve operator*(double c, const Curve& f);

void require_same_grid(const Curve& f, const Curve& h);

}  // namespace bondlab
