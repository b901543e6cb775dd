#include "bondlab/hjb.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "bondlab/error.hpp"

namespace bondlab {

namespace {

std::vector<double> first_diff(const std::vector<double>& f, double h) {
  const std::size_t n = f.size();
  std::vector<double> d(n);
  d[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h);
  for (std::size_t j = 1; j + 1 < n; ++j) d[j] = (f[j + 1] - f[j - 1]) / (2.0 * h);
  d[n - 1] = (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2.0 * h);
  return d;
}

std::vector<double> second_diff(const std::vector<double>& f, double h) {
  const std::size_t n = f.size();
  const double h2 = h * h;
  std::vector<double> d(n);
  d[0] = (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) / h2;
  for (std::size_t j = 1; j + 1 < n; ++j) d[j] = (f[j + 1] - 2.0 * f[j] + f[j - 1]) / h2;
  d[n - 1] = (2.0 * f[n - 1] - 5.0 * f[n - 2] + 4.0 * f[n - 3] - f[n - 4]) / h2;
  return d;
}

// Locates t in the layer times: index of the left layer and the weight of the right one.
std::pair<std::size_t, double> bracket(const std::vector<double>& nodes, double x) {
  const std::size_t n = nodes.size();
  if (x <= nodes.front()) return {0, 0.0};
  if (x >= nodes.back()) return {n - 2, 1.0};
  const double h = nodes[1] - nodes[0];
  auto j = static_cast<std::size_t>((x - nodes.front()) / h);
  j = std::min(j, n - 2);
  return {j, (x - nodes[j]) / h};
}

double bilinear(const ValueGrid& vg, double t, double w,
                const std::function<std::vector<double>(std::size_t)>& layer) {
  const auto [i, a] = bracket(vg.t, t);
  const auto [j, b] = bracket(vg.w, w);
  const auto lo = layer(i);
  const auto hi = layer(i + 1);
  const double v0 = (1.0 - b) * lo[j] + b * lo[j + 1];
  const double v1 = (1.0 - b) * hi[j] + b * hi[j + 1];
  return (1.0 - a) * v0 + a * v1;
}

}  // namespace

std::vector<double> ValueGrid::F_w(std::size_t layer) const { return first_diff(F[layer], dw()); }

std::vector<double> ValueGrid::F_ww(std::size_t layer) const {
  return second_diff(F[layer], dw());
}

double ValueGrid::value(double tt, double ww) const {
  return bilinear(*this, tt, ww, [this](std::size_t l) { return F[l]; });
}

double ValueGrid::F_w_at(double tt, double ww) const {
  return bilinear(*this, tt, ww, [this](std::size_t l) { return F_w(l); });
}

double ValueGrid::F_ww_at(double tt, double ww) const {
  return bilinear(*this, tt, ww, [this](std::size_t l) { return F_ww(l); });
}

bool ValueGrid::contains(double tt, double ww) const {
  return tt >= t.front() && tt <= t.back() && ww >= w.front() && ww <= w.back();
}

ValueGrid solve_reduced_hjb(const Utility& u, const GammaSquared& gamma2, double horizon,
                            const HjbGrid& grid) {
  if (grid.n_w < 5) fail(ErrorKind::ConfigInvalid, "HJB grid needs at least 5 wealth nodes", "hjb.n_w");
  if (!(grid.w_max > grid.w_min))
    fail(ErrorKind::ConfigInvalid, "HJB wealth interval is empty", "hjb.w_min");
  if (!u.in_domain(grid.w_min))
    fail(ErrorKind::OutOfDomain, "HJB wealth interval leaves the utility domain", "hjb.w_min");
  if (!(grid.dt > 0.0) || !(horizon > 0.0))
    fail(ErrorKind::ConfigInvalid, "HJB time step and horizon must be positive", "hjb.dt");
  const auto n_t = static_cast<std::size_t>(std::llround(horizon / grid.dt));
  if (n_t == 0 || std::abs(static_cast<double>(n_t) * grid.dt - horizon) > 1e-9 * horizon)
    fail(ErrorKind::ConfigInvalid, "HJB dt must divide the horizon", "hjb.dt");

  ValueGrid vg;
  vg.eps_conv = grid.eps_conv;
  const std::size_t n = grid.n_w;
  const double dw = (grid.w_max - grid.w_min) / static_cast<double>(n - 1);
  for (std::size_t j = 0; j < n; ++j) vg.w.push_back(grid.w_min + dw * static_cast<double>(j));
  for (std::size_t k = 0; k <= n_t; ++k)
    vg.t.push_back(horizon * static_cast<double>(k) / static_cast<double>(n_t));
  vg.F.assign(n_t + 1, std::vector<double>(n));
  for (std::size_t j = 0; j < n; ++j) vg.F[n_t][j] = u.U(vg.w[j]);

  std::vector<double> f = vg.F[n_t];
  std::vector<double> delta(n);
  std::size_t updates = 0;
  for (std::size_t k = n_t; k-- > 0;) {
    const double t_hi = vg.t[k + 1];
    double remaining = vg.t[k + 1] - vg.t[k];
    double t_cur = t_hi;
    while (remaining > 1e-15 * horizon) {
      const auto fw = first_diff(f, dw);
      auto fww = second_diff(f, dw);
      // step bound from the linearised diffusion coefficient 1/2 g (F_w/F_ww)^2
      double ratio_max = 0.0;
      for (std::size_t j = 1; j + 1 < n; ++j) {
        if (fww[j] > -grid.eps_conv) continue;
        ratio_max = std::max(ratio_max, (fw[j] * fw[j]) / (fww[j] * fww[j]));
      }
      double h = remaining;
      const double g_probe = std::max(gamma2(t_cur - 0.5 * h), gamma2(t_cur));
      if (g_probe > 0.0 && ratio_max > 0.0)
        h = std::min(h, grid.cfl * dw * dw / (g_probe * ratio_max));
      if (h < remaining) {
        // split the remaining interval evenly
        const auto pieces = static_cast<std::size_t>(std::ceil(remaining / h));
        h = remaining / static_cast<double>(pieces);
      }
      const double g = gamma2(t_cur - 0.5 * h);
      for (std::size_t j = 1; j + 1 < n; ++j) {
        ++updates;
        if (fww[j] > -grid.eps_conv) {
          fww[j] = -grid.eps_conv;
          ++vg.clamps;
        }
        delta[j] = -h * 0.5 * g * fw[j] * fw[j] / fww[j];
      }
      delta[0] = 2.0 * delta[1] - delta[2];
      delta[n - 1] = 2.0 * delta[n - 2] - delta[n - 3];
      for (std::size_t j = 0; j < n; ++j) f[j] += delta[j];
      remaining -= h;
      t_cur -= h;
      ++vg.substeps;
    }
    vg.F[k] = f;
  }
  if (static_cast<double>(vg.clamps) > 0.01 * static_cast<double>(std::max<std::size_t>(updates, 1)))
    fail(ErrorKind::DegenerateConcavity,
         "F_ww clamped at " + std::to_string(vg.clamps) + " of " + std::to_string(updates) +
             " node updates");
  return vg;
}

std::vector<double> optimal_control_from_F(const ValueGrid& vg, std::span<const double> gamma,
                                           double t, double w) {
  if (!vg.contains(t, w))
    fail(ErrorKind::OutOfDomain, "control requested outside the value grid");
  const double fw = vg.F_w_at(t, w);
  const double fww = vg.F_ww_at(t, w);
  if (!(std::abs(fww) >= vg.eps_conv))
    fail(ErrorKind::DegenerateConcavity, "F_ww vanishes at the requested point");
  std::vector<double> x(gamma.size());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = -gamma[i] * fw / fww;
  return x;
}

}  // namespace bondlab
