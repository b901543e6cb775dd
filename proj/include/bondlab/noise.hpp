#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace bondlab {

/// Brownian increments, one row per time step and one column per factor.
class BrownianIncrements {
 public:
  BrownianIncrements() = default;
  BrownianIncrements(std::size_t n_steps, std::size_t n_factors)
      : steps_(n_steps), factors_(n_factors), data_(n_steps * n_factors, 0.0) {}

  std::size_t steps() const noexcept { return steps_; }
  std::size_t factors() const noexcept { return factors_; }
  double& operator()(std::size_t k, std::size_t i) noexcept { return data_[k * factors_ + i]; }
  double operator()(std::size_t k, std::size_t i) const noexcept {
    return data_[k * factors_ + i];
  }
  std::span<const double> row(std::size_t k) const noexcept {
    return {data_.data() + k * factors_, factors_};
  }
  /// Sum of the increments of factor i over the first k steps.
  double cumulative(std::size_t i, std::size_t k) const noexcept;

 private:
  std::size_t steps_ = 0;
  std::size_t factors_ = 0;
  std::vector<double> data_;
};

/// Seed of path `path` for master seed `seed`; independent of evaluation order.
std::uint64_t path_seed(std::uint64_t seed, std::uint64_t path) noexcept;

/// N(0, dt) increments for one path.
BrownianIncrements draw_increments(std::uint64_t seed, std::uint64_t path, std::size_t n_steps,
                                   std::size_t n_factors, double dt);

/// Sums `factor` consecutive steps; the coarse path shares the fine path's noise.
BrownianIncrements coarsen(const BrownianIncrements& fine, std::size_t factor);

/// Runs body(path) for path = 0..n_paths-1 on `workers` threads (0 = hardware count).
/// Work is split in contiguous blocks; results must be written to per-path slots.
void parallel_paths(std::size_t n_paths, std::size_t workers,
                    const std::function<void(std::size_t)>& body);

struct MeanSE {
  double mean = 0.0;
  double se = 0.0;
  std::size_t n = 0;
};

/// Sample mean and standard error, summed in index order.
MeanSE mean_se(std::span<const double> v);

}  // namespace bondlab
