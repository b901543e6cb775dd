#include "bondlab/noise.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <mutex>
#include <random>
#include <thread>

#include "bondlab/error.hpp"

namespace bondlab {

namespace {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

double BrownianIncrements::cumulative(std::size_t i, std::size_t k) const noexcept {
  double s = 0.0;
  for (std::size_t j = 0; j < k; ++j) s += (*this)(j, i);
  return s;
}

std::uint64_t path_seed(std::uint64_t seed, std::uint64_t path) noexcept {
  return splitmix64(splitmix64(seed) ^ (path * 0xD1B54A32D192ED03ULL + 1));
}

BrownianIncrements draw_increments(std::uint64_t seed, std::uint64_t path, std::size_t n_steps,
                                   std::size_t n_factors, double dt) {
  BrownianIncrements dw(n_steps, n_factors);
  std::mt19937_64 gen(path_seed(seed, path));
  std::normal_distribution<double> normal(0.0, std::sqrt(dt));
  for (std::size_t k = 0; k < n_steps; ++k)
    for (std::size_t i = 0; i < n_factors; ++i) dw(k, i) = normal(gen);
  return dw;
}

BrownianIncrements coarsen(const BrownianIncrements& fine, std::size_t factor) {
  if (factor == 0 || fine.steps() % factor != 0)
    fail(ErrorKind::ConfigInvalid, "coarsening factor must divide the step count");
  BrownianIncrements coarse(fine.steps() / factor, fine.factors());
  for (std::size_t k = 0; k < coarse.steps(); ++k)
    for (std::size_t i = 0; i < fine.factors(); ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < factor; ++j) s += fine(k * factor + j, i);
      coarse(k, i) = s;
    }
  return coarse;
}

void parallel_paths(std::size_t n_paths, std::size_t workers,
                    const std::function<void(std::size_t)>& body) {
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, std::max<std::size_t>(n_paths, 1));
  if (workers <= 1) {
    for (std::size_t p = 0; p < n_paths; ++p) body(p);
    return;
  }
  std::exception_ptr first_error;
  std::mutex mutex;
  std::vector<std::thread> pool;
  const std::size_t block = (n_paths + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t lo = w * block;
    const std::size_t hi = std::min(n_paths, lo + block);
    pool.emplace_back([&, lo, hi] {
      try {
        for (std::size_t p = lo; p < hi; ++p) body(p);
      } catch (...) {
        std::lock_guard lock(mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

MeanSE mean_se(std::span<const double> v) {
  MeanSE r;
  r.n = v.size();
  if (v.empty()) return r;
  double s = 0.0;
  for (double x : v) s += x;
  r.mean = s / static_cast<double>(v.size());
  if (v.size() < 2) return r;
  double q = 0.0;
  for (double x : v) q += (x - r.mean) * (x - r.mean);
  const double var = q / static_cast<double>(v.size() - 1);
  r.se = std::sqrt(var / static_cast<double>(v.size()));
  return r;
}

}  // namespace bondlab
