#pragma once

// One-dimensional derivative-free grid searches: exhaustive (fBFS) and the
// adaptively refined variant (ARS) that re-grids around the running argmin.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ewars {

struct SearchBounds {
  double a_lb = 1e-9;  // m^2 (1e-3 mm^2)
  double a_ub = 1e-6;  // m^2 (1 mm^2)

  void validate() const {
    if (!(a_lb > 0.0) || !(a_lb < a_ub)) {
      throw std::invalid_argument("SearchBounds: require 0 < a_lb < a_ub");
    }
  }
  double width() const { return a_ub - a_lb; }
};

struct SearchResult {
  double argmin = 0.0;
  double value = 0.0;
  double resolution = 0.0;  // grid spacing of the last level
  std::size_t evaluations = 0;
  int levels = 0;
};

// Uniform inclusive grid of n + 1 points; the last point is exactly hi.
inline std::vector<double> uniform_grid(double lo, double hi, int n) {
  std::vector<double> grid(static_cast<std::size_t>(n) + 1);
  const double delta = (hi - lo) / n;
  for (int i = 0; i < n; ++i) grid[static_cast<std::size_t>(i)] = lo + i * delta;
  grid.back() = hi;
  return grid;
}

// Index of the smallest value; ties go to the lowest index (smallest area).
inline std::size_t grid_argmin(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("grid_argmin: empty grid");
  std::size_t best = 0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw std::runtime_error("grid search: non-finite objective value at grid index " + std::to_string(i));
    }
    if (values[i] < values[best]) best = i;
  }
  return best;
}

// Interval [center - delta, center + delta] clipped to the outer bounds.
inline SearchBounds refine_bounds(double center, double delta, const SearchBounds& outer) {
  SearchBounds b;
  b.a_lb = std::max(center - delta, outer.a_lb);
  b.a_ub = std::min(center + delta, outer.a_ub);
  return b;
}

// Number of ARS levels for an unclipped search:
// ceil(log_{n/2}(width / (n eps))) + 1.
inline int ars_level_count(double width, int n_grid, double epsilon) {
  const double ratio = width / (n_grid * epsilon);
  if (ratio <= 1.0) return 1;
  return static_cast<int>(std::ceil(std::log(ratio) / std::log(n_grid / 2.0))) + 1;
}

// GridEval: void(std::span<const double> grid, std::span<double> values, int level)
template <class GridEval>
SearchResult refine_search_grid(GridEval&& eval, const SearchBounds& bounds, std::span<const int> schedule) {
  if (schedule.empty()) throw std::invalid_argument("refine_search: empty level schedule");
  SearchResult r;
  SearchBounds level = bounds;
  std::vector<double> values;
  for (std::size_t k = 0; k < schedule.size(); ++k) {
    const int n = schedule[k];
    if (n < 2) throw std::invalid_argument("refine_search: each level needs at least 2 intervals");
    const auto grid = uniform_grid(level.a_lb, level.a_ub, n);
    values.assign(grid.size(), 0.0);
    eval(std::span<const double>(grid), std::span<double>(values), static_cast<int>(k));
    const std::size_t best = grid_argmin(values);
    r.argmin = grid[best];
    r.value = values[best];
    r.resolution = (level.a_ub - level.a_lb) / n;
    r.evaluations += grid.size();
    r.levels = static_cast<int>(k) + 1;
    level = refine_bounds(r.argmin, r.resolution, bounds);
  }
  return r;
}

template <class GridEval>
SearchResult ars_grid(GridEval&& eval, const SearchBounds& bounds, int n_grid, double epsilon) {
  if (n_grid < 2) throw std::invalid_argument("ars: n_grid must be at least 2");
  if (!(epsilon > 0.0)) throw std::invalid_argument("ars: epsilon must be positive");
  SearchResult r;
  SearchBounds level = bounds;
  std::vector<double> values;
  for (int k = 0;; ++k) {
    const auto grid = uniform_grid(level.a_lb, level.a_ub, n_grid);
    const double delta = (level.a_ub - level.a_lb) / n_grid;
    values.assign(grid.size(), 0.0);
    eval(std::span<const double>(grid), std::span<double>(values), k);
    const std::size_t best = grid_argmin(values);
    r.argmin = grid[best];
    r.value = values[best];
    r.resolution = delta;
    r.evaluations += grid.size();
    r.levels = k + 1;
    if (delta <= epsilon) break;
    level = refine_bounds(r.argmin, delta, bounds);
  }
  return r;
}

namespace detail {
template <class F>
auto pointwise(F& f) {
  return [&f](std::span<const double> grid, std::span<double> values, int) {
    for (std::size_t i = 0; i < grid.size(); ++i) values[i] = f(grid[i]);
  };
}
}  // namespace detail

// Exhaustive search over the (n0 + 1)-point inclusive grid.
template <class F>
SearchResult full_bfs(F&& f, const SearchBounds& bounds, int n0) {
  if (n0 < 2) throw std::invalid_argument("full_bfs: n0 must be at least 2");
  const int schedule[] = {n0};
  return refine_search_grid(detail::pointwise(f), bounds, schedule);
}

template <class F>
SearchResult ars(F&& f, const SearchBounds& bounds, int n_grid, double epsilon) {
  return ars_grid(detail::pointwise(f), bounds, n_grid, epsilon);
}

// ARS with an explicit per-level grid size, e.g. {100, 200}.
template <class F>
SearchResult refine_search(F&& f, const SearchBounds& bounds, std::span<const int> schedule) {
  return refine_search_grid(detail::pointwise(f), bounds, schedule);
}

// fBFS grid size whose spacing matches a target resolution.
inline int resolution_matched_grid(const SearchBounds& bounds, double epsilon) {
  return static_cast<int>(std::ceil(bounds.width() / epsilon - 1e-9));
}

}  // namespace ewars
