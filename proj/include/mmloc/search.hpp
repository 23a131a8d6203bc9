#pragma once

// Coarse lattice search over the scene square followed by Nelder-Mead
// refinement of the best lattice point.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <thread>
#include <vector>

#include "mmloc/model.hpp"
#include "mmloc/types.hpp"

namespace mmloc {

struct SearchGrid {
  std::vector<Point2> points;  // row-major: x outer, y inner
  int per_axis = 0;
  double extent = 0.0;  // side of the square, 2 R_s
  double cell = 0.0;    // lattice spacing
};

/// max(N_grid_per_axis, ceil(alpha * 2 R_s / delta_r)).
inline int grid_points_per_axis(const SystemConfig& cfg) {
  const double ratio = cfg.alpha_oversample * 2.0 * cfg.R_s / cfg.range_resolution();
  // Guard against ratios that land a few ulps above an integer.
  const double floor_rule = std::ceil(ratio * (1.0 - 1e-12));
  return std::max(cfg.N_grid_per_axis, static_cast<int>(floor_rule));
}

inline SearchGrid make_grid(double half_extent, int per_axis) {
  if (per_axis < 1) throw std::invalid_argument("make_grid: per_axis must be >= 1");
  SearchGrid g;
  g.per_axis = per_axis;
  g.extent = 2.0 * half_extent;
  g.cell = per_axis > 1 ? g.extent / (per_axis - 1) : g.extent;
  std::vector<double> coord(per_axis, 0.0);
  for (int i = 0; i < per_axis && per_axis > 1; ++i) coord[i] = -half_extent + i * g.cell;
  g.points.reserve(static_cast<std::size_t>(per_axis) * per_axis);
  for (int i = 0; i < per_axis; ++i) {
    for (int j = 0; j < per_axis; ++j) g.points.push_back({coord[i], coord[j]});
  }
  return g;
}

inline SearchGrid make_grid(const SystemConfig& cfg) { return make_grid(cfg.R_s, grid_points_per_axis(cfg)); }

struct GridSearchResult {
  Point2 point;
  double score = 0.0;
  std::size_t index = 0;
};

/// Index of the largest finite value; ties go to the lowest index.
inline std::size_t argmax_finite(const std::vector<double>& values) {
  std::size_t best = values.size();
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) continue;
    if (best == values.size() || values[i] > values[best]) best = i;
  }
  if (best == values.size()) throw std::domain_error("grid_search: objective is non-finite at every grid point");
  return best;
}

/// Evaluates the objective at every lattice point. With threads > 1 the
/// points are split into contiguous blocks; the objective must then be safe
/// to call concurrently. The result does not depend on the thread count.
template <class Objective>
GridSearchResult grid_search(Objective&& objective, const SearchGrid& grid, unsigned threads = 1) {
  if (grid.points.empty()) throw std::invalid_argument("grid_search: empty grid");
  std::vector<double> values(grid.points.size());
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(grid.points.size())));
  if (threads == 1) {
    for (std::size_t i = 0; i < grid.points.size(); ++i) values[i] = objective(grid.points[i]);
  } else {
    std::vector<std::thread> pool;
    const std::size_t block = (grid.points.size() + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
      const std::size_t lo = t * block;
      const std::size_t hi = std::min(grid.points.size(), lo + block);
      pool.emplace_back([&, lo, hi] {
        for (std::size_t i = lo; i < hi; ++i) values[i] = objective(grid.points[i]);
      });
    }
    for (auto& th : pool) th.join();
  }
  const std::size_t best = argmax_finite(values);
  return {grid.points[best], values[best], best};
}

struct RefineResult {
  Point2 point;
  double score = 0.0;
  int iterations = 0;
};

/// Nelder-Mead maximization in the plane with the classical coefficients
/// (reflection 1, expansion 2, contraction 0.5, shrink 0.5). Stops when the
/// vertex score spread falls to tol relative to the scores, or after
/// max_iter iterations. NaN scores rank below every finite score.
template <class Objective>
RefineResult nelder_mead_refine(Objective&& objective, Point2 start, double initial_scale, double tol = 1e-10,
                                int max_iter = 200) {
  auto eval = [&](Point2 p) {
    const double v = objective(p);
    return std::isnan(v) ? -std::numeric_limits<double>::infinity() : v;
  };
  struct Vertex {
    Point2 p;
    double f;
  };
  std::array<Vertex, 3> s{Vertex{start, eval(start)}, Vertex{}, Vertex{}};
  if (max_iter <= 0) return {start, s[0].f, 0};
  s[1] = {start + Point2{initial_scale, 0.0}, eval(start + Point2{initial_scale, 0.0})};
  s[2] = {start + Point2{0.0, initial_scale}, eval(start + Point2{0.0, initial_scale})};

  auto order = [&] {
    std::stable_sort(s.begin(), s.end(), [](const Vertex& a, const Vertex& b) { return a.f > b.f; });
  };
  int iter = 0;
  for (; iter < max_iter; ++iter) {
    order();
    const double spread = s[0].f - s[2].f;
    const double scale = std::max(std::abs(s[0].f), std::abs(s[2].f));
    if (std::isfinite(spread) && spread <= tol * scale) break;

    const Point2 c = 0.5 * (s[0].p + s[1].p);
    const Point2 xr = c + (c - s[2].p);
    const double fr = eval(xr);
    if (fr > s[0].f) {
      const Point2 xe = c + 2.0 * (c - s[2].p);
      const double fe = eval(xe);
      s[2] = fe > fr ? Vertex{xe, fe} : Vertex{xr, fr};
      continue;
    }
    if (fr > s[1].f) {
      s[2] = {xr, fr};
      continue;
    }
    if (fr > s[2].f) {
      const Point2 xc = c + 0.5 * (xr - c);
      const double fc = eval(xc);
      if (fc >= fr) {
        s[2] = {xc, fc};
        continue;
      }
    } else {
      const Point2 xc = c + 0.5 * (s[2].p - c);
      const double fc = eval(xc);
      if (fc > s[2].f) {
        s[2] = {xc, fc};
        continue;
      }
    }
    for (int i = 1; i < 3; ++i) {
      s[i].p = s[0].p + 0.5 * (s[i].p - s[0].p);
      s[i].f = eval(s[i].p);
    }
  }
  order();
  return {s[0].p, s[0].f, iter};
}

}  // namespace mmloc
