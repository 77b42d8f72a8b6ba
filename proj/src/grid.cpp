#include "fosr/grid.hpp"

#include <algorithm>
#include <cmath>

#include "fosr/errors.hpp"

namespace fosr::grid {
namespace {

bool near_existing(const std::vector<double>& pts, double x, double tol) {
  for (double p : pts)
    if (std::abs(p - x) <= tol) return true;
  return false;
}

}  // namespace

std::vector<double> build(int m, const longdata::Hypothesis& hypothesis, int min_subdivisions) {
  if (m < 1) throw ConfigError("grid size must be at least 1");

  // Interval endpoints first so they survive deduplication exactly.
  std::vector<double> pts;
  for (const auto& c : hypothesis.constraints)
    for (const auto& term : c.terms) {
      if (!near_existing(pts, term.interval.lo, 0.0)) pts.push_back(term.interval.lo);
      if (!near_existing(pts, term.interval.hi, 0.0)) pts.push_back(term.interval.hi);
    }

  const double spacing_tol = 1e-9;
  for (int i = 0; i <= m; ++i) {
    const double g = static_cast<double>(i) / m;
    if (!near_existing(pts, g, spacing_tol)) pts.push_back(g);
  }
  std::sort(pts.begin(), pts.end());

  // Each constrained interval needs at least min_subdivisions gaps.
  for (const auto& c : hypothesis.constraints) {
    for (const auto& term : c.terms) {
      const Interval& iv = term.interval;
      auto inside = indices_in(pts, iv);
      const int gaps = static_cast<int>(inside.size()) - 1;
      if (gaps >= min_subdivisions) continue;
      for (int k = 1; k < min_subdivisions; ++k) {
        const double x = iv.lo + (iv.hi - iv.lo) * k / min_subdivisions;
        if (!near_existing(pts, x, 1e-9 * iv.length())) pts.push_back(x);
      }
      std::sort(pts.begin(), pts.end());
    }
  }
  return pts;
}

std::vector<int> indices_in(const std::vector<double>& grid, const Interval& iv) {
  std::vector<int> out;
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (grid[i] >= iv.lo && grid[i] <= iv.hi) out.push_back(static_cast<int>(i));
  return out;
}

}  // namespace fosr::grid
