#pragma once

#include <vector>

#include "fosr/interval.hpp"
#include "fosr/longdata.hpp"

namespace fosr::grid {

// Equispaced m+1 points on [0,1], augmented with the exact endpoints of every
// hypothesis interval (no rounding), then deduplicated. Every constrained
// interval keeps at least `min_subdivisions` gaps between its grid points;
// extra interior points are inserted when the global grid is too coarse.
std::vector<double> build(int m, const longdata::Hypothesis& hypothesis,
                          int min_subdivisions = 3);

inline std::vector<double> build_plain(int m) {
  return build(m, longdata::Hypothesis{}, 0);
}

// Indices of grid points inside [iv.lo, iv.hi]; endpoints are expected to be
// exact grid members.
std::vector<int> indices_in(const std::vector<double>& grid, const Interval& iv);

}  // namespace fosr::grid
