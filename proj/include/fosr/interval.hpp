#pragma once

#include <algorithm>
#include <cmath>

namespace fosr {

struct Interval {
  double lo = 0.0;
  double hi = 1.0;

  double length() const { return hi - lo; }
  bool contains(double t) const { return t >= lo && t <= hi; }
  bool contains(const Interval& other) const { return other.lo >= lo && other.hi <= hi; }
  bool valid() const { return std::isfinite(lo) && std::isfinite(hi) && lo < hi; }

  friend bool operator==(const Interval& a, const Interval& b) {
    return a.lo == b.lo && a.hi == b.hi;
  }
};

}  // namespace fosr
