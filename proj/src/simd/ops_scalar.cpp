#include <cmath>

#include "table.hpp"

namespace fosr::simd {
namespace {

inline double weight(WeightFn fn, double u) {
  const double a = std::abs(u);
  if (a > 1.0) return 0.0;
  switch (fn) {
    case WeightFn::Epanechnikov:
      return 0.75 * (1.0 - u * u);
    case WeightFn::GaussianTruncated:
      return kTruncGaussScale * std::exp(-0.5 * u * u);
    case WeightFn::Uniform:
      return 0.5;
  }
  return 0.0;
}

void kernel_weights_scalar(WeightFn fn, const double* t, const double* wpre, std::size_t n,
                           double t0, double h, double* k, double* kd) {
  const double inv_h = 1.0 / h;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = t[i] - t0;
    const double w = wpre[i] * weight(fn, d * inv_h) * inv_h;
    k[i] = w;
    kd[i] = w * d;
  }
}

void kernel_moments_scalar(WeightFn fn, const double* t, const double* y, const double* wpre,
                           std::size_t n, double t0, double h, double* out) {
  const double inv_h = 1.0 / h;
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, u0 = 0.0, u1 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = t[i] - t0;
    const double w = wpre[i] * weight(fn, d * inv_h) * inv_h;
    const double wd = w * d;
    s0 += w;
    s1 += wd;
    s2 += wd * d;
    u0 += w * y[i];
    u1 += wd * y[i];
  }
  out[0] = s0;
  out[1] = s1;
  out[2] = s2;
  out[3] = u0;
  out[4] = u1;
}

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

double sum_scalar(const double* a, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i];
  return s;
}

void scaled_add_scalar(const double* a, const double* b, double s, std::size_t n, double* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + s * b[i];
}

}  // namespace

const OpsTable kScalarTable = {
    kernel_weights_scalar, kernel_moments_scalar, dot_scalar, sum_scalar, scaled_add_scalar,
};

}  // namespace fosr::simd
