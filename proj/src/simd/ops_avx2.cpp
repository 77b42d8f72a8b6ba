#include <cmath>
#include <immintrin.h>

#include "table.hpp"

// AVX2+FMA variants. The truncated-Gaussian weight needs exp(), so those
// paths defer to the scalar reference; the compactly supported polynomial
// kernels are where the cycles go.

namespace fosr::simd {
namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(lo, _mm_unpackhi_pd(lo, lo)));
}

// Branch-free weight for Epanechnikov/Uniform: w(u) masked to |u| <= 1.
template <WeightFn Fn>
inline __m256d weight_vec(__m256d u) {
  const __m256d abs_mask = _mm256_castsi256_pd(_mm256_set1_epi64x(0x7fffffffffffffffLL));
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d inside = _mm256_cmp_pd(_mm256_and_pd(u, abs_mask), one, _CMP_LE_OQ);
  __m256d w;
  if constexpr (Fn == WeightFn::Epanechnikov) {
    w = _mm256_mul_pd(_mm256_set1_pd(0.75), _mm256_fnmadd_pd(u, u, one));
  } else {
    w = _mm256_set1_pd(0.5);
  }
  return _mm256_and_pd(w, inside);
}

template <WeightFn Fn>
void kernel_weights_impl(const double* t, const double* wpre, std::size_t n, double t0, double h,
                         double* k, double* kd) {
  const double inv_h = 1.0 / h;
  const __m256d vt0 = _mm256_set1_pd(t0);
  const __m256d vinv_h = _mm256_set1_pd(inv_h);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(t + i), vt0);
    const __m256d u = _mm256_mul_pd(d, vinv_h);
    const __m256d w = _mm256_mul_pd(_mm256_mul_pd(_mm256_loadu_pd(wpre + i), weight_vec<Fn>(u)),
                                    vinv_h);
    _mm256_storeu_pd(k + i, w);
    _mm256_storeu_pd(kd + i, _mm256_mul_pd(w, d));
  }
  for (; i < n; ++i) {
    const double d = t[i] - t0;
    const double u = d * inv_h;
    double w = 0.0;
    if (std::abs(u) <= 1.0) w = (Fn == WeightFn::Epanechnikov) ? 0.75 * (1.0 - u * u) : 0.5;
    k[i] = wpre[i] * w * inv_h;
    kd[i] = k[i] * d;
  }
}

void kernel_weights_avx2(WeightFn fn, const double* t, const double* wpre, std::size_t n,
                         double t0, double h, double* k, double* kd) {
  switch (fn) {
    case WeightFn::Epanechnikov:
      kernel_weights_impl<WeightFn::Epanechnikov>(t, wpre, n, t0, h, k, kd);
      return;
    case WeightFn::Uniform:
      kernel_weights_impl<WeightFn::Uniform>(t, wpre, n, t0, h, k, kd);
      return;
    case WeightFn::GaussianTruncated:
      kScalarTable.kernel_weights(fn, t, wpre, n, t0, h, k, kd);
      return;
  }
}

template <WeightFn Fn>
void kernel_moments_impl(const double* t, const double* y, const double* wpre, std::size_t n,
                         double t0, double h, double* out) {
  const double inv_h = 1.0 / h;
  const __m256d vt0 = _mm256_set1_pd(t0);
  const __m256d vinv_h = _mm256_set1_pd(inv_h);
  __m256d s0 = _mm256_setzero_pd(), s1 = _mm256_setzero_pd(), s2 = _mm256_setzero_pd();
  __m256d u0 = _mm256_setzero_pd(), u1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(t + i), vt0);
    const __m256d u = _mm256_mul_pd(d, vinv_h);
    const __m256d w = _mm256_mul_pd(_mm256_mul_pd(_mm256_loadu_pd(wpre + i), weight_vec<Fn>(u)),
                                    vinv_h);
    const __m256d wd = _mm256_mul_pd(w, d);
    const __m256d yv = _mm256_loadu_pd(y + i);
    s0 = _mm256_add_pd(s0, w);
    s1 = _mm256_add_pd(s1, wd);
    s2 = _mm256_fmadd_pd(wd, d, s2);
    u0 = _mm256_fmadd_pd(w, yv, u0);
    u1 = _mm256_fmadd_pd(wd, yv, u1);
  }
  double r0 = hsum(s0), r1 = hsum(s1), r2 = hsum(s2), r3 = hsum(u0), r4 = hsum(u1);
  for (; i < n; ++i) {
    const double d = t[i] - t0;
    const double u = d * inv_h;
    double w = 0.0;
    if (std::abs(u) <= 1.0) w = (Fn == WeightFn::Epanechnikov) ? 0.75 * (1.0 - u * u) : 0.5;
    w *= wpre[i] * inv_h;
    const double wd = w * d;
    r0 += w;
    r1 += wd;
    r2 += wd * d;
    r3 += w * y[i];
    r4 += wd * y[i];
  }
  out[0] = r0;
  out[1] = r1;
  out[2] = r2;
  out[3] = r3;
  out[4] = r4;
}

void kernel_moments_avx2(WeightFn fn, const double* t, const double* y, const double* wpre,
                         std::size_t n, double t0, double h, double* out) {
  switch (fn) {
    case WeightFn::Epanechnikov:
      kernel_moments_impl<WeightFn::Epanechnikov>(t, y, wpre, n, t0, h, out);
      return;
    case WeightFn::Uniform:
      kernel_moments_impl<WeightFn::Uniform>(t, y, wpre, n, t0, h, out);
      return;
    case WeightFn::GaussianTruncated:
      kScalarTable.kernel_moments(fn, t, y, wpre, n, t0, h, out);
      return;
  }
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

double sum_avx2(const double* a, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(a + i));
  double s = hsum(acc);
  for (; i < n; ++i) s += a[i];
  return s;
}

void scaled_add_avx2(const double* a, const double* b, double s, std::size_t n, double* out) {
  const __m256d vs = _mm256_set1_pd(s);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i,
                     _mm256_fmadd_pd(vs, _mm256_loadu_pd(b + i), _mm256_loadu_pd(a + i)));
  }
  for (; i < n; ++i) out[i] = a[i] + s * b[i];
}

}  // namespace

const OpsTable kAvx2Table = {
    kernel_weights_avx2, kernel_moments_avx2, dot_avx2, sum_avx2, scaled_add_avx2,
};

}  // namespace fosr::simd
