#pragma once

#include <cstddef>
#include <string>

// Data-parallel inner loops behind the smoothing engines. Every op has a
// scalar reference implementation and, on x86_64 with AVX2, a vectorized
// variant selected at runtime. The two are equivalence-tested; any numeric
// difference comes from floating-point reassociation in the reductions.

namespace fosr::simd {

enum class Isa { Scalar, Avx2 };

Isa active_isa();
// Pins the implementation; Avx2 requests fall back to Scalar when
// unsupported. Intended for tests and benchmarks.
void force_isa(Isa isa);
std::string isa_name(Isa isa);

// Smoothing weight functions, all supported on [-1, 1] after scaling by the
// bandwidth (the truncated Gaussian is renormalized to integrate to one).
enum class WeightFn { Epanechnikov, GaussianTruncated, Uniform };

// k[i] = wpre[i] * K((t[i]-t0)/h)/h and kd[i] = k[i] * (t[i]-t0).
void kernel_weights(WeightFn fn, const double* t, const double* wpre, std::size_t n,
                    double t0, double h, double* k, double* kd);

// Fused local moment sums around t0:
//   out = { sum k, sum k*d, sum k*d^2, sum k*y, sum k*d*y }
// with d = t[i]-t0 and k as in kernel_weights.
void kernel_moments(WeightFn fn, const double* t, const double* y, const double* wpre,
                    std::size_t n, double t0, double h, double out[5]);

double dot(const double* a, const double* b, std::size_t n);
double sum(const double* a, std::size_t n);

// out[i] = a[i] + s * b[i]; used to synthesize bootstrap responses.
void scaled_add(const double* a, const double* b, double s, std::size_t n, double* out);

}  // namespace fosr::simd
