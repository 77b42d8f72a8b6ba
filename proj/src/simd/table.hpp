#pragma once

#include "fosr/simd/ops.hpp"

namespace fosr::simd {

struct OpsTable {
  void (*kernel_weights)(WeightFn, const double*, const double*, std::size_t, double, double,
                         double*, double*);
  void (*kernel_moments)(WeightFn, const double*, const double*, const double*, std::size_t,
                         double, double, double*);
  double (*dot)(const double*, const double*, std::size_t);
  double (*sum)(const double*, std::size_t);
  void (*scaled_add)(const double*, const double*, double, std::size_t, double*);
};

extern const OpsTable kScalarTable;
#ifdef FOSR_BUILD_AVX2
extern const OpsTable kAvx2Table;
#endif

// 1 / (sqrt(2*pi) * erf(1/sqrt(2))): normalizes the Gaussian truncated to [-1,1].
inline constexpr double kTruncGaussScale = 0.584369545087813;

}  // namespace fosr::simd
