#include <atomic>

#include "table.hpp"

namespace fosr::simd {
namespace {

bool avx2_available() {
#if defined(FOSR_BUILD_AVX2) && (defined(__x86_64__) || defined(_M_X64))
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const OpsTable* pick(Isa isa) {
#ifdef FOSR_BUILD_AVX2
  if (isa == Isa::Avx2) return &kAvx2Table;
#endif
  (void)isa;
  return &kScalarTable;
}

std::atomic<const OpsTable*> g_table{nullptr};
std::atomic<Isa> g_isa{Isa::Scalar};

const OpsTable* table() {
  const OpsTable* t = g_table.load(std::memory_order_acquire);
  if (t == nullptr) {
    const Isa isa = avx2_available() ? Isa::Avx2 : Isa::Scalar;
    g_isa.store(isa, std::memory_order_relaxed);
    t = pick(isa);
    g_table.store(t, std::memory_order_release);
  }
  return t;
}

}  // namespace

Isa active_isa() {
  table();
  return g_isa.load(std::memory_order_relaxed);
}

void force_isa(Isa isa) {
  if (isa == Isa::Avx2 && !avx2_available()) isa = Isa::Scalar;
  g_isa.store(isa, std::memory_order_relaxed);
  g_table.store(pick(isa), std::memory_order_release);
}

std::string isa_name(Isa isa) { return isa == Isa::Avx2 ? "avx2" : "scalar"; }

void kernel_weights(WeightFn fn, const double* t, const double* wpre, std::size_t n, double t0,
                    double h, double* k, double* kd) {
  table()->kernel_weights(fn, t, wpre, n, t0, h, k, kd);
}

void kernel_moments(WeightFn fn, const double* t, const double* y, const double* wpre,
                    std::size_t n, double t0, double h, double out[5]) {
  table()->kernel_moments(fn, t, y, wpre, n, t0, h, out);
}

double dot(const double* a, const double* b, std::size_t n) { return table()->dot(a, b, n); }

double sum(const double* a, std::size_t n) { return table()->sum(a, n); }

void scaled_add(const double* a, const double* b, double s, std::size_t n, double* out) {
  table()->scaled_add(a, b, s, n, out);
}

}  // namespace fosr::simd
