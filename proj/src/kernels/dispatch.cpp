#include <atomic>

#include "gscan/kernels.hpp"

namespace gscan::kernels {

namespace {

bool cpu_has_avx2() {
#if defined(GSCAN_HAVE_AVX2) && (defined(__x86_64__) || defined(__i386__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

std::atomic<Isa>& current() {
  static std::atomic<Isa> isa{detected_isa()};
  return isa;
}

}  // namespace

Isa detected_isa() {
  static const Isa isa = cpu_has_avx2() ? Isa::kAvx2 : Isa::kScalar;
  return isa;
}

Isa active_isa() { return current().load(std::memory_order_relaxed); }

void force_isa(Isa isa) {
  if (isa == Isa::kAvx2 && detected_isa() != Isa::kAvx2) isa = Isa::kScalar;
  current().store(isa, std::memory_order_relaxed);
}

std::string_view to_string(Isa isa) {
  return isa == Isa::kAvx2 ? "avx2" : "scalar";
}

void llr_batch(const LlrBatch& batch, double* out) {
#ifdef GSCAN_HAVE_AVX2
  if (active_isa() == Isa::kAvx2) return llr_batch_avx2(batch, out);
#endif
  llr_batch_scalar(batch, out);
}

double poisson_terms(const double* eta, const double* obs, const double* exp,
                     std::size_t n, double* mu) {
#ifdef GSCAN_HAVE_AVX2
  if (active_isa() == Isa::kAvx2) return poisson_terms_avx2(eta, obs, exp, n, mu);
#endif
  return poisson_terms_scalar(eta, obs, exp, n, mu);
}

}  // namespace gscan::kernels
