// Compiled with -mavx2 -mfma; only reached after a CPUID check.

#include <immintrin.h>

#include <cmath>
#include <limits>

#include "gscan/kernels.hpp"

namespace gscan::kernels {

namespace {

constexpr double kLn2Hi = 6.93147180369123816490e-01;
constexpr double kLn2Lo = 1.90821492927058770002e-10;

// sum_{k=1..12} s^(2k-2) / (2k+1), the same polynomial as the scalar path.
inline __m256d atanh_poly(__m256d s2) {
  __m256d acc = _mm256_set1_pd(1.0 / 25.0);
  for (int k = 11; k >= 1; --k) {
    acc = _mm256_fmadd_pd(s2, acc, _mm256_set1_pd(1.0 / (2 * k + 1)));
  }
  return acc;
}

// Integer-valued doubles in [-2^51, 2^51] <-> int64 lanes.
inline __m256d i64_to_pd(__m256i v) {
  const __m256d magic = _mm256_set1_pd(6755399441055744.0);  // 2^52 + 2^51
  return _mm256_sub_pd(
      _mm256_castsi256_pd(_mm256_add_epi64(v, _mm256_castpd_si256(magic))), magic);
}
inline __m256i pd_to_i64(__m256d v) {
  const __m256d magic = _mm256_set1_pd(6755399441055744.0);
  return _mm256_sub_epi64(_mm256_castpd_si256(_mm256_add_pd(v, magic)),
                          _mm256_castpd_si256(magic));
}

// Natural log for positive, normal inputs.
inline __m256d log_pd(__m256d w) {
  const __m256i bits = _mm256_castpd_si256(w);
  const __m256i mant_mask = _mm256_set1_epi64x(0x000fffffffffffffLL);
  const __m256i one_bits = _mm256_set1_epi64x(0x3ff0000000000000LL);
  __m256i expo = _mm256_sub_epi64(_mm256_srli_epi64(bits, 52),
                                  _mm256_set1_epi64x(1023));
  __m256d m = _mm256_castsi256_pd(
      _mm256_or_si256(_mm256_and_si256(bits, mant_mask), one_bits));
  // Fold m into [sqrt(1/2), sqrt(2)).
  const __m256d big = _mm256_cmp_pd(m, _mm256_set1_pd(1.4142135623730951), _CMP_GT_OQ);
  m = _mm256_blendv_pd(m, _mm256_mul_pd(m, _mm256_set1_pd(0.5)), big);
  expo = _mm256_add_epi64(expo, _mm256_and_si256(_mm256_castpd_si256(big),
                                                 _mm256_set1_epi64x(1)));
  const __m256d k = i64_to_pd(expo);
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d s = _mm256_div_pd(_mm256_sub_pd(m, one), _mm256_add_pd(m, one));
  const __m256d s2 = _mm256_mul_pd(s, s);
  // 2 atanh(s) = 2s + 2 s^3 * poly(s^2)
  const __m256d two_s = _mm256_add_pd(s, s);
  const __m256d tail = _mm256_mul_pd(_mm256_mul_pd(two_s, s2), atanh_poly(s2));
  __m256d r = _mm256_fmadd_pd(k, _mm256_set1_pd(kLn2Lo), tail);
  r = _mm256_add_pd(r, two_s);
  return _mm256_fmadd_pd(k, _mm256_set1_pd(kLn2Hi), r);
}

// (1 + x) log1p(x) - x for x > -1; lanes with x <= -1 yield 1.
inline __m256d xlogx_excess_pd(__m256d x) {
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d two = _mm256_set1_pd(2.0);
  const __m256d w = _mm256_add_pd(one, x);
  const __m256d denom = _mm256_add_pd(two, x);
  const __m256d s = _mm256_div_pd(x, denom);
  const __m256d abs_s = _mm256_andnot_pd(_mm256_set1_pd(-0.0), s);
  const __m256d small = _mm256_cmp_pd(abs_s, _mm256_set1_pd(0.2), _CMP_LE_OQ);

  const __m256d s2 = _mm256_mul_pd(s, s);
  const __m256d tail = _mm256_mul_pd(
      _mm256_mul_pd(_mm256_add_pd(s, s), s2), atanh_poly(s2));
  const __m256d near = _mm256_fmadd_pd(w, tail, _mm256_div_pd(_mm256_mul_pd(x, x), denom));

  const __m256d dead = _mm256_cmp_pd(x, _mm256_set1_pd(-1.0), _CMP_LE_OQ);
  const __m256d safe_w = _mm256_blendv_pd(w, one, dead);
  const __m256d far = _mm256_fmsub_pd(safe_w, log_pd(safe_w), x);

  __m256d out = _mm256_blendv_pd(far, near, small);
  return _mm256_blendv_pd(out, one, dead);
}

// exp for |x| <= 700.
inline __m256d exp_pd(__m256d x) {
  x = _mm256_min_pd(_mm256_max_pd(x, _mm256_set1_pd(-700.0)), _mm256_set1_pd(700.0));
  const __m256d k = _mm256_round_pd(_mm256_mul_pd(x, _mm256_set1_pd(1.4426950408889634)),
                                    _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fnmadd_pd(k, _mm256_set1_pd(kLn2Hi), x);
  r = _mm256_fnmadd_pd(k, _mm256_set1_pd(kLn2Lo), r);
  // Taylor series to r^13 / 13!; |r| <= ln2 / 2.
  __m256d p = _mm256_set1_pd(1.0 / 6227020800.0);
  constexpr double kInvFact[] = {1.0 / 479001600.0, 1.0 / 39916800.0,
                                 1.0 / 3628800.0,   1.0 / 362880.0,
                                 1.0 / 40320.0,     1.0 / 5040.0,
                                 1.0 / 720.0,       1.0 / 120.0,
                                 1.0 / 24.0,        1.0 / 6.0,
                                 0.5,               1.0,
                                 1.0};
  for (double c : kInvFact) p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(c));
  const __m256i scale = _mm256_slli_epi64(
      _mm256_add_epi64(pd_to_i64(k), _mm256_set1_epi64x(1023)), 52);
  return _mm256_mul_pd(p, _mm256_castsi256_pd(scale));
}

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

}  // namespace

void llr_batch_avx2(const LlrBatch& b, double* out) {
  const __m256d o_in = _mm256_set1_pd(b.obs_in);
  const __m256d e_in = _mm256_set1_pd(b.exp_in);
  const __m256d to = _mm256_set1_pd(b.total_obs);
  const __m256d te = _mm256_set1_pd(b.total_exp);
  const __m256d offset = _mm256_set1_pd(b.total_obs - b.total_exp);
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d zero = _mm256_setzero_pd();
  const __m256d none = _mm256_set1_pd(-std::numeric_limits<double>::infinity());
  std::size_t j = 0;
  for (; j + 4 <= b.n; j += 4) {
    const __m256d o = _mm256_add_pd(o_in, _mm256_loadu_pd(b.obs + j));
    const __m256d e = _mm256_add_pd(e_in, _mm256_loadu_pd(b.exp + j));
    const __m256d o2 = _mm256_sub_pd(to, o);
    const __m256d e2 = _mm256_sub_pd(te, e);
    const __m256d lhs = _mm256_mul_pd(o, e2);
    const __m256d rhs = _mm256_mul_pd(o2, e);
    __m256d ok = b.high ? _mm256_cmp_pd(lhs, rhs, _CMP_GT_OQ)
                        : _mm256_cmp_pd(lhs, rhs, _CMP_LT_OQ);
    ok = _mm256_and_pd(ok, _mm256_cmp_pd(e2, zero, _CMP_GT_OQ));
    const __m256d safe_e2 = _mm256_blendv_pd(one, e2, ok);
    const __m256d d = _mm256_sub_pd(o, e);
    const __m256d x = _mm256_div_pd(d, e);
    const __m256d y = _mm256_div_pd(_mm256_sub_pd(offset, d), safe_e2);
    __m256d v = _mm256_mul_pd(safe_e2, xlogx_excess_pd(y));
    v = _mm256_fmadd_pd(e, xlogx_excess_pd(x), v);
    v = _mm256_add_pd(v, offset);
    _mm256_storeu_pd(out + j, _mm256_blendv_pd(none, v, ok));
  }
  if (j < b.n) {
    LlrBatch rest = b;
    rest.obs += j;
    rest.exp += j;
    rest.n -= j;
    llr_batch_scalar(rest, out + j);
  }
}

double poisson_terms_avx2(const double* eta, const double* obs,
                          const double* exp, std::size_t n, double* mu) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d h = _mm256_loadu_pd(eta + i);
    const __m256d m = _mm256_mul_pd(_mm256_loadu_pd(exp + i), exp_pd(h));
    _mm256_storeu_pd(mu + i, m);
    acc = _mm256_add_pd(acc, _mm256_fnmadd_pd(_mm256_loadu_pd(obs + i), h, m));
  }
  double total = hsum(acc);
  if (i < n) total += poisson_terms_scalar(eta + i, obs + i, exp + i, n - i, mu + i);
  return total;
}

}  // namespace gscan::kernels
