#include <cmath>
#include <limits>

#include "gscan/kernels.hpp"

namespace gscan::kernels {

namespace {

// 2 * sum_{k>=1} s^(2k+1) / (2k+1): the tail of 2 atanh(s) after its linear
// term. Used for |s| <= 0.2, where 12 terms reach double precision.
double atanh_tail(double s) {
  const double s2 = s * s;
  double acc = 1.0 / 25.0;
  for (int k = 11; k >= 1; --k) acc = 1.0 / (2 * k + 1) + s2 * acc;
  return 2.0 * s * s2 * acc;
}

}  // namespace

double xlogx_excess(double x) {
  if (x <= -1.0) return 1.0;  // (1+x) log(1+x) -> 0 as x -> -1
  const double s = x / (2.0 + x);
  if (std::fabs(s) <= 0.2) {
    // log1p(x) = 2 atanh(s), and (1+x) * 2s - x = x^2 / (2+x) exactly.
    return x * x / (2.0 + x) + (1.0 + x) * atanh_tail(s);
  }
  return (1.0 + x) * std::log1p(x) - x;
}

void llr_batch_scalar(const LlrBatch& b, double* out) {
  constexpr double kNone = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < b.n; ++j) {
    const double o = b.obs_in + b.obs[j];
    const double e = b.exp_in + b.exp[j];
    const double o2 = b.total_obs - o;
    const double e2 = b.total_exp - e;
    if (!(e2 > 0.0)) {
      out[j] = kNone;
      continue;
    }
    const double lhs = o * e2;
    const double rhs = o2 * e;
    if (b.high ? !(lhs > rhs) : !(lhs < rhs)) {
      out[j] = kNone;
      continue;
    }
    // Relative excesses from the differences, which are exact for nearby
    // counts, rather than from o / e - 1.
    const double d = o - e;
    const double offset = b.total_obs - b.total_exp;
    out[j] = e * xlogx_excess(d / e) + e2 * xlogx_excess((offset - d) / e2) + offset;
  }
}

double poisson_terms_scalar(const double* eta, const double* obs,
                            const double* exp, std::size_t n, double* mu) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mu[i] = exp[i] * std::exp(eta[i]);
    acc += mu[i] - obs[i] * eta[i];
  }
  return acc;
}

}  // namespace gscan::kernels
