#pragma once

// Hot arithmetic loops with a scalar reference implementation and an AVX2
// variant chosen at runtime. Both produce results equal to within a few ulps;
// tests pin the equivalence.

#include <cstddef>
#include <string_view>

namespace gscan::kernels {

enum class Isa { kScalar, kAvx2 };

// Best ISA supported by this CPU (and by the build).
Isa detected_isa();
// The ISA currently used by the dispatching entry points.
Isa active_isa();
// Overrides dispatch; requesting an unsupported ISA falls back to scalar.
void force_isa(Isa isa);
std::string_view to_string(Isa isa);

// f(x) = (1 + x) log1p(x) - x, the building block of the Poisson LLR.
// Accurate for x >= -1 without cancellation near 0.
double xlogx_excess(double x);

// For each candidate j, the log-LLR of the window extended by that candidate:
// inside counts (obs_in + obs[j], exp_in + exp[j]) against totals
// (total_obs, total_exp). Writes -infinity where the direction indicator
// fails (`high` selects the hot-spot test) or the extended window would hold
// all expected mass.
struct LlrBatch {
  const double* obs;
  const double* exp;
  std::size_t n;
  double obs_in;
  double exp_in;
  double total_obs;
  double total_exp;
  bool high;
};

void llr_batch(const LlrBatch& batch, double* out);
void llr_batch_scalar(const LlrBatch& batch, double* out);
void llr_batch_avx2(const LlrBatch& batch, double* out);

// Poisson likelihood pieces for eta: mu = e * exp(eta). Writes mu into `mu`
// and returns sum(mu - o * eta).
double poisson_terms(const double* eta, const double* obs, const double* exp,
                     std::size_t n, double* mu);
double poisson_terms_scalar(const double* eta, const double* obs,
                            const double* exp, std::size_t n, double* mu);
double poisson_terms_avx2(const double* eta, const double* obs,
                          const double* exp, std::size_t n, double* mu);

}  // namespace gscan::kernels
