#pragma once

// Cluster-aware Poisson risk model with BYM2 spatial, RW1 temporal and
// Knorr-Held interaction effects, fitted by empirical-Bayes Laplace
// approximation: constrained Newton for the latent mode, Nelder-Mead over the
// hyperparameters, Gaussian posterior draws at the mode.

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "gscan/gmrf.hpp"
#include "gscan/stdata.hpp"
#include "gscan/stgraph.hpp"

namespace gscan {

struct Hyper {
  double tau_xi = 100.0;
  double lambda = 0.5;  // BYM2 mixing weight of the structured part
  double tau_gamma = 100.0;
  double tau_delta = 100.0;
};

struct HyperSearch {
  int restarts = 3;
  int max_iterations = 400;  // per simplex run
  double size_tolerance = 1e-3;
  double log_tau_min = -6.0;
  double log_tau_max = 14.0;
  double logit_lambda_bound = 8.0;
  // Uniform priors on the standard deviations and on lambda leave the mode,
  // taken in those coordinates, where the marginal likelihood puts it. Set
  // this to instead maximize the density of (log tau, logit lambda).
  bool log_scale_jacobian = false;
};

struct ModelSpec {
  Interaction interaction = Interaction::kIV;
  // One indicator column per cell set; identical sets are collapsed.
  std::vector<std::vector<StCell>> clusters;
  double prior_beta_sd = 1000.0;
  bool spatial = true;
  bool temporal = true;
  bool interaction_effect = true;
  HyperSearch search;
  std::uint64_t seed = 0;
};

// Offsets of each block in the latent vector
// x = (alpha, beta_1..J, xi_1..n, u_1..n, gamma_1..T, delta_11..nT).
struct LatentLayout {
  std::size_t beta = 1, xi = 1, u = 1, gamma = 1, delta = 1, size = 1;
  std::size_t n_beta = 0, n_xi = 0, n_gamma = 0, n_delta = 0;
};

class RiskModel {
 public:
  RiskModel(const StDataset& data, const SpatialGraph& graph, const ModelSpec& spec);

  const LatentLayout& layout() const { return layout_; }
  const ModelSpec& spec() const { return spec_; }
  std::size_t n_areas() const { return n_; }
  std::size_t n_periods() const { return t_; }
  std::size_t n_cells() const { return n_ * t_; }
  std::span<const double> observed() const { return obs_; }
  std::span<const double> expected() const { return exp_; }

  // Cells x latent design: eta = D x.
  const SparseMatrix& design() const { return design_; }
  // Rows are linear constraints C x = 0.
  const Eigen::MatrixXd& constraints() const { return c_; }
  // Which input cluster each indicator column came from (first occurrence).
  const std::vector<std::size_t>& cluster_columns() const { return cluster_source_; }

  SparseMatrix prior_precision(const Hyper& h) const;
  // Log-determinant terms of the constrained prior that depend on h.
  double prior_log_det(const Hyper& h) const;

  // Orthogonal projection onto {C x = 0}.
  Eigen::VectorXd project(const Eigen::VectorXd& x) const;

  // Hyperparameters that are actually free given the included blocks.
  std::size_t n_hyper() const;
  Eigen::VectorXd to_theta(const Hyper& h) const;
  Hyper from_theta(const Eigen::VectorXd& theta) const;
  double log_hyperprior(const Hyper& h) const;

 private:
  ModelSpec spec_;
  std::size_t n_ = 0, t_ = 0;
  std::vector<double> obs_, exp_;
  LatentLayout layout_;
  SparseMatrix design_;
  SparseMatrix r_xi_, r_gamma_, r_delta_;
  std::size_t xi_constraints_ = 0, gamma_constraints_ = 0, delta_constraints_ = 0;
  Eigen::MatrixXd c_;
  Eigen::LDLT<Eigen::MatrixXd> cct_;
  std::vector<std::size_t> cluster_source_;
};

struct Objective {
  double value = 0.0;
  Eigen::VectorXd gradient;
  SparseMatrix hessian;
};

// Sum over cells of E exp(eta) - O eta plus half the prior quadratic form.
// Throws NumericalOverflow when some eta is not finite.
Objective neg_log_posterior(const RiskModel& model, const Eigen::VectorXd& x, const Hyper& h,
                            bool with_hessian = true);

// Mode at fixed hyperparameters with its Gaussian approximation.
class ModeFit {
 public:
  Eigen::VectorXd x;
  double value = 0.0;  // objective at the mode
  Hyper hyper;
  int iterations = 0;
  double gradient_norm = 0.0;
  double log_marginal = 0.0;  // Laplace log marginal likelihood, up to a constant
  double condition = 1.0;     // eigenvalue ratio of the intercept/cluster Hessian block

  // x ~ N(mode, H^-1) conditioned on C x = 0.
  Eigen::VectorXd draw(std::uint64_t seed) const;

 private:
  friend ModeFit fit_mode(const RiskModel&, const Hyper&, const Eigen::VectorXd*);
  std::shared_ptr<const Eigen::SimplicialLDLT<SparseMatrix>> factor_;
  Eigen::MatrixXd z_;  // H^-1 C^T
  Eigen::MatrixXd s_inv_;  // (C H^-1 C^T)^-1
  const RiskModel* model_ = nullptr;
};

// Throws NoConvergence after 100 Newton iterations.
ModeFit fit_mode(const RiskModel& model, const Hyper& h, const Eigen::VectorXd* start = nullptr);

struct HyperResult {
  Hyper hyper;
  double log_marginal = 0.0;
  int evaluations = 0;
  std::vector<double> restart_values;  // best log marginal of each run
};

HyperResult optimize_hyper(const RiskModel& model);

struct RiskFit {
  ModeFit mode;
  HyperResult search;
  bool converged = true;
  bool ill_conditioned = false;  // condition proxy above 1e8
};

// Hyper search followed by a final mode fit at the selected hyperparameters.
RiskFit fit(const RiskModel& model);

// Latent draws as columns (latent size x S).
Eigen::MatrixXd posterior_samples(const ModeFit& mode, std::size_t n_samples, std::uint64_t seed);

// Linear predictor draws as columns (cells x S).
Eigen::MatrixXd eta_samples(const RiskModel& model, const Eigen::MatrixXd& latent);

struct Criteria {
  double deviance_bar = 0.0;
  double p_d = 0.0;
  double dic = 0.0;
  double lppd = 0.0;
  double p_waic = 0.0;
  double waic = 0.0;
  double ls = 0.0;
  std::vector<std::size_t> flagged_cells;  // CPO effective sample size < 10
};

// Poisson deviance-based criteria from linear predictor draws.
Criteria information_criteria(const StDataset& data, const Eigen::MatrixXd& eta);

enum class Tail { kAbove, kBelow };

// Per cell, the share of draws with exp(eta) beyond `threshold`.
std::vector<double> exceedance_prob(const Eigen::MatrixXd& eta, double threshold, Tail tail);

struct RiskSummary {
  std::vector<double> median, lo95, hi95;
};

// Type-7 quantiles 0.025 / 0.5 / 0.975 of exp(eta) per cell.
RiskSummary risk_summary(const Eigen::MatrixXd& eta);

// Empirical quantile with linear interpolation between order statistics.
double quantile_type7(std::vector<double> values, double p);

}  // namespace gscan
