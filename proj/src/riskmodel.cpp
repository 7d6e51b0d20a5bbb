#include "gscan/riskmodel.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "gscan/kernels.hpp"

namespace gscan {

namespace {

using Triplet = Eigen::Triplet<double>;

double logit(double p) { return std::log(p) - std::log1p(-p); }
double inv_logit(double v) { return 1.0 / (1.0 + std::exp(-v)); }

StructureMatrix zero_structure(std::size_t dim) {
  StructureMatrix s;
  s.r = SparseMatrix(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  s.rank_deficiency = dim;
  return s;
}

}  // namespace

RiskModel::RiskModel(const StDataset& data, const SpatialGraph& graph, const ModelSpec& spec)
    : spec_(spec), n_(data.n_areas()), t_(data.n_periods()) {
  if (graph.n_areas() != n_) fail(ErrorCode::kInvalidInput, "graph and dataset disagree on area count");
  if (!(spec.prior_beta_sd > 0.0)) fail(ErrorCode::kInvalidInput, "prior_beta_sd must be positive");
  const std::size_t cells = n_ * t_;
  obs_.resize(cells);
  exp_.resize(cells);
  for (std::size_t k = 0; k < cells; ++k) {
    obs_[k] = static_cast<double>(data.observed()[k]);
    exp_[k] = data.expected()[k];
  }

  // Cluster indicator columns, identical cell sets collapsed.
  std::vector<std::vector<std::size_t>> columns;
  for (std::size_t j = 0; j < spec.clusters.size(); ++j) {
    std::vector<std::size_t> idx;
    for (const auto& c : spec.clusters[j]) {
      if (!data.contains(c)) fail(ErrorCode::kInvalidInput, "cluster cell outside the lattice");
      idx.push_back(data.index(c));
    }
    std::sort(idx.begin(), idx.end());
    idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
    if (idx.empty()) {
      warn("cluster " + std::to_string(j + 1) + " has no cells; column dropped");
      continue;
    }
    if (std::find(columns.begin(), columns.end(), idx) != columns.end()) {
      warn("cluster " + std::to_string(j + 1) + " repeats an earlier cell set; columns collapsed");
      continue;
    }
    columns.push_back(std::move(idx));
    cluster_source_.push_back(j);
  }

  auto& L = layout_;
  L.n_beta = columns.size();
  L.n_xi = spec.spatial ? n_ : 0;
  L.n_gamma = spec.temporal ? t_ : 0;
  L.n_delta = spec.interaction_effect ? cells : 0;
  L.beta = 1;
  L.xi = L.beta + L.n_beta;
  L.u = L.xi + L.n_xi;
  L.gamma = L.u + L.n_xi;
  L.delta = L.gamma + L.n_gamma;
  L.size = L.delta + L.n_delta;

  std::vector<Triplet> trips;
  for (std::size_t k = 0; k < cells; ++k) trips.emplace_back(k, 0, 1.0);
  for (std::size_t j = 0; j < columns.size(); ++j) {
    for (auto k : columns[j]) trips.emplace_back(k, L.beta + j, 1.0);
  }
  for (std::size_t t = 0; t < t_; ++t) {
    for (std::size_t i = 0; i < n_; ++i) {
      const std::size_t k = t * n_ + i;
      if (spec.spatial) trips.emplace_back(k, L.xi + i, 1.0);
      if (spec.temporal) trips.emplace_back(k, L.gamma + t, 1.0);
      if (spec.interaction_effect) trips.emplace_back(k, L.delta + k, 1.0);
    }
  }
  design_.resize(static_cast<Eigen::Index>(cells), static_cast<Eigen::Index>(L.size));
  design_.setFromTriplets(trips.begin(), trips.end());

  // Structure matrices. Degenerate factors (one area, no edges, one period)
  // are zero matrices whose constraints pin the effect to 0.
  std::vector<std::size_t> comp(n_);
  for (std::size_t i = 0; i < n_; ++i) comp[i] = graph.component(i);
  const std::size_t n_comp = graph.n_components();
  StructureMatrix s_xi = graph.edges().empty() ? zero_structure(n_)
                                               : scale_structure(icar_precision(graph));
  StructureMatrix s_gamma = t_ >= 2 ? rw1_precision(t_) : zero_structure(t_);
  r_xi_ = s_xi.r;
  r_gamma_ = s_gamma.r;
  if (spec.interaction_effect) {
    r_delta_ = interaction_structure(spec.interaction, s_gamma, s_xi, n_, t_).r;
  }

  std::vector<Eigen::VectorXd> rows;
  auto row = [&] { return Eigen::VectorXd::Zero(static_cast<Eigen::Index>(L.size)).eval(); };
  if (spec.spatial) {
    auto r = row();
    r.segment(static_cast<Eigen::Index>(L.xi), static_cast<Eigen::Index>(n_)).setOnes();
    rows.push_back(r);
    xi_constraints_ = 1;
    for (std::size_t c = 0; c < n_comp; ++c) {
      auto ru = row();
      for (std::size_t i = 0; i < n_; ++i) {
        if (comp[i] == c) ru[static_cast<Eigen::Index>(L.u + i)] = 1.0;
      }
      rows.push_back(ru);
    }
  }
  if (spec.temporal) {
    auto r = row();
    r.segment(static_cast<Eigen::Index>(L.gamma), static_cast<Eigen::Index>(t_)).setOnes();
    rows.push_back(r);
    gamma_constraints_ = 1;
  }
  if (spec.interaction_effect) {
    const Eigen::MatrixXd d = interaction_constraints(spec.interaction, n_, t_, comp);
    delta_constraints_ = static_cast<std::size_t>(d.rows());
    for (Eigen::Index k = 0; k < d.rows(); ++k) {
      auto r = row();
      r.segment(static_cast<Eigen::Index>(L.delta), static_cast<Eigen::Index>(cells)) =
          d.row(k).transpose();
      rows.push_back(r);
    }
  }
  c_.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(L.size));
  for (std::size_t k = 0; k < rows.size(); ++k) c_.row(static_cast<Eigen::Index>(k)) = rows[k];
  if (c_.rows() > 0) cct_.compute(c_ * c_.transpose());
}

SparseMatrix RiskModel::prior_precision(const Hyper& h) const {
  const auto& L = layout_;
  std::vector<Triplet> trips;
  const double beta_prec = 1.0 / (spec_.prior_beta_sd * spec_.prior_beta_sd);
  for (std::size_t j = 0; j < L.n_beta; ++j) trips.emplace_back(L.beta + j, L.beta + j, beta_prec);
  if (spec_.spatial) {
    const double a = h.tau_xi / (1.0 - h.lambda);
    const double b = -std::sqrt(h.lambda * h.tau_xi) / (1.0 - h.lambda);
    const double c = h.lambda / (1.0 - h.lambda);
    for (std::size_t i = 0; i < n_; ++i) {
      trips.emplace_back(L.xi + i, L.xi + i, a);
      trips.emplace_back(L.xi + i, L.u + i, b);
      trips.emplace_back(L.u + i, L.xi + i, b);
      trips.emplace_back(L.u + i, L.u + i, c);
    }
    for (int k = 0; k < r_xi_.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator it(r_xi_, k); it; ++it) {
        trips.emplace_back(L.u + static_cast<std::size_t>(it.row()),
                           L.u + static_cast<std::size_t>(it.col()), it.value());
      }
    }
  }
  auto add_block = [&](const SparseMatrix& r, std::size_t off, double tau) {
    for (int k = 0; k < r.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator it(r, k); it; ++it) {
        trips.emplace_back(off + static_cast<std::size_t>(it.row()),
                           off + static_cast<std::size_t>(it.col()), tau * it.value());
      }
    }
  };
  if (spec_.temporal) add_block(r_gamma_, L.gamma, h.tau_gamma);
  if (spec_.interaction_effect) add_block(r_delta_, L.delta, h.tau_delta);
  SparseMatrix q(static_cast<Eigen::Index>(L.size), static_cast<Eigen::Index>(L.size));
  q.setFromTriplets(trips.begin(), trips.end());
  return q;
}

double RiskModel::prior_log_det(const Hyper& h) const {
  // xi | u is proper with precision tau/(1-lambda) on n - 1 free directions;
  // the structured u part is free of hyperparameters once scaled. Intrinsic
  // blocks contribute their rank on the constrained subspace.
  double v = 0.0;
  if (spec_.spatial) {
    v += static_cast<double>(n_ - xi_constraints_) * (std::log(h.tau_xi) - std::log1p(-h.lambda));
  }
  if (spec_.temporal) v += static_cast<double>(t_ - gamma_constraints_) * std::log(h.tau_gamma);
  if (spec_.interaction_effect) {
    v += static_cast<double>(n_ * t_ - delta_constraints_) * std::log(h.tau_delta);
  }
  return 0.5 * v;
}

Eigen::VectorXd RiskModel::project(const Eigen::VectorXd& x) const {
  if (c_.rows() == 0) return x;
  return x - c_.transpose() * cct_.solve(c_ * x);
}

std::size_t RiskModel::n_hyper() const {
  return (spec_.spatial ? 2 : 0) + (spec_.temporal ? 1 : 0) + (spec_.interaction_effect ? 1 : 0);
}

Eigen::VectorXd RiskModel::to_theta(const Hyper& h) const {
  Eigen::VectorXd th(static_cast<Eigen::Index>(n_hyper()));
  Eigen::Index k = 0;
  if (spec_.spatial) {
    th[k++] = std::log(h.tau_xi);
    th[k++] = logit(h.lambda);
  }
  if (spec_.temporal) th[k++] = std::log(h.tau_gamma);
  if (spec_.interaction_effect) th[k++] = std::log(h.tau_delta);
  return th;
}

Hyper RiskModel::from_theta(const Eigen::VectorXd& th) const {
  Hyper h;
  Eigen::Index k = 0;
  if (spec_.spatial) {
    h.tau_xi = std::exp(th[k++]);
    h.lambda = inv_logit(th[k++]);
  }
  if (spec_.temporal) h.tau_gamma = std::exp(th[k++]);
  if (spec_.interaction_effect) h.tau_delta = std::exp(th[k++]);
  return h;
}

double RiskModel::log_hyperprior(const Hyper& h) const {
  // Flat on each standard deviation, expressed on log precision; uniform
  // mixing weight expressed on its logit.
  double v = 0.0;
  if (spec_.spatial) v += -0.5 * std::log(h.tau_xi) + std::log(h.lambda) + std::log1p(-h.lambda);
  if (spec_.temporal) v += -0.5 * std::log(h.tau_gamma);
  if (spec_.interaction_effect) v += -0.5 * std::log(h.tau_delta);
  return v;
}

namespace {

void check_hyper(const Hyper& h) {
  if (!(h.tau_xi > 0.0) || !(h.tau_gamma > 0.0) || !(h.tau_delta > 0.0) ||
      !(h.lambda >= 0.0 && h.lambda < 1.0) || !std::isfinite(h.tau_xi) ||
      !std::isfinite(h.tau_gamma) || !std::isfinite(h.tau_delta)) {
    fail(ErrorCode::kInvalidInput, "hyperparameters out of range");
  }
}

// Value and (optionally) derivatives given a precomputed prior precision.
Objective evaluate(const RiskModel& m, const Eigen::VectorXd& x, const SparseMatrix& q,
                   bool gradient, bool hessian) {
  const Eigen::VectorXd eta = m.design() * x;
  for (Eigen::Index k = 0; k < eta.size(); ++k) {
    if (!std::isfinite(eta[k]) || std::fabs(eta[k]) > 700.0) {
      fail(ErrorCode::kNumericalOverflow, "linear predictor overflows at cell " + std::to_string(k));
    }
  }
  const auto cells = static_cast<std::size_t>(eta.size());
  Eigen::VectorXd mu(eta.size());
  Objective out;
  out.value = kernels::poisson_terms(eta.data(), m.observed().data(), m.expected().data(), cells,
                                     mu.data());
  const Eigen::VectorXd qx = q * x;
  out.value += 0.5 * x.dot(qx);
  if (gradient || hessian) {
    Eigen::VectorXd resid = mu;
    for (std::size_t k = 0; k < cells; ++k) resid[static_cast<Eigen::Index>(k)] -= m.observed()[k];
    out.gradient = m.design().transpose() * resid + qx;
  }
  if (hessian) {
    const SparseMatrix md = mu.asDiagonal() * m.design();
    out.hessian = SparseMatrix(m.design().transpose() * md) + q;
  }
  return out;
}

double value_or_inf(const RiskModel& m, const Eigen::VectorXd& x, const SparseMatrix& q) {
  try {
    return evaluate(m, x, q, false, false).value;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kNumericalOverflow) return std::numeric_limits<double>::infinity();
    throw;
  }
}

double log_det_ldlt(const Eigen::SimplicialLDLT<SparseMatrix>& f) {
  return f.vectorD().array().log().sum();
}

}  // namespace

Objective neg_log_posterior(const RiskModel& model, const Eigen::VectorXd& x, const Hyper& h,
                            bool with_hessian) {
  check_hyper(h);
  if (x.size() != static_cast<Eigen::Index>(model.layout().size)) {
    fail(ErrorCode::kInvalidInput, "latent vector has the wrong length");
  }
  return evaluate(model, x, model.prior_precision(h), true, with_hessian);
}

ModeFit fit_mode(const RiskModel& model, const Hyper& h, const Eigen::VectorXd* start) {
  check_hyper(h);
  const auto p = static_cast<Eigen::Index>(model.layout().size);
  const auto& c = model.constraints();
  const SparseMatrix q = model.prior_precision(h);

  Eigen::VectorXd x;
  if (start && start->size() == p) {
    x = model.project(*start);
  } else {
    x = Eigen::VectorXd::Zero(p);
    const double so = std::accumulate(model.observed().begin(), model.observed().end(), 0.0);
    const double se = std::accumulate(model.expected().begin(), model.expected().end(), 0.0);
    x[0] = std::log(std::max(so, 0.5) / se);
  }

  auto factorize = [&](const SparseMatrix& hess, Eigen::SimplicialLDLT<SparseMatrix>& f) {
    const double eps = 1e-8 * std::max(hess.diagonal().mean(), 1e-300);
    SparseMatrix reg = hess;
    for (Eigen::Index k = 0; k < p; ++k) reg.coeffRef(k, k) += eps;
    f.compute(reg);
    if (f.info() != Eigen::Success || !(f.vectorD().minCoeff() > 0.0)) {
      fail(ErrorCode::kNumericalOverflow, "Hessian factorization failed");
    }
  };

  ModeFit out;
  auto factor = std::make_shared<Eigen::SimplicialLDLT<SparseMatrix>>();
  int it = 0;
  Objective obj;
  for (;; ++it) {
    obj = evaluate(model, x, q, true, true);
    const Eigen::VectorXd pg = model.project(obj.gradient);
    out.gradient_norm = pg.norm();
    if (out.gradient_norm <= 1e-8 * (1.0 + std::fabs(obj.value))) break;
    if (it >= 100) {
      fail(ErrorCode::kNoConvergence,
           "Newton did not converge in 100 iterations (projected gradient " +
               std::to_string(out.gradient_norm) + ", objective " + std::to_string(obj.value) + ")");
    }
    factorize(obj.hessian, *factor);
    Eigen::VectorXd d = -factor->solve(obj.gradient);
    if (c.rows() > 0) {
      const Eigen::MatrixXd z = factor->solve(Eigen::MatrixXd(c.transpose()));
      const Eigen::MatrixXd s = c * z;
      d -= z * s.ldlt().solve(c * d);
    }
    double slope = obj.gradient.dot(d);
    if (!(slope < 0.0)) {
      d = -pg;
      slope = obj.gradient.dot(d);
    }
    double step = 1.0;
    Eigen::VectorXd next;
    bool moved = false;
    while (step > 1e-14) {
      next = x + step * d;
      if (value_or_inf(model, next, q) <= obj.value + 1e-4 * step * slope) {
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (!moved) {
      // No representable descent left: accept if the predicted decrease is
      // at round-off level.
      if (-slope <= 1e-10 * (1.0 + std::fabs(obj.value))) break;
      fail(ErrorCode::kNoConvergence, "line search failed at Newton iteration " + std::to_string(it));
    }
    x = model.project(next);
  }

  factorize(obj.hessian, *factor);
  out.x = x;
  out.value = obj.value;
  out.hyper = h;
  out.iterations = it;
  double log_det_h = log_det_ldlt(*factor);
  if (c.rows() > 0) {
    out.z_ = factor->solve(Eigen::MatrixXd(c.transpose()));
    const Eigen::MatrixXd s = c * out.z_;
    const Eigen::LLT<Eigen::MatrixXd> llt(s);
    if (llt.info() != Eigen::Success) fail(ErrorCode::kNumericalOverflow, "constraint Schur complement is singular");
    out.s_inv_ = llt.solve(Eigen::MatrixXd::Identity(s.rows(), s.cols()));
    const Eigen::LLT<Eigen::MatrixXd> cct(c * c.transpose());
    log_det_h += 2.0 * Eigen::MatrixXd(llt.matrixL()).diagonal().array().log().sum() -
                 2.0 * Eigen::MatrixXd(cct.matrixL()).diagonal().array().log().sum();
  }
  out.log_marginal = -out.value + model.prior_log_det(h) - 0.5 * log_det_h;

  // Conditioning of the fixed effects (intercept and cluster columns), where
  // near-collinearity shows up.
  const auto nf = static_cast<Eigen::Index>(1 + model.layout().n_beta);
  const Eigen::MatrixXd fixed = Eigen::MatrixXd(obj.hessian).topLeftCorner(nf, nf);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(fixed, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  out.condition = lo > 0.0 ? es.eigenvalues().maxCoeff() / lo : std::numeric_limits<double>::infinity();

  out.factor_ = factor;
  out.model_ = &model;
  return out;
}

Eigen::VectorXd ModeFit::draw(std::uint64_t seed) const {
  if (!factor_) fail(ErrorCode::kInvalidInput, "mode fit has no Gaussian approximation");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  const auto p = x.size();
  Eigen::VectorXd w(p);
  const auto& dvec = factor_->vectorD();
  for (Eigen::Index k = 0; k < p; ++k) w[k] = nd(rng) / std::sqrt(dvec[k]);
  // P H P^T = L D L^T, so P^T L^-T D^-1/2 z has covariance H^-1.
  const Eigen::VectorXd v = factor_->matrixU().solve(w);
  Eigen::VectorXd y = factor_->permutationPinv() * v;
  const auto& c = model_->constraints();
  if (c.rows() > 0) y -= z_ * (s_inv_ * (c * y));
  return model_->project(x + y);
}

namespace {

struct SearchContext {
  const RiskModel* model = nullptr;
  HyperSearch search;
  Eigen::VectorXd warm;
  int evaluations = 0;
  double best = std::numeric_limits<double>::infinity();
  double run_best = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_theta;
};

double box_excess(const RiskModel& m, const HyperSearch& s, const Eigen::VectorXd& th) {
  double excess = 0.0;
  Eigen::Index k = 0;
  auto tau = [&](double v) {
    excess += std::max(0.0, s.log_tau_min - v) + std::max(0.0, v - s.log_tau_max);
  };
  if (m.spec().spatial) {
    tau(th[k++]);
    excess += std::max(0.0, std::fabs(th[k++]) - s.logit_lambda_bound);
  }
  if (m.spec().temporal) tau(th[k++]);
  if (m.spec().interaction_effect) tau(th[k++]);
  return excess;
}

double search_objective(const gsl_vector* v, void* params) {
  auto& ctx = *static_cast<SearchContext*>(params);
  Eigen::VectorXd th(static_cast<Eigen::Index>(v->size));
  for (std::size_t k = 0; k < v->size; ++k) th[static_cast<Eigen::Index>(k)] = gsl_vector_get(v, k);
  const double excess = box_excess(*ctx.model, ctx.search, th);
  if (excess > 0.0) return 1e30 * (1.0 + excess);
  ++ctx.evaluations;
  try {
    const auto mf = fit_mode(*ctx.model, ctx.model->from_theta(th),
                             ctx.warm.size() > 0 ? &ctx.warm : nullptr);
    ctx.warm = mf.x;
    const double val = -mf.log_marginal - (ctx.search.log_scale_jacobian
                                               ? ctx.model->log_hyperprior(mf.hyper)
                                               : 0.0);
    if (!std::isfinite(val)) return 1e30;
    ctx.run_best = std::min(ctx.run_best, val);
    if (val < ctx.best) {
      ctx.best = val;
      ctx.best_theta = th;
    }
    return val;
  } catch (const Error&) {
    // Hyperparameters where the mode cannot be found are simply unattractive.
    return 1e30;
  }
}

}  // namespace

HyperResult optimize_hyper(const RiskModel& model) {
  HyperResult res;
  const auto dim = model.n_hyper();
  if (dim == 0) {
    const auto mf = fit_mode(model, Hyper{});
    res.hyper = Hyper{};
    res.log_marginal = mf.log_marginal;
    res.evaluations = 1;
    return res;
  }
  gsl_set_error_handler_off();
  SearchContext ctx;
  ctx.model = &model;
  ctx.search = model.spec().search;

  gsl_multimin_function fn;
  fn.n = dim;
  fn.f = &search_objective;
  fn.params = &ctx;
  gsl_vector* x0 = gsl_vector_alloc(dim);
  gsl_vector* step = gsl_vector_alloc(dim);
  gsl_multimin_fminimizer* solver = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, dim);

  // Deterministic restarts: a moderate default, a diffuse one, then a tight
  // simplex around the best point so far.
  const int runs = std::max(1, model.spec().search.restarts);
  for (int run = 0; run < runs; ++run) {
    Hyper start;
    double width = 1.5;
    if (run == 1) {
      start.tau_xi = start.tau_gamma = start.tau_delta = std::exp(1.0);
      start.lambda = inv_logit(-2.0);
    }
    Eigen::VectorXd th = model.to_theta(start);
    if (run >= 2 && ctx.best_theta.size() > 0) {
      th = ctx.best_theta;
      width = 0.5;
    }
    for (std::size_t k = 0; k < dim; ++k) {
      gsl_vector_set(x0, k, th[static_cast<Eigen::Index>(k)]);
      gsl_vector_set(step, k, width);
    }
    ctx.run_best = std::numeric_limits<double>::infinity();
    gsl_multimin_fminimizer_set(solver, &fn, x0, step);
    for (int it = 0; it < model.spec().search.max_iterations; ++it) {
      if (gsl_multimin_fminimizer_iterate(solver) != GSL_SUCCESS) break;
      const double size = gsl_multimin_fminimizer_size(solver);
      if (gsl_multimin_test_size(size, model.spec().search.size_tolerance) == GSL_SUCCESS) break;
    }
    res.restart_values.push_back(-ctx.run_best);
  }
  gsl_multimin_fminimizer_free(solver);
  gsl_vector_free(step);
  gsl_vector_free(x0);

  if (!std::isfinite(ctx.best) || ctx.best >= 1e30) {
    fail(ErrorCode::kNoConvergence, "no hyperparameter restart produced a usable mode");
  }
  res.hyper = model.from_theta(ctx.best_theta);
  res.log_marginal = -ctx.best;
  res.evaluations = ctx.evaluations;
  return res;
}

RiskFit fit(const RiskModel& model) {
  RiskFit out;
  out.search = optimize_hyper(model);
  out.mode = fit_mode(model, out.search.hyper);
  out.ill_conditioned = out.mode.condition > 1e8;
  if (out.ill_conditioned) {
    warn("fixed-effect block is ill-conditioned (condition proxy " +
         std::to_string(out.mode.condition) + ")");
  }
  return out;
}

Eigen::MatrixXd posterior_samples(const ModeFit& mode, std::size_t n_samples, std::uint64_t seed) {
  Eigen::MatrixXd out(mode.x.size(), static_cast<Eigen::Index>(n_samples));
  const auto base = derive_seed(seed, stream::kPosterior);
  const auto s_count = static_cast<std::ptrdiff_t>(n_samples);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t s = 0; s < s_count; ++s) {
    out.col(s) = mode.draw(derive_seed(base, static_cast<std::uint64_t>(s)));
  }
  return out;
}

Eigen::MatrixXd eta_samples(const RiskModel& model, const Eigen::MatrixXd& latent) {
  return model.design() * latent;
}

namespace {

double log_sum_exp(const double* v, std::size_t n) {
  const double m = *std::max_element(v, v + n);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += std::exp(v[i] - m);
  return m + std::log(s);
}

}  // namespace

Criteria information_criteria(const StDataset& data, const Eigen::MatrixXd& eta) {
  const auto cells = static_cast<Eigen::Index>(data.n_cells());
  if (eta.rows() != cells) fail(ErrorCode::kInvalidInput, "one linear predictor row per cell");
  const auto S = static_cast<std::size_t>(eta.cols());
  if (S < 100) fail(ErrorCode::kInvalidInput, "information criteria need at least 100 draws");
  const double log_s = std::log(static_cast<double>(S));

  Criteria cr;
  double dev_sum = 0.0, dev_mean = 0.0;
  std::vector<double> lp(S), neg(S);
  for (Eigen::Index k = 0; k < cells; ++k) {
    const double o = static_cast<double>(data.observed()[static_cast<std::size_t>(k)]);
    const double e = data.expected()[static_cast<std::size_t>(k)];
    const double lg = std::lgamma(o + 1.0);
    double mean_eta = 0.0, m1 = 0.0;
    for (std::size_t s = 0; s < S; ++s) {
      const double v = eta(k, static_cast<Eigen::Index>(s));
      lp[s] = o * v - e * std::exp(v) - lg;
      neg[s] = -lp[s];
      mean_eta += v;
      m1 += lp[s];
    }
    mean_eta /= static_cast<double>(S);
    m1 /= static_cast<double>(S);
    double var = 0.0;
    for (double v : lp) var += (v - m1) * (v - m1);
    var /= static_cast<double>(S - 1);

    dev_sum += -2.0 * m1;
    dev_mean += -2.0 * (o * mean_eta - e * std::exp(mean_eta) - lg);
    cr.lppd += log_sum_exp(lp.data(), S) - log_s;
    cr.p_waic += var;
    const double log_cpo = -(log_sum_exp(neg.data(), S) - log_s);
    cr.ls -= log_cpo;

    // Effective sample size of the harmonic-mean weights 1/p.
    const double mx = *std::max_element(neg.begin(), neg.end());
    double w1 = 0.0, w2 = 0.0;
    for (double v : neg) {
      const double w = std::exp(v - mx);
      w1 += w;
      w2 += w * w;
    }
    if (w1 * w1 / w2 < 10.0) cr.flagged_cells.push_back(static_cast<std::size_t>(k));
  }
  cr.deviance_bar = dev_sum;
  cr.p_d = dev_sum - dev_mean;
  cr.dic = cr.deviance_bar + cr.p_d;
  cr.waic = -2.0 * (cr.lppd - cr.p_waic);
  cr.ls /= static_cast<double>(cells);
  return cr;
}

std::vector<double> exceedance_prob(const Eigen::MatrixXd& eta, double threshold, Tail tail) {
  std::vector<double> out(static_cast<std::size_t>(eta.rows()), 0.0);
  if (eta.cols() == 0) return out;
  for (Eigen::Index k = 0; k < eta.rows(); ++k) {
    std::size_t hits = 0;
    for (Eigen::Index s = 0; s < eta.cols(); ++s) {
      const double r = std::exp(eta(k, s));
      hits += (tail == Tail::kAbove ? r > threshold : r < threshold) ? 1 : 0;
    }
    out[static_cast<std::size_t>(k)] = static_cast<double>(hits) / static_cast<double>(eta.cols());
  }
  return out;
}

double quantile_type7(std::vector<double> v, double p) {
  if (v.empty()) fail(ErrorCode::kInvalidInput, "quantile of an empty sample");
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= v.size()) return v.back();
  return v[lo] + (h - static_cast<double>(lo)) * (v[lo + 1] - v[lo]);
}

RiskSummary risk_summary(const Eigen::MatrixXd& eta) {
  RiskSummary out;
  const auto cells = static_cast<std::size_t>(eta.rows());
  out.median.resize(cells);
  out.lo95.resize(cells);
  out.hi95.resize(cells);
  std::vector<double> r(static_cast<std::size_t>(eta.cols()));
  for (std::size_t k = 0; k < cells; ++k) {
    for (Eigen::Index s = 0; s < eta.cols(); ++s) {
      r[static_cast<std::size_t>(s)] = std::exp(eta(static_cast<Eigen::Index>(k), s));
    }
    out.lo95[k] = quantile_type7(r, 0.025);
    out.median[k] = quantile_type7(r, 0.5);
    out.hi95[k] = quantile_type7(r, 0.975);
  }
  return out;
}

}  // namespace gscan
