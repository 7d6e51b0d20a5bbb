#include "gscan/gmrf.hpp"

#include <Eigen/SparseCholesky>
#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/SparseExtra>
#include <cmath>
#include <random>

namespace gscan {

Interaction interaction_from_int(int kind) {
  if (kind < 1 || kind > 4) {
    fail(ErrorCode::kInvalidInput, "interaction type must be 1, 2, 3 or 4");
  }
  return static_cast<Interaction>(kind);
}

namespace {

using Triplet = Eigen::Triplet<double>;

SparseMatrix identity(std::size_t n) {
  SparseMatrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  m.setIdentity();
  return m;
}

SparseMatrix laplacian(std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
  std::vector<Triplet> trips;
  std::vector<double> deg(n, 0.0);
  for (auto [a, b] : edges) {
    trips.emplace_back(a, b, -1.0);
    trips.emplace_back(b, a, -1.0);
    deg[a] += 1.0;
    deg[b] += 1.0;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (deg[i] > 0.0) trips.emplace_back(i, i, deg[i]);
  }
  SparseMatrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  m.setFromTriplets(trips.begin(), trips.end());
  return m;
}

// Connected components of the sparsity pattern.
std::vector<std::size_t> pattern_components(const SparseMatrix& r, std::size_t& count) {
  const auto n = static_cast<std::size_t>(r.rows());
  std::vector<std::size_t> comp(n, n);
  count = 0;
  std::vector<std::size_t> stack;
  for (std::size_t s = 0; s < n; ++s) {
    if (comp[s] != n) continue;
    comp[s] = count;
    stack.push_back(s);
    while (!stack.empty()) {
      const auto v = stack.back();
      stack.pop_back();
      for (SparseMatrix::InnerIterator it(r, static_cast<Eigen::Index>(v)); it; ++it) {
        const auto w = static_cast<std::size_t>(it.row());
        if (it.value() != 0.0 && comp[w] == n) {
          comp[w] = count;
          stack.push_back(w);
        }
      }
    }
    ++count;
  }
  return comp;
}

}  // namespace

StructureMatrix icar_precision(const SpatialGraph& graph) {
  StructureMatrix s;
  s.r = laplacian(graph.n_areas(), graph.edges());
  s.rank_deficiency = graph.n_components();
  return s;
}

StructureMatrix rw1_precision(std::size_t n_periods) {
  if (n_periods < 2) fail(ErrorCode::kDegenerateInput, "RW1 needs at least 2 periods");
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t t = 0; t + 1 < n_periods; ++t) edges.emplace_back(t, t + 1);
  StructureMatrix s;
  s.r = laplacian(n_periods, edges);
  s.rank_deficiency = 1;
  return s;
}

Eigen::MatrixXd generalized_inverse(const SparseMatrix& r) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es{Eigen::MatrixXd(r)};
  const auto& val = es.eigenvalues();
  const double cut = kRankTolerance * std::max(val.cwiseAbs().maxCoeff(), 1e-300);
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(val.size());
  for (Eigen::Index i = 0; i < val.size(); ++i) {
    if (val[i] > cut) inv[i] = 1.0 / val[i];
  }
  return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
}

Eigen::VectorXd generalized_inverse_diagonal(const SparseMatrix& r,
                                             std::size_t dense_limit) {
  const auto n = static_cast<std::size_t>(r.rows());
  if (n <= dense_limit) return generalized_inverse(r).diagonal();

  const Eigen::VectorXd row_sums = r * Eigen::VectorXd::Ones(r.rows());
  if (row_sums.cwiseAbs().maxCoeff() > 1e-8 * r.diagonal().cwiseAbs().maxCoeff()) {
    fail(ErrorCode::kInvalidInput,
         "large generalized inverses are only supported for Laplacian structures");
  }
  std::size_t n_comp = 0;
  const auto comp = pattern_components(r, n_comp);
  std::vector<std::vector<std::size_t>> members(n_comp);
  for (std::size_t i = 0; i < n; ++i) members[comp[i]].push_back(i);

  Eigen::VectorXd diag = Eigen::VectorXd::Zero(r.rows());
  for (const auto& mem : members) {
    const std::size_t s = mem.size();
    if (s < 2) continue;
    // Ground the first member: the reduced Laplacian is positive definite and
    // G (zero-padded inverse) is a generalized inverse; R^+ = P G P.
    const auto m = static_cast<Eigen::Index>(s - 1);
    std::vector<Eigen::Index> local(n, -1);
    for (std::size_t k = 1; k < s; ++k) local[mem[k]] = static_cast<Eigen::Index>(k - 1);
    std::vector<Triplet> trips;
    for (std::size_t k = 1; k < s; ++k) {
      for (SparseMatrix::InnerIterator it(r, static_cast<Eigen::Index>(mem[k])); it; ++it) {
        const auto row = local[static_cast<std::size_t>(it.row())];
        if (row >= 0) trips.emplace_back(row, local[mem[k]], it.value());
      }
    }
    SparseMatrix red(m, m);
    red.setFromTriplets(trips.begin(), trips.end());
    Eigen::SimplicialLDLT<SparseMatrix> ldlt(red);
    if (ldlt.info() != Eigen::Success) {
      fail(ErrorCode::kNumericalOverflow, "grounded Laplacian factorization failed");
    }
    const Eigen::VectorXd g1 = ldlt.solve(Eigen::VectorXd::Ones(m));
    const double total = g1.sum();
    const double sd = static_cast<double>(s);
    Eigen::VectorXd unit = Eigen::VectorXd::Zero(m);
    for (Eigen::Index k = 0; k < m; ++k) {
      unit[k] = 1.0;
      const double gkk = ldlt.solve(unit)[k];
      unit[k] = 0.0;
      diag[static_cast<Eigen::Index>(mem[static_cast<std::size_t>(k) + 1])] =
          gkk - 2.0 * g1[k] / sd + total / (sd * sd);
    }
    diag[static_cast<Eigen::Index>(mem[0])] = total / (sd * sd);
  }
  return diag;
}

StructureMatrix scale_structure(const StructureMatrix& r) {
  const Eigen::VectorXd d = generalized_inverse_diagonal(r.r);
  double log_sum = 0.0;
  std::size_t count = 0;
  const double floor = kRankTolerance * std::max(d.maxCoeff(), 1e-300);
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    if (d[i] > floor) {
      log_sum += std::log(d[i]);
      ++count;
    }
  }
  if (count == 0) fail(ErrorCode::kDegenerateInput, "structure matrix has no positive variance");
  const double c = std::exp(log_sum / static_cast<double>(count));
  StructureMatrix out = r;
  out.r = r.r * c;
  out.scale = r.scale * c;
  out.scaled = true;
  return out;
}

StructureMatrix interaction_structure(Interaction kind, const StructureMatrix& r_gamma,
                                      const StructureMatrix& r_xi, std::size_t n,
                                      std::size_t n_periods) {
  if (r_gamma.dim() != n_periods || r_xi.dim() != n) {
    fail(ErrorCode::kInvalidInput, "interaction factor dimensions do not match n and T");
  }
  const SparseMatrix it = identity(n_periods);
  const SparseMatrix in = identity(n);
  StructureMatrix s;
  switch (kind) {
    case Interaction::kI:
      s.r = identity(n * n_periods);
      s.rank_deficiency = 0;
      break;
    case Interaction::kII:
      s.r = Eigen::kroneckerProduct(r_gamma.r, in);
      s.rank_deficiency = r_gamma.rank_deficiency * n;
      break;
    case Interaction::kIII:
      s.r = Eigen::kroneckerProduct(it, r_xi.r);
      s.rank_deficiency = n_periods * r_xi.rank_deficiency;
      break;
    case Interaction::kIV:
      s.r = Eigen::kroneckerProduct(r_gamma.r, r_xi.r);
      s.rank_deficiency = n * n_periods - (n_periods - r_gamma.rank_deficiency) *
                                              (n - r_xi.rank_deficiency);
      break;
  }
  s.r.prune(0.0);
  return s;
}

Eigen::MatrixXd independent_rows(const Eigen::MatrixXd& a, double tol) {
  std::vector<Eigen::VectorXd> basis;
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    Eigen::VectorXd v = a.row(i).transpose();
    const double norm0 = v.norm();
    if (norm0 == 0.0) continue;
    for (const auto& b : basis) v -= b.dot(v) * b;
    const double norm = v.norm();
    if (norm > tol * norm0) {
      basis.push_back(v / norm);
      keep.push_back(i);
    }
  }
  Eigen::MatrixXd out(static_cast<Eigen::Index>(keep.size()), a.cols());
  for (std::size_t k = 0; k < keep.size(); ++k) {
    out.row(static_cast<Eigen::Index>(k)) = a.row(keep[k]);
  }
  return out;
}

Eigen::MatrixXd interaction_constraints(Interaction kind, std::size_t n,
                                        std::size_t n_periods,
                                        std::span<const std::size_t> components) {
  const auto cols = static_cast<Eigen::Index>(n * n_periods);
  std::vector<std::size_t> comp(components.begin(), components.end());
  if (comp.empty()) comp.assign(n, 0);
  if (comp.size() != n) fail(ErrorCode::kInvalidInput, "one component label per area");
  std::size_t n_comp = 0;
  for (auto c : comp) n_comp = std::max(n_comp, c + 1);

  std::vector<Eigen::VectorXd> rows;
  auto per_area = [&] {
    for (std::size_t i = 0; i < n; ++i) {
      Eigen::VectorXd r = Eigen::VectorXd::Zero(cols);
      for (std::size_t t = 0; t < n_periods; ++t) r[static_cast<Eigen::Index>(t * n + i)] = 1.0;
      rows.push_back(r);
    }
  };
  auto per_period = [&] {
    for (std::size_t t = 0; t < n_periods; ++t) {
      for (std::size_t c = 0; c < n_comp; ++c) {
        Eigen::VectorXd r = Eigen::VectorXd::Zero(cols);
        for (std::size_t i = 0; i < n; ++i) {
          if (comp[i] == c) r[static_cast<Eigen::Index>(t * n + i)] = 1.0;
        }
        rows.push_back(r);
      }
    }
  };
  switch (kind) {
    case Interaction::kI:
      rows.push_back(Eigen::VectorXd::Ones(cols));
      break;
    case Interaction::kII:
      per_area();
      break;
    case Interaction::kIII:
      per_period();
      break;
    case Interaction::kIV:
      per_area();
      per_period();
      break;
  }
  Eigen::MatrixXd a(static_cast<Eigen::Index>(rows.size()), cols);
  for (std::size_t k = 0; k < rows.size(); ++k) a.row(static_cast<Eigen::Index>(k)) = rows[k];
  return independent_rows(a);
}

ConstraintSet constraint_set(Interaction kind, std::size_t n, std::size_t n_periods,
                             std::span<const std::size_t> components) {
  const Eigen::MatrixXd d = interaction_constraints(kind, n, n_periods, components);
  const auto nt = static_cast<Eigen::Index>(n * n_periods);
  const auto ni = static_cast<Eigen::Index>(n);
  const auto ti = static_cast<Eigen::Index>(n_periods);
  ConstraintSet cs;
  cs.a = Eigen::MatrixXd::Zero(2 + d.rows(), ni + ti + nt);
  cs.a.block(0, 0, 1, ni).setOnes();
  cs.a.block(1, ni, 1, ti).setOnes();
  cs.a.block(2, ni + ti, d.rows(), nt) = d;
  return cs;
}

Eigensystem positive_eigensystem(const SparseMatrix& r) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es{Eigen::MatrixXd(r)};
  const auto& val = es.eigenvalues();
  const double cut = kRankTolerance * std::max(val.cwiseAbs().maxCoeff(), 1e-300);
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < val.size(); ++i) {
    if (val[i] > cut) keep.push_back(i);
  }
  Eigensystem sys;
  sys.dim = static_cast<std::size_t>(r.rows());
  sys.vectors.resize(r.rows(), static_cast<Eigen::Index>(keep.size()));
  sys.values.resize(static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) {
    sys.vectors.col(static_cast<Eigen::Index>(k)) = es.eigenvectors().col(keep[k]);
    sys.values[static_cast<Eigen::Index>(k)] = val[keep[k]];
  }
  return sys;
}

Eigensystem kronecker_eigensystem(const Eigensystem& a, const Eigensystem& b,
                                  std::size_t dim_a, std::size_t dim_b) {
  Eigensystem sys;
  sys.dim = dim_a * dim_b;
  const auto ka = a.values.size();
  const auto kb = b.values.size();
  sys.vectors.resize(static_cast<Eigen::Index>(sys.dim), ka * kb);
  sys.values.resize(ka * kb);
  for (Eigen::Index i = 0; i < ka; ++i) {
    for (Eigen::Index j = 0; j < kb; ++j) {
      const Eigen::Index col = i * kb + j;
      sys.values[col] = a.values[i] * b.values[j];
      for (Eigen::Index p = 0; p < static_cast<Eigen::Index>(dim_a); ++p) {
        sys.vectors.col(col).segment(p * static_cast<Eigen::Index>(dim_b),
                                     static_cast<Eigen::Index>(dim_b)) =
            a.vectors(p, i) * b.vectors.col(j);
      }
    }
  }
  return sys;
}

ConstrainedSampler::ConstrainedSampler(Eigensystem system, double kappa, Eigen::MatrixXd a)
    : sys_(std::move(system)), kappa_(kappa), a_(std::move(a)) {
  if (!(kappa_ > 0.0)) fail(ErrorCode::kInvalidInput, "precision scalar must be positive");
  if (a_.rows() > 0 && a_.cols() != static_cast<Eigen::Index>(sys_.dim)) {
    fail(ErrorCode::kInvalidInput, "constraint matrix width does not match the structure");
  }
  if (a_.rows() == 0) return;
  // Sigma A^T with Sigma = U diag(1 / (kappa lambda)) U^T.
  const Eigen::MatrixXd ut_at = sys_.vectors.transpose() * a_.transpose();
  const Eigen::MatrixXd sigma_at =
      sys_.vectors * ((1.0 / (kappa_ * sys_.values.array())).matrix().asDiagonal() * ut_at);
  const Eigen::MatrixXd m = a_ * sigma_at;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  if (sys_.values.size() == 0) fail(ErrorCode::kDegenerateInput, "structure has no positive spectrum");
  // Relative to what A Sigma A^T could be at most, so that constraints already
  // met on the support (A Sigma A^T ~ round-off) are not inverted.
  const double reach = a_.rowwise().squaredNorm().maxCoeff() /
                       (kappa_ * std::max(sys_.values.minCoeff(), 1e-300));
  const double cut = kRankTolerance * std::max(reach, 1e-300);
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(m.rows());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    if (es.eigenvalues()[i] > cut) inv[i] = 1.0 / es.eigenvalues()[i];
  }
  kriging_ = sigma_at * (es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose());
}

Eigen::VectorXd ConstrainedSampler::draw(std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  Eigen::VectorXd w(sys_.values.size());
  for (Eigen::Index k = 0; k < w.size(); ++k) w[k] = z(rng) / std::sqrt(kappa_ * sys_.values[k]);
  Eigen::VectorXd x = sys_.vectors * w;
  if (a_.rows() == 0) return x;
  x -= kriging_ * (a_ * x);
  const double scale = 1.0 + x.cwiseAbs().maxCoeff();
  if ((a_ * x).cwiseAbs().maxCoeff() > 1e-9 * scale * static_cast<double>(a_.cols())) {
    fail(ErrorCode::kInfeasibleConstraints,
         "constraints cannot be met on the support of the structure matrix");
  }
  return x;
}

Eigen::MatrixXd ConstrainedSampler::covariance() const {
  Eigen::MatrixXd sigma = sys_.vectors *
                          (1.0 / (kappa_ * sys_.values.array())).matrix().asDiagonal() *
                          sys_.vectors.transpose();
  if (a_.rows() == 0) return sigma;
  return sigma - kriging_ * (a_ * sigma);
}

Eigen::VectorXd sample_constrained(const StructureMatrix& structure, double kappa,
                                   const ConstraintSet& constraints, std::uint64_t seed) {
  return ConstrainedSampler(positive_eigensystem(structure.r), kappa, constraints.a)
      .draw(seed);
}

void write_matrix_market(const SparseMatrix& m, const std::filesystem::path& path) {
  if (!Eigen::saveMarket(m, path.string())) {
    fail(ErrorCode::kIo, "cannot write " + path.string());
  }
}

}  // namespace gscan
