#pragma once

// Intrinsic GMRF structure matrices, BYM2 scaling, interaction types I-IV,
// sum-to-zero constraint sets and constrained sampling.

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <cstdint>
#include <filesystem>
#include <span>

#include "gscan/stgraph.hpp"

namespace gscan {

using SparseMatrix = Eigen::SparseMatrix<double>;

enum class Interaction { kI = 1, kII = 2, kIII = 3, kIV = 4 };

Interaction interaction_from_int(int kind);

struct StructureMatrix {
  SparseMatrix r;
  std::size_t rank_deficiency = 0;
  bool scaled = false;
  double scale = 1.0;  // factor applied by scale_structure

  std::size_t dim() const { return static_cast<std::size_t>(r.rows()); }
};

// Graph Laplacian: degree on the diagonal, -1 per edge.
StructureMatrix icar_precision(const SpatialGraph& graph);

// First-order random walk over T periods (the path-graph Laplacian).
StructureMatrix rw1_precision(std::size_t n_periods);

// Eigenvalues below this fraction of the largest are treated as zero.
inline constexpr double kRankTolerance = 1e-10;

// Moore-Penrose inverse by dense eigendecomposition.
Eigen::MatrixXd generalized_inverse(const SparseMatrix& r);

// Diagonal of the Moore-Penrose inverse. Dense up to `dense_limit` rows;
// above that a Laplacian is assumed (null space = component indicators) and
// sparse grounded factorizations are used.
Eigen::VectorXd generalized_inverse_diagonal(const SparseMatrix& r,
                                             std::size_t dense_limit = 5000);

// c * R with c the geometric mean of the positive entries of diag(R^+), so
// that the scaled matrix has generalized-variance geometric mean 1.
StructureMatrix scale_structure(const StructureMatrix& r);

// Kronecker structures, cells ordered period-major:
//   I: I_T (x) I_n, II: R_gamma (x) I_n, III: I_T (x) R_xi, IV: R_gamma (x) R_xi.
StructureMatrix interaction_structure(Interaction kind, const StructureMatrix& r_gamma,
                                      const StructureMatrix& r_xi, std::size_t n,
                                      std::size_t n_periods);

// Sum-to-zero rows for the interaction block only (columns = n * T).
// `components` optionally labels the connected component of each area; with
// several components the spatial sums are imposed per component.
Eigen::MatrixXd interaction_constraints(Interaction kind, std::size_t n,
                                        std::size_t n_periods,
                                        std::span<const std::size_t> components = {});

struct ConstraintSet {
  Eigen::MatrixXd a;  // rows = constraints
};

// Constraints on the stacked vector (xi, gamma, delta) of length n + T + nT:
// sum xi = 0, sum gamma = 0 and the interaction rows.
ConstraintSet constraint_set(Interaction kind, std::size_t n, std::size_t n_periods,
                             std::span<const std::size_t> components = {});

// Drops rows that are linear combinations of earlier rows.
Eigen::MatrixXd independent_rows(const Eigen::MatrixXd& a, double tol = 1e-9);

// Eigen decomposition restricted to the positive spectrum.
struct Eigensystem {
  Eigen::MatrixXd vectors;  // columns
  Eigen::VectorXd values;   // all > 0
  std::size_t dim = 0;
};

Eigensystem positive_eigensystem(const SparseMatrix& r);
// Of A (x) B from the factors' systems.
Eigensystem kronecker_eigensystem(const Eigensystem& a, const Eigensystem& b,
                                  std::size_t dim_a, std::size_t dim_b);

// Draws x ~ N(0, (kappa R)^+) and conditions on A x = 0 by kriging.
class ConstrainedSampler {
 public:
  ConstrainedSampler(Eigensystem system, double kappa, Eigen::MatrixXd a);

  Eigen::VectorXd draw(std::uint64_t seed) const;
  // Covariance of the constrained distribution.
  Eigen::MatrixXd covariance() const;

 private:
  Eigensystem sys_;
  double kappa_;
  Eigen::MatrixXd a_;
  Eigen::MatrixXd kriging_;  // Sigma A^T (A Sigma A^T)^+
};

Eigen::VectorXd sample_constrained(const StructureMatrix& structure, double kappa,
                                   const ConstraintSet& constraints, std::uint64_t seed);

// Matrix Market coordinate dump, for debugging.
void write_matrix_market(const SparseMatrix& m, const std::filesystem::path& path);

}  // namespace gscan
