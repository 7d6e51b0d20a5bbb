#include <cmath>
#include <random>

#include "doctest.h"
#include "gscan/gmrf.hpp"
#include "test_util.hpp"

using namespace gscan;

namespace {

Eigen::MatrixXd dense(const SparseMatrix& m) { return Eigen::MatrixXd(m); }

Eigen::Index rank_of(const Eigen::MatrixXd& m) {
  Eigen::FullPivLU<Eigen::MatrixXd> lu(m);
  lu.setThreshold(1e-9);
  return lu.rank();
}

// Pseudo-inverse through SVD, independent of the eigen-based implementation.
Eigen::MatrixXd svd_pinv(const Eigen::MatrixXd& m) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::VectorXd s = svd.singularValues();
  for (Eigen::Index i = 0; i < s.size(); ++i) s[i] = s[i] > 1e-10 * s[0] ? 1.0 / s[i] : 0.0;
  return svd.matrixV() * s.asDiagonal() * svd.matrixU().transpose();
}

SpatialGraph random_connected(std::mt19937_64& rng, std::size_t n) {
  std::vector<std::string> ids;
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t i = 0; i < n; ++i) {
    ids.push_back("g" + std::to_string(i));
    if (i > 0) edges.emplace_back(i, rng() % i);
  }
  for (std::size_t e = 0; e < n; ++e) edges.emplace_back(rng() % n, rng() % n);
  return SpatialGraph(ids, edges, {});
}

}  // namespace

TEST_CASE("icar and rw1 stencils") {
  Eigen::Matrix3d path;
  path << 1, -1, 0, -1, 2, -1, 0, -1, 1;
  const auto icar = icar_precision(path_graph(3));
  CHECK(dense(icar.r).isApprox(path));
  CHECK(icar.rank_deficiency == 1);

  const SpatialGraph k3({"a", "b", "c"}, {{0, 1}, {1, 2}, {0, 2}}, {});
  Eigen::Matrix3d full;
  full << 2, -1, -1, -1, 2, -1, -1, -1, 2;
  CHECK(dense(icar_precision(k3).r).isApprox(full));

  const SpatialGraph pairs({"a", "b", "c", "d"}, {{0, 1}, {2, 3}}, {});
  const auto two = icar_precision(pairs);
  CHECK(two.rank_deficiency == 2);
  CHECK(4 - rank_of(dense(two.r)) == 2);

  CHECK(dense(rw1_precision(3).r).isApprox(path));
  Eigen::Matrix2d t2;
  t2 << 1, -1, -1, 1;
  CHECK(dense(rw1_precision(2).r).isApprox(t2));
  try {
    rw1_precision(1);
    FAIL("expected DegenerateInput");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kDegenerateInput);
  }
  for (std::size_t T = 2; T < 12; ++T) {
    const Eigen::VectorXd rs = dense(rw1_precision(T).r).rowwise().sum();
    CHECK(rs.cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("generalized inverse is Moore-Penrose") {
  std::mt19937_64 rng(1);
  for (int rep = 0; rep < 10; ++rep) {
    const auto g = random_connected(rng, 3 + rng() % 10);
    const Eigen::MatrixXd r = dense(icar_precision(g).r);
    const Eigen::MatrixXd gi = generalized_inverse(icar_precision(g).r);
    CHECK((r * gi * r - r).cwiseAbs().maxCoeff() <= 1e-8);
    CHECK((gi * r * gi - gi).cwiseAbs().maxCoeff() <= 1e-8);
    CHECK((gi - svd_pinv(r)).cwiseAbs().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("sparse grounded diagonal matches the dense path") {
  std::mt19937_64 rng(2);
  for (int rep = 0; rep < 10; ++rep) {
    const auto g = random_connected(rng, 2 + rng() % 20);
    const auto r = icar_precision(g).r;
    const Eigen::VectorXd a = generalized_inverse_diagonal(r);
    const Eigen::VectorXd b = generalized_inverse_diagonal(r, 0);
    CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-9 * a.maxCoeff());
  }
  const SpatialGraph pairs({"a", "b", "c", "d", "e"}, {{0, 1}, {2, 3}, {3, 4}}, {});
  const auto r = icar_precision(pairs).r;
  CHECK((generalized_inverse_diagonal(r) - generalized_inverse_diagonal(r, 0))
            .cwiseAbs()
            .maxCoeff() <= 1e-12);
}

TEST_CASE("scale_structure") {
  // Path-3 Laplacian: eigenvalues 0, 1, 3 give R^+ = [5 -1 -4; -1 2 -1; -4 -1 5] / 9.
  const auto icar = icar_precision(path_graph(3));
  const auto scaled = scale_structure(icar);
  const double gm = std::cbrt((5.0 / 9) * (2.0 / 9) * (5.0 / 9));
  CHECK(scaled.scale == doctest::Approx(gm).epsilon(1e-12));
  CHECK(scaled.scaled);

  const auto again = scale_structure(scaled);
  CHECK(again.scale / scaled.scale == doctest::Approx(1.0).epsilon(1e-8));

  StructureMatrix doubled = icar;
  doubled.r = icar.r * 2.0;
  const auto from_doubled = scale_structure(doubled);
  CHECK((dense(from_doubled.r) - dense(scaled.r)).cwiseAbs().maxCoeff() <= 1e-12);

  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 5; ++rep) {
    const auto s = scale_structure(icar_precision(random_connected(rng, 4 + rng() % 20)));
    const Eigen::VectorXd d = svd_pinv(dense(s.r)).diagonal();
    CHECK(std::exp(d.array().log().mean()) == doctest::Approx(1.0).epsilon(1e-8));
  }
}

TEST_CASE("interaction structures") {
  const auto rxi = scale_structure(icar_precision(path_graph(3)));
  const auto rg = rw1_precision(2);
  const std::size_t n = 3, T = 2;

  const auto t1 = interaction_structure(Interaction::kI, rg, rxi, n, T);
  CHECK(dense(t1.r).isApprox(Eigen::MatrixXd::Identity(6, 6)));
  CHECK(t1.rank_deficiency == 0);

  // Dense Kronecker oracle, period-major: block (t, s) = Rg(t, s) * Rxi.
  const Eigen::MatrixXd g = dense(rg.r);
  const Eigen::MatrixXd x = dense(rxi.r);
  Eigen::MatrixXd kron(6, 6);
  for (int t = 0; t < 2; ++t) {
    for (int s = 0; s < 2; ++s) kron.block(3 * t, 3 * s, 3, 3) = g(t, s) * x;
  }
  const auto t4 = interaction_structure(Interaction::kIV, rg, rxi, n, T);
  CHECK((dense(t4.r) - kron).cwiseAbs().maxCoeff() <= 1e-14);

  for (std::size_t nn : {2, 3, 5}) {
    for (std::size_t tt : {2, 3, 4}) {
      const auto gx = icar_precision(path_graph(nn));
      const auto gt = rw1_precision(tt);
      for (int k = 1; k <= 4; ++k) {
        const auto s = interaction_structure(interaction_from_int(k), gt, gx, nn, tt);
        CHECK(static_cast<Eigen::Index>(nn * tt) - rank_of(dense(s.r)) ==
              static_cast<Eigen::Index>(s.rank_deficiency));
      }
      CHECK(interaction_structure(Interaction::kII, gt, gx, nn, tt).rank_deficiency == nn);
    }
  }
}

TEST_CASE("constraint sets") {
  const auto c1 = constraint_set(Interaction::kI, 4, 3);
  CHECK(c1.a.rows() == 3);
  const Eigen::MatrixXd d4 = interaction_constraints(Interaction::kIV, 3, 2);
  CHECK(d4.rows() == 4);
  CHECK(rank_of(d4) == 4);
  CHECK((c1.a * Eigen::VectorXd::Zero(c1.a.cols())).norm() == 0.0);

  for (std::size_t n = 1; n <= 6; ++n) {
    for (std::size_t T = 2; T <= 5; ++T) {
      const std::size_t expected[] = {1, n, T, n + T - 1};
      for (int k = 1; k <= 4; ++k) {
        const auto d = interaction_constraints(interaction_from_int(k), n, T);
        CHECK(d.rows() == static_cast<Eigen::Index>(expected[k - 1]));
        CHECK(rank_of(d) == d.rows());
        // The rows span the null space of the matching structure on a path.
        const auto s = interaction_structure(interaction_from_int(k), rw1_precision(T),
                                             icar_precision(path_graph(n)), n, T);
        if (n > 1 && k > 1) CHECK((dense(s.r) * d.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
      }
      CHECK(constraint_set(Interaction::kIV, n, T).a.rows() ==
            static_cast<Eigen::Index>(2 + n + T - 1));
    }
  }

  // Two components: spatial sums per component.
  const std::vector<std::size_t> comp{0, 0, 1};
  CHECK(interaction_constraints(Interaction::kIII, 3, 2, comp).rows() == 4);
  CHECK(interaction_constraints(Interaction::kIV, 3, 2, comp).rows() == 3 + 4 - 2);
}

TEST_CASE("bym2 covariance is PSD for all mixing weights") {
  std::mt19937_64 rng(4);
  for (int rep = 0; rep < 5; ++rep) {
    const auto s = scale_structure(icar_precision(random_connected(rng, 3 + rng() % 8)));
    const Eigen::MatrixXd gi = generalized_inverse(s.r);
    const auto n = gi.rows();
    for (double lambda : {0.0, 0.1, 0.5, 0.9, 1.0}) {
      const Eigen::MatrixXd cov =
          2.0 * ((1 - lambda) * Eigen::MatrixXd::Identity(n, n) + lambda * gi);
      CHECK((cov - cov.transpose()).cwiseAbs().maxCoeff() <= 1e-14);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
      CHECK(es.eigenvalues().minCoeff() >= -1e-10);
    }
  }
}

TEST_CASE("kronecker eigensystem reproduces the product") {
  const auto a = rw1_precision(3);
  const auto b = icar_precision(grid_graph(2, 2));
  const auto sys = kronecker_eigensystem(positive_eigensystem(a.r), positive_eigensystem(b.r), 3, 4);
  const Eigen::MatrixXd rebuilt =
      sys.vectors * sys.values.asDiagonal() * sys.vectors.transpose();
  const auto iv = interaction_structure(Interaction::kIV, a, b, 4, 3);
  CHECK((rebuilt - dense(iv.r)).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("constrained sampling") {
  const auto icar = icar_precision(path_graph(3));
  ConstraintSet sum;
  sum.a = Eigen::MatrixXd::Ones(1, 3);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto x = sample_constrained(icar, 1.0, sum, seed);
    CHECK(std::fabs(x.sum()) <= 1e-10);
  }
  CHECK(sample_constrained(icar, 1.0, sum, 5) == sample_constrained(icar, 1.0, sum, 5));

  // Covariance of the path-3 ICAR: 20000 draws against R^+, 4 MC s.e.
  ConstrainedSampler sampler(positive_eigensystem(icar.r), 1.0, sum.a);
  const int draws = 20000;
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(3, 3);
  Eigen::MatrixXd acc2 = Eigen::MatrixXd::Zero(3, 3);
  for (int s = 0; s < draws; ++s) {
    const auto x = sampler.draw(1000 + static_cast<std::uint64_t>(s));
    const Eigen::MatrixXd xx = x * x.transpose();
    acc += xx;
    acc2 += xx.cwiseProduct(xx);
  }
  const Eigen::MatrixXd mean = acc / draws;
  const Eigen::MatrixXd se = ((acc2 / draws - mean.cwiseProduct(mean)) / draws).cwiseSqrt();
  Eigen::Matrix3d truth;
  truth << 5, -1, -4, -1, 2, -1, -4, -1, 5;
  truth /= 9.0;
  CHECK((sampler.covariance() - truth).cwiseAbs().maxCoeff() <= 1e-12);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) CHECK(std::fabs(mean(i, j) - truth(i, j)) <= 4 * se(i, j));
  }

  // Precision x4 halves the standard deviation.
  ConstrainedSampler tight(positive_eigensystem(icar.r), 4.0, sum.a);
  double v1 = 0.0, v4 = 0.0;
  for (int s = 0; s < 5000; ++s) {
    v1 += sampler.draw(static_cast<std::uint64_t>(s))[0] * sampler.draw(static_cast<std::uint64_t>(s))[0];
    v4 += tight.draw(static_cast<std::uint64_t>(s))[0] * tight.draw(static_cast<std::uint64_t>(s))[0];
  }
  // Same seeds: every draw is exactly scaled by 1/2.
  CHECK(std::sqrt(v4 / v1) == doctest::Approx(0.5).epsilon(1e-10));
}

TEST_CASE("matrix market dump") {
  testutil::TempDir dir;
  write_matrix_market(rw1_precision(3).r, dir.path() / "rw1.mtx");
  const auto text = testutil::slurp(dir.path() / "rw1.mtx");
  CHECK(text.find("%%MatrixMarket") == 0);
}
