#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <vector>

#include "riskmap/areal_graph.hpp"
#include "riskmap/car_priors.hpp"
#include "riskmap/rng.hpp"
#include "riskmap/sparse_inverse.hpp"

namespace {

// Random sparse SPD matrix: graph Laplacian of a random graph plus a
// diagonal lift, so the sparsity pattern is irregular.
Eigen::SparseMatrix<double> random_spd(int n, double edge_prob, riskmap::Rng& rng) {
  std::vector<Eigen::Triplet<double>> trip;
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      if (rng.uniform() < edge_prob) {
        const double w = 0.2 + rng.uniform();
        trip.emplace_back(i, j, -w);
        trip.emplace_back(j, i, -w);
        diag[i] += w;
        diag[j] += w;
      }
    }
  for (int i = 0; i < n; ++i) trip.emplace_back(i, i, diag[i] + 0.5 + rng.uniform());
  Eigen::SparseMatrix<double> Q(n, n);
  Q.setFromTriplets(trip.begin(), trip.end());
  return Q;
}

void check_against_dense(const Eigen::SparseMatrix<double>& Q, double tol) {
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver;
  solver.compute(Q);
  REQUIRE(solver.info() == Eigen::Success);
  const Eigen::VectorXd diag = riskmap::marginal_variances(solver);

  const Eigen::MatrixXd dense = Eigen::MatrixXd(Q).inverse();
  REQUIRE(diag.size() == Q.rows());
  for (int i = 0; i < Q.rows(); ++i)
    CHECK(diag[i] == doctest::Approx(dense(i, i)).epsilon(tol));
}

}  // namespace

TEST_CASE("selected inverse matches dense inverse on random SPD matrices") {
  riskmap::Rng rng(20240811);
  for (double p : {0.05, 0.15, 0.5}) {
    for (int n : {5, 23, 60, 120}) {
      CAPTURE(p);
      CAPTURE(n);
      check_against_dense(random_spd(n, p, rng), 1e-9);
    }
  }
}

TEST_CASE("selected inverse on a lattice CAR precision") {
  const auto g = riskmap::AdjacencyGraph::lattice(9, 7);
  riskmap::CarSpec spec;
  spec.family = riskmap::CarFamily::lcar;
  spec.tau = 2.3;
  spec.lambda = 0.85;
  const auto sp = riskmap::build_lcar(g, spec.tau, spec.lambda);
  check_against_dense(sp.Q, 1e-9);
}

TEST_CASE("selected inverse with a structurally dense row") {
  // Mimics the intercept column of the fitting layer: one row coupled to
  // every other variable.
  const int n = 40;
  riskmap::Rng rng(7);
  Eigen::SparseMatrix<double> base = random_spd(n, 0.1, rng);
  std::vector<Eigen::Triplet<double>> trip;
  for (int k = 0; k < base.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(base, k); it; ++it)
      trip.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
  for (int i = 0; i < n; ++i) {
    trip.emplace_back(i, n, 0.3);
    trip.emplace_back(n, i, 0.3);
  }
  trip.emplace_back(n, n, 0.4 * n);
  Eigen::SparseMatrix<double> Q(n + 1, n + 1);
  Q.setFromTriplets(trip.begin(), trip.end());
  check_against_dense(Q, 1e-9);
}

TEST_CASE("selected inverse on a diagonal matrix") {
  Eigen::SparseMatrix<double> Q(4, 4);
  std::vector<Eigen::Triplet<double>> trip;
  for (int i = 0; i < 4; ++i) trip.emplace_back(i, i, static_cast<double>(i + 1));
  Q.setFromTriplets(trip.begin(), trip.end());
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver;
  solver.compute(Q);
  const Eigen::VectorXd diag = riskmap::marginal_variances(solver);
  for (int i = 0; i < 4; ++i) CHECK(diag[i] == doctest::Approx(1.0 / (i + 1)).epsilon(1e-14));
}
