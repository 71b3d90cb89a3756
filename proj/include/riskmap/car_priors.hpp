#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <string>
#include <vector>

#include "riskmap/areal_graph.hpp"

namespace riskmap {

enum class CarFamily { icar, lcar, bym };

std::string family_name(CarFamily f);
CarFamily family_from_name(const std::string& name);

// Prior family with hyperparameters on the natural scale. The fitting layer
// works in unconstrained coordinates (log tau, logit lambda); this module is
// a pure matrix factory.
struct CarSpec {
  CarFamily family = CarFamily::lcar;
  double tau = 1.0;     // icar / lcar precision
  double lambda = 0.0;  // lcar smoothing, in [0,1)
  double tau_u = 1.0;   // bym structured precision
  double tau_v = 1.0;   // bym unstructured precision

  void validate() const;
};

// Sparse symmetric precision with its identifiability constraints. Both
// triangles are stored. `constraints` are dense row vectors A_r such that
// the field is restricted to {x : A_r x = 0}.
struct SparsePrecision {
  int n = 0;
  Eigen::SparseMatrix<double> Q;
  int rank_deficiency = 0;
  std::vector<Eigen::VectorXd> constraints;
};

// Q = tau (D_W - W); singular, one sum-to-zero constraint per connected
// component (matching the rank deficiency).
SparsePrecision build_icar(const AdjacencyGraph& g, double tau);

// Q = tau [lambda (D_W - W) + (1 - lambda) I]; full rank, but a global
// sum-to-zero constraint is kept to avoid confounding with the intercept.
SparsePrecision build_lcar(const AdjacencyGraph& g, double tau, double lambda);

// Precision of the stacked (u, v) vector of dimension 2n with blocks
// tau_u (D_W - W) and tau_v I, plus the constraint sum(u_i + v_i) = 0.
SparsePrecision build_bym(const AdjacencyGraph& g, double tau_u, double tau_v);

SparsePrecision build_precision(const AdjacencyGraph& g, const CarSpec& spec);

}  // namespace riskmap
