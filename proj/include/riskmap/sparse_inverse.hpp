#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

namespace riskmap {

// Diagonal of Q^{-1} (in the original ordering) from an LDL^T factorization,
// computed with the Takahashi/Erisman-Tinney recursion over the factor
// pattern. Cost is comparable to the factorization itself, unlike n
// triangular solves.
Eigen::VectorXd marginal_variances(
    const Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>& solver);

}  // namespace riskmap
