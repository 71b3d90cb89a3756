#pragma once

#include <Eigen/Dense>
#include <vector>

#include "riskmap/laplace_core.hpp"
#include "riskmap/rng.hpp"

namespace riskmap {

// Area centroids for a rows x cols lattice: area r*cols + c sits at
// (c * spacing, r * spacing).
Eigen::MatrixXd lattice_coords(int rows, int cols, double spacing);

struct TrueSurface {
  Eigen::VectorXd log_risk;
};

// Piecewise-constant risk surface: concentric bands around chosen centers
// (distances in the coordinate units, nominally km). Risks are
// 1.5 / 1.3 / 1.2 inside 15 / 30 / 45 around an elevated center and the
// reciprocal pattern around a reduced one. An area inside several bands is
// claimed by its nearest covering center; elevated centers win exact ties.
TrueSurface scenario_bands(const Eigen::MatrixXd& coords, const std::vector<int>& high_centers,
                           const std::vector<int>& low_centers);

// Smooth risk surface: a tensor product of cubic spline bases with Gaussian
// coefficients drawn from a first-order random-walk penalty on each axis
// (precision kappa (P kron I + I kron P), null modes fixed at zero), then
// centred so the mean log risk is zero.
TrueSurface scenario_spline(const Eigen::MatrixXd& coords, int basis_per_axis, double kappa,
                            Rng& rng);

// Poisson counts around the surface at the given expected counts.
ObservedData generate_counts(const TrueSurface& surface, const Eigen::VectorXd& expected,
                             Rng& rng);

struct SimulationScore {
  double marb = 0.0;     // mean absolute relative bias of the estimates
  double mrrmse = 0.0;   // mean relative root mean squared error
  double coverage = 0.0; // fraction of credible intervals containing truth
};

// Scores across replicate fits: `estimate`, `lo`, `hi` are n_areas x
// n_replicates (point estimate and credible bounds on the risk scale).
SimulationScore score_replicates(const Eigen::MatrixXd& estimate, const Eigen::MatrixXd& lo,
                                 const Eigen::MatrixXd& hi, const Eigen::VectorXd& true_risk);

}  // namespace riskmap
