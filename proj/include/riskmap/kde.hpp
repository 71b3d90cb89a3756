#pragma once

#include <Eigen/Dense>
#include <vector>

namespace riskmap {

// Solve-the-equation plug-in bandwidth (Sheather-Jones) for a Gaussian
// kernel; falls back to the Silverman rule when the fixed-point equation has
// no bracketed root.
double sj_bandwidth(const std::vector<double>& x);

double silverman_bandwidth(const std::vector<double>& x);

struct KdeResult {
  double bandwidth = 0.0;
  Eigen::VectorXd grid;
  Eigen::VectorXd density;
};

// Gaussian kernel density estimate evaluated on an equispaced grid spanning
// the data plus three bandwidths on each side.
KdeResult kde_density(const std::vector<double>& x, int grid_points = 512);

}  // namespace riskmap
