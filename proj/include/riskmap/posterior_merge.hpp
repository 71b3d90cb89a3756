#pragma once

#include <utility>
#include <vector>

#include "riskmap/gaussian_mixture.hpp"
#include "riskmap/kde.hpp"
#include "riskmap/partition_engine.hpp"

namespace riskmap {

// Map-wide posterior assembled from submodel fits. For a disjoint partition
// each area's marginal is taken verbatim from its unique submodel; when
// blocks overlap, the covering submodels' marginals are mixed with weights
// proportional to their conditional predictive ordinates for that area.
struct MergedPosterior {
  std::vector<GaussianMixture> marginals;   // log-risk scale, one per area
  std::vector<MarginalSummary> summaries;   // risk scale
  // Covering submodels and their mixing weights per area (single entry with
  // weight exactly 1 when only one block covers the area).
  std::vector<std::vector<std::pair<int, double>>> covers;
  int uniform_weight_areas = 0;  // areas whose predictive weights degenerated
};

MergedPosterior merge_posteriors(const FitBundle& bundle);

// Posterior of the intercept, recovered from joint submodel samples: each
// draw assembles a full log-risk field (overlap resolved by the same
// predictive weights) whose spatial mean is one intercept draw, then a
// kernel density estimate summarizes the sample.
struct AlphaEstimate {
  std::vector<double> samples;
  double mean = 0.0;
  double sd = 0.0;
  double median = 0.0;
  double q025 = 0.0;
  double q975 = 0.0;
  double bandwidth = 0.0;
  Eigen::VectorXd grid;
  Eigen::VectorXd density;
};

AlphaEstimate estimate_alpha(const FitBundle& bundle, const MergedPosterior& merged);

}  // namespace riskmap
