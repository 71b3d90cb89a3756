#pragma once

#include <cstdint>
#include <vector>

#include "riskmap/gaussian_mixture.hpp"
#include "riskmap/laplace_core.hpp"

namespace riskmap {

// Saturated Poisson deviance 2 sum_i [o_i log(o_i / mu_i) - (o_i - mu_i)]
// with mu_i = E_i exp(eta_i); zero-expected areas contribute nothing.
double saturated_deviance(const ObservedData& data, const Eigen::VectorXd& eta);

struct CriteriaReport {
  double mean_deviance = 0.0;     // posterior expectation of the deviance
  double deviance_at_mean = 0.0;  // deviance at the posterior mean log risks
  double p_eff = 0.0;             // effective parameters: Dbar - D(mean)
  double dic = 0.0;               // Dbar + p_eff
  double waic = 0.0;
  double p_waic = 0.0;
  double mc_se_mean_deviance = 0.0;
  int samples = 0;
};

// Monte Carlo criteria from the merged per-area marginals. Every estimand
// here is a sum of per-area functionals, so sampling each area's marginal
// independently is sufficient; the reported standard error is the exact
// standard error of that estimator.
CriteriaReport approx_criteria(const ObservedData& data,
                               const std::vector<GaussianMixture>& marginals, int samples,
                               std::uint64_t seed);

// Closed-form posterior mean deviance under mixture-of-Gaussian log-risk
// marginals (lognormal component moments); reference value for the Monte
// Carlo estimate.
double exact_mean_deviance(const ObservedData& data,
                           const std::vector<GaussianMixture>& marginals);

}  // namespace riskmap
