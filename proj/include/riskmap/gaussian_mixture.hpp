#pragma once

#include <vector>

namespace riskmap {

// Finite mixture of univariate Gaussians. Used for posterior marginals of
// latent quantities: each component comes from one hyperparameter grid point
// (or one submodel after merging), so weights are nonnegative and sum to 1.
struct GaussianMixture {
  std::vector<double> w;
  std::vector<double> mu;
  std::vector<double> sigma;

  int components() const { return static_cast<int>(w.size()); }
  void validate() const;

  double pdf(double x) const;
  double cdf(double x) const;
  double mean() const;
  double variance() const;
  double sd() const;
  // Inverse CDF by bisection on the analytic CDF; p in (0,1).
  double quantile(double p) const;
  // P(X > t).
  double tail_prob(double t) const;
  // E[exp(X)] and E[exp(2X)] via lognormal component moments.
  double exp_mean() const;
  double exp_moment2() const;
};

// Summary of exp(X) when X has the given mixture law: posterior risk scale.
struct MarginalSummary {
  double mean = 0.0;
  double sd = 0.0;
  double median = 0.0;
  double q025 = 0.0;
  double q975 = 0.0;
  double exceed_prob = 0.0;  // P(exp(X) > 1) = P(X > 0)
};

MarginalSummary summarize_risk(const GaussianMixture& m);

double normal_pdf(double x, double mu, double sigma);
double normal_cdf(double x, double mu, double sigma);

}  // namespace riskmap
