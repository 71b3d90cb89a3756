#include "riskmap/gaussian_mixture.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "riskmap/errors.hpp"

namespace riskmap {

namespace {
constexpr double kInvSqrt2Pi = 0.3989422804014326779;
constexpr double kInvSqrt2 = 0.7071067811865475244;
}  // namespace

double normal_pdf(double x, double mu, double sigma) {
  const double z = (x - mu) / sigma;
  return kInvSqrt2Pi / sigma * std::exp(-0.5 * z * z);
}

double normal_cdf(double x, double mu, double sigma) {
  return 0.5 * std::erfc(-(x - mu) / sigma * kInvSqrt2);
}

void GaussianMixture::validate() const {
  if (w.empty() || w.size() != mu.size() || w.size() != sigma.size())
    throw FitError("mixture arrays must be non-empty and of equal length");
  double total = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) {
    if (!(w[k] >= 0.0) || !std::isfinite(w[k])) throw FitError("mixture weight must be >= 0");
    if (!std::isfinite(mu[k])) throw FitError("mixture mean must be finite");
    if (!(sigma[k] > 0.0) || !std::isfinite(sigma[k])) throw FitError("mixture sd must be > 0");
    total += w[k];
  }
  if (std::abs(total - 1.0) > 1e-8) throw FitError("mixture weights must sum to 1");
}

double GaussianMixture::pdf(double x) const {
  double v = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) v += w[k] * normal_pdf(x, mu[k], sigma[k]);
  return v;
}

double GaussianMixture::cdf(double x) const {
  double v = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) v += w[k] * normal_cdf(x, mu[k], sigma[k]);
  return v;
}

double GaussianMixture::mean() const {
  double v = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) v += w[k] * mu[k];
  return v;
}

double GaussianMixture::variance() const {
  const double m = mean();
  double v = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k)
    v += w[k] * (sigma[k] * sigma[k] + (mu[k] - m) * (mu[k] - m));
  return v;
}

double GaussianMixture::sd() const { return std::sqrt(variance()); }

double GaussianMixture::quantile(double p) const {
  if (!(p > 0.0 && p < 1.0)) throw FitError("quantile probability must lie in (0, 1)");
  // Bracket: the mixture quantile lies within the widest component bracket.
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < w.size(); ++k) {
    lo = std::min(lo, mu[k] - 10.0 * sigma[k]);
    hi = std::max(hi, mu[k] + 10.0 * sigma[k]);
  }
  while (cdf(lo) > p) lo -= (hi - lo);
  while (cdf(hi) < p) hi += (hi - lo);
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (cdf(mid) < p)
      lo = mid;
    else
      hi = mid;
    if (hi - lo < 1e-13 * (1.0 + std::abs(mid))) break;
  }
  return 0.5 * (lo + hi);
}

double GaussianMixture::tail_prob(double t) const {
  double v = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k)
    v += w[k] * 0.5 * std::erfc((t - mu[k]) / sigma[k] * kInvSqrt2);
  return v;
}

double GaussianMixture::exp_mean() const {
  double v = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k)
    v += w[k] * std::exp(mu[k] + 0.5 * sigma[k] * sigma[k]);
  return v;
}

double GaussianMixture::exp_moment2() const {
  double v = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k)
    v += w[k] * std::exp(2.0 * mu[k] + 2.0 * sigma[k] * sigma[k]);
  return v;
}

MarginalSummary summarize_risk(const GaussianMixture& m) {
  MarginalSummary s;
  s.mean = m.exp_mean();
  const double m2 = m.exp_moment2();
  s.sd = std::sqrt(std::max(0.0, m2 - s.mean * s.mean));
  s.median = std::exp(m.quantile(0.5));
  s.q025 = std::exp(m.quantile(0.025));
  s.q975 = std::exp(m.quantile(0.975));
  s.exceed_prob = m.tail_prob(0.0);
  return s;
}

}  // namespace riskmap
