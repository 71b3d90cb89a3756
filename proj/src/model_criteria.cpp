#include "riskmap/model_criteria.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "riskmap/errors.hpp"
#include "riskmap/rng.hpp"

namespace riskmap {

namespace {

// 2 [o log o - o log E - o eta - o + E e^eta], the area's saturated deviance
// term with the 0 log 0 = 0 convention.
double deviance_term(double o, double e, double eta) {
  if (e == 0.0) return 0.0;
  const double mu = std::exp(std::min(std::log(e) + eta, 700.0));
  double t = mu - o;
  if (o > 0.0) t += o * (std::log(o) - std::log(e) - eta);
  return 2.0 * t;
}

double log_density_term(double o, double e, double eta) {
  if (e == 0.0) return 0.0;
  const double log_mu = std::min(std::log(e) + eta, 700.0);
  return o * log_mu - std::exp(log_mu) - std::lgamma(o + 1.0);
}

double draw_from(const GaussianMixture& m, Rng& rng) {
  const double u = rng.uniform();
  double run = 0.0;
  int k = m.components() - 1;
  for (int j = 0; j < m.components(); ++j) {
    run += m.w[j];
    if (u < run) {
      k = j;
      break;
    }
  }
  return m.mu[k] + m.sigma[k] * rng.normal();
}

}  // namespace

double saturated_deviance(const ObservedData& data, const Eigen::VectorXd& eta) {
  if (eta.size() != data.size()) throw DataError("deviance needs one log risk per area");
  double dev = 0.0;
  for (int i = 0; i < data.size(); ++i)
    dev += deviance_term(data.observed[i], data.expected[i], eta[i]);
  return dev;
}

CriteriaReport approx_criteria(const ObservedData& data,
                               const std::vector<GaussianMixture>& marginals, int samples,
                               std::uint64_t seed) {
  const int n = data.size();
  if (static_cast<int>(marginals.size()) != n)
    throw DataError("criteria need one marginal per area");
  if (samples < 2) throw ConfigError("criteria need at least two samples");

  Rng rng(seed);
  // Per-sample deviance totals accumulate across areas; WAIC terms only need
  // per-area streams of log densities.
  std::vector<double> dev_total(samples, 0.0);
  double lppd = 0.0;
  double p_waic = 0.0;
  std::vector<double> logp(samples);
  for (int i = 0; i < n; ++i) {
    const double o = data.observed[i];
    const double e = data.expected[i];
    for (int s = 0; s < samples; ++s) {
      const double eta = draw_from(marginals[i], rng);
      dev_total[s] += deviance_term(o, e, eta);
      logp[s] = log_density_term(o, e, eta);
    }
    if (e == 0.0) continue;
    double mx = -std::numeric_limits<double>::infinity();
    for (double v : logp) mx = std::max(mx, v);
    double acc = 0.0, mean_lp = 0.0;
    for (double v : logp) {
      acc += std::exp(v - mx);
      mean_lp += v;
    }
    mean_lp /= samples;
    lppd += mx + std::log(acc / samples);
    double var_lp = 0.0;
    for (double v : logp) var_lp += (v - mean_lp) * (v - mean_lp);
    p_waic += var_lp / (samples - 1);
  }

  CriteriaReport out;
  out.samples = samples;
  double dbar = 0.0;
  for (double v : dev_total) dbar += v;
  dbar /= samples;
  double var_dev = 0.0;
  for (double v : dev_total) var_dev += (v - dbar) * (v - dbar);
  out.mean_deviance = dbar;
  out.mc_se_mean_deviance = std::sqrt(var_dev / (samples - 1) / samples);

  Eigen::VectorXd eta_mean(n);
  for (int i = 0; i < n; ++i) eta_mean[i] = marginals[i].mean();
  out.deviance_at_mean = saturated_deviance(data, eta_mean);
  out.p_eff = out.mean_deviance - out.deviance_at_mean;
  out.dic = out.mean_deviance + out.p_eff;
  out.waic = -2.0 * (lppd - p_waic);
  out.p_waic = p_waic;
  return out;
}

double exact_mean_deviance(const ObservedData& data,
                           const std::vector<GaussianMixture>& marginals) {
  const int n = data.size();
  if (static_cast<int>(marginals.size()) != n)
    throw DataError("criteria need one marginal per area");
  double dev = 0.0;
  for (int i = 0; i < n; ++i) {
    const double e = data.expected[i];
    if (e == 0.0) continue;
    const double o = data.observed[i];
    const GaussianMixture& m = marginals[i];
    // E[deviance] = 2 [o log o - o log E - o E(eta) - o + E E(e^eta)].
    double t = e * m.exp_mean() - o;
    if (o > 0.0) t += o * (std::log(o) - std::log(e) - m.mean());
    dev += 2.0 * t;
  }
  return dev;
}

}  // namespace riskmap
