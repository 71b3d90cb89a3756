#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "riskmap/errors.hpp"
#include "riskmap/gaussian_mixture.hpp"
#include "riskmap/model_criteria.hpp"
#include "riskmap/rng.hpp"

using riskmap::GaussianMixture;
using riskmap::ObservedData;

namespace {

ObservedData tiny_data() {
  ObservedData d;
  d.observed.resize(3);
  d.observed << 7, 0, 12;
  d.expected.resize(3);
  d.expected << 5.0, 2.0, 15.0;
  return d;
}

std::vector<GaussianMixture> tiny_marginals() {
  return {GaussianMixture{{1.0}, {0.25}, {0.12}},
          GaussianMixture{{0.4, 0.6}, {-0.9, -0.7}, {0.3, 0.25}},
          GaussianMixture{{1.0}, {-0.15}, {0.08}}};
}

}  // namespace

TEST_CASE("saturated deviance is zero at the saturated fit and positive elsewhere") {
  const auto d = tiny_data();
  // eta_i = log(o_i / E_i) reproduces the observations exactly (the zero
  // count contributes only through its expected part).
  Eigen::VectorXd eta(3);
  eta << std::log(7.0 / 5.0), -40.0, std::log(12.0 / 15.0);
  CHECK(riskmap::saturated_deviance(d, eta) ==
        doctest::Approx(2.0 * 2.0 * std::exp(-40.0)).epsilon(1e-6));

  Eigen::VectorXd flat = Eigen::VectorXd::Zero(3);
  double expect = 0.0;
  for (int i = 0; i < 3; ++i) {
    const double o = d.observed[i], mu = d.expected[i];
    expect += 2.0 * ((o > 0 ? o * std::log(o / mu) : 0.0) - (o - mu));
  }
  CHECK(riskmap::saturated_deviance(d, flat) == doctest::Approx(expect).epsilon(1e-12));
  CHECK(expect > 0.0);
}

TEST_CASE("zero-expected areas drop out of the deviance") {
  ObservedData d;
  d.observed.resize(2);
  d.observed << 3, 0;
  d.expected.resize(2);
  d.expected << 4.0, 0.0;
  Eigen::VectorXd eta(2);
  eta << 0.1, 99.0;
  const double dev = riskmap::saturated_deviance(d, eta);
  ObservedData d1;
  d1.observed.resize(1);
  d1.observed << 3;
  d1.expected.resize(1);
  d1.expected << 4.0;
  CHECK(dev == doctest::Approx(riskmap::saturated_deviance(d1, eta.head(1))).epsilon(1e-14));
}

TEST_CASE("criteria report satisfies the defining identities") {
  const auto d = tiny_data();
  const auto marg = tiny_marginals();
  const auto rep = riskmap::approx_criteria(d, marg, 4000, 99);
  CHECK(rep.samples == 4000);
  CHECK(rep.p_eff == doctest::Approx(rep.mean_deviance - rep.deviance_at_mean).epsilon(1e-12));
  CHECK(rep.dic == doctest::Approx(rep.mean_deviance + rep.p_eff).epsilon(1e-12));
  CHECK(rep.p_waic > 0.0);
  CHECK(rep.mc_se_mean_deviance > 0.0);

  // The deviance at the posterior mean log risk is a deterministic plug-in.
  Eigen::VectorXd eta_mean(3);
  for (int i = 0; i < 3; ++i) eta_mean[i] = marg[i].mean();
  CHECK(rep.deviance_at_mean ==
        doctest::Approx(riskmap::saturated_deviance(d, eta_mean)).epsilon(1e-12));
}

TEST_CASE("monte carlo mean deviance converges to the analytic value") {
  const auto d = tiny_data();
  const auto marg = tiny_marginals();
  const double exact = riskmap::exact_mean_deviance(d, marg);
  const auto rep = riskmap::approx_criteria(d, marg, 60000, 31);
  CHECK(std::abs(rep.mean_deviance - exact) < 4.0 * rep.mc_se_mean_deviance);
  // The standard error itself must shrink like 1/sqrt(S).
  const auto rep_small = riskmap::approx_criteria(d, marg, 15000, 32);
  CHECK(rep_small.mc_se_mean_deviance > rep.mc_se_mean_deviance);
}

TEST_CASE("analytic mean deviance agrees with direct quadrature") {
  const auto d = tiny_data();
  const auto marg = tiny_marginals();
  // D(eta) is a sum of per-area terms, each integrable against its own
  // marginal: E[2(o log o - o log mu - o + mu)] with mu = E exp(eta).
  double expect = 0.0;
  for (int i = 0; i < 3; ++i) {
    const double o = d.observed[i], e = d.expected[i];
    const int steps = 40000;
    const double lo = marg[i].mean() - 10.0 * marg[i].sd();
    const double hi = marg[i].mean() + 10.0 * marg[i].sd();
    const double h = (hi - lo) / steps;
    double acc = 0.0;
    for (int t = 0; t <= steps; ++t) {
      const double eta = lo + t * h;
      const double w = (t == 0 || t == steps) ? 1.0 : (t % 2 ? 4.0 : 2.0);
      const double mu = e * std::exp(eta);
      const double term = 2.0 * ((o > 0 ? o * std::log(o / mu) : 0.0) - (o - mu));
      acc += w * term * marg[i].pdf(eta);
    }
    expect += acc * h / 3.0;
  }
  CHECK(riskmap::exact_mean_deviance(d, marg) == doctest::Approx(expect).epsilon(1e-8));
}

TEST_CASE("widely applicable criterion on a hand-checkable case") {
  // Single area, single Gaussian: lppd and the variance penalty can be
  // computed with simple one-dimensional quadrature.
  ObservedData d;
  d.observed.resize(1);
  d.observed << 9;
  d.expected.resize(1);
  d.expected << 8.0;
  const std::vector<GaussianMixture> marg{GaussianMixture{{1.0}, {0.1}, {0.2}}};

  const int S = 200000;
  const auto rep = riskmap::approx_criteria(d, marg, S, 7);

  const auto log_density = [&](double eta) {
    const double mu = 8.0 * std::exp(eta);
    return 9.0 * std::log(mu) - mu - std::lgamma(10.0);
  };
  const int steps = 20000;
  const double lo = 0.1 - 10.0 * 0.2, hi = 0.1 + 10.0 * 0.2, h = (hi - lo) / steps;
  double m1 = 0.0, m2 = 0.0, mp = 0.0;
  for (int t = 0; t <= steps; ++t) {
    const double eta = lo + t * h;
    const double w = ((t == 0 || t == steps) ? 1.0 : (t % 2 ? 4.0 : 2.0)) * h / 3.0;
    const double ld = log_density(eta);
    const double dens = marg[0].pdf(eta);
    m1 += w * ld * dens;
    m2 += w * ld * ld * dens;
    mp += w * std::exp(ld) * dens;
  }
  const double lppd = std::log(mp);
  const double p_waic = m2 - m1 * m1;
  const double waic = -2.0 * (lppd - p_waic);
  CHECK(rep.p_waic == doctest::Approx(p_waic).epsilon(0.03));
  CHECK(rep.waic == doctest::Approx(waic).epsilon(0.01));
}

TEST_CASE("criteria are reproducible in the seed") {
  const auto d = tiny_data();
  const auto marg = tiny_marginals();
  const auto a = riskmap::approx_criteria(d, marg, 5000, 123);
  const auto b = riskmap::approx_criteria(d, marg, 5000, 123);
  CHECK(a.mean_deviance == b.mean_deviance);
  CHECK(a.waic == b.waic);
  CHECK(a.p_waic == b.p_waic);
  CHECK(a.mc_se_mean_deviance == b.mc_se_mean_deviance);
  const auto c = riskmap::approx_criteria(d, marg, 5000, 124);
  CHECK(a.mean_deviance != c.mean_deviance);
}

TEST_CASE("sample count and marginal alignment are validated") {
  const auto d = tiny_data();
  const auto marg = tiny_marginals();
  CHECK_THROWS_AS(riskmap::approx_criteria(d, marg, 1, 1), riskmap::ConfigError);
  CHECK_THROWS_AS(riskmap::approx_criteria(d, {marg[0]}, 100, 1), riskmap::DataError);
  CHECK_THROWS_AS(riskmap::exact_mean_deviance(d, {marg[0]}), riskmap::DataError);
}
