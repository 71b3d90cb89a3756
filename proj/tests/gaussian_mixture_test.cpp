#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "riskmap/errors.hpp"
#include "riskmap/gaussian_mixture.hpp"

using riskmap::GaussianMixture;

namespace {

const GaussianMixture kTwo{{0.3, 0.7}, {-1.0, 2.0}, {0.5, 1.5}};

// Simpson quadrature of f against the mixture density over +-12 sigma.
template <typename F>
double integrate(const GaussianMixture& m, F&& f) {
  double lo = 1e300, hi = -1e300;
  for (int k = 0; k < m.components(); ++k) {
    lo = std::min(lo, m.mu[k] - 12.0 * m.sigma[k]);
    hi = std::max(hi, m.mu[k] + 12.0 * m.sigma[k]);
  }
  const int steps = 20000;
  const double h = (hi - lo) / steps;
  double acc = 0.0;
  for (int i = 0; i <= steps; ++i) {
    const double x = lo + i * h;
    const double w = (i == 0 || i == steps) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    acc += w * f(x) * m.pdf(x);
  }
  return acc * h / 3.0;
}

}  // namespace

TEST_CASE("single component reduces to the normal law") {
  const GaussianMixture m{{1.0}, {0.7}, {1.3}};
  CHECK(m.mean() == doctest::Approx(0.7));
  CHECK(m.sd() == doctest::Approx(1.3));
  CHECK(m.cdf(0.7) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(m.pdf(0.7) == doctest::Approx(1.0 / (1.3 * std::sqrt(2.0 * M_PI))));
  CHECK(m.quantile(0.975) == doctest::Approx(0.7 + 1.959963984540054 * 1.3).epsilon(1e-9));
  CHECK(m.tail_prob(0.7) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("moments match quadrature") {
  CHECK(kTwo.mean() == doctest::Approx(integrate(kTwo, [](double x) { return x; })).epsilon(1e-8));
  const double ex2 = integrate(kTwo, [](double x) { return x * x; });
  CHECK(kTwo.variance() == doctest::Approx(ex2 - kTwo.mean() * kTwo.mean()).epsilon(1e-8));
  CHECK(kTwo.exp_mean() ==
        doctest::Approx(integrate(kTwo, [](double x) { return std::exp(x); })).epsilon(1e-8));
  CHECK(kTwo.exp_moment2() ==
        doctest::Approx(integrate(kTwo, [](double x) { return std::exp(2.0 * x); }))
            .epsilon(1e-7));
}

TEST_CASE("closed-form mixture moments") {
  // mean = sum w mu; var = sum w (sigma^2 + mu^2) - mean^2.
  CHECK(kTwo.mean() == doctest::Approx(0.3 * -1.0 + 0.7 * 2.0));
  const double ex2 = 0.3 * (0.25 + 1.0) + 0.7 * (2.25 + 4.0);
  CHECK(kTwo.variance() == doctest::Approx(ex2 - 1.1 * 1.1));
  // E[exp X] = sum w exp(mu + sigma^2/2).
  CHECK(kTwo.exp_mean() ==
        doctest::Approx(0.3 * std::exp(-1.0 + 0.125) + 0.7 * std::exp(2.0 + 1.125)));
}

TEST_CASE("cdf is the weight-blend of component cdfs and quantile inverts it") {
  const double t = 0.4;
  CHECK(kTwo.cdf(t) == doctest::Approx(0.3 * riskmap::normal_cdf(t, -1.0, 0.5) +
                                       0.7 * riskmap::normal_cdf(t, 2.0, 1.5)));
  for (double p : {0.001, 0.025, 0.2, 0.5, 0.8, 0.975, 0.999}) {
    CAPTURE(p);
    CHECK(kTwo.cdf(kTwo.quantile(p)) == doctest::Approx(p).epsilon(1e-9));
  }
  CHECK(kTwo.tail_prob(t) == doctest::Approx(1.0 - kTwo.cdf(t)).epsilon(1e-12));
}

TEST_CASE("validation rejects broken mixtures") {
  GaussianMixture bad{{0.5, 0.6}, {0.0, 0.0}, {1.0, 1.0}};
  CHECK_THROWS_AS(bad.validate(), riskmap::FitError);
  GaussianMixture neg{{1.0}, {0.0}, {-1.0}};
  CHECK_THROWS_AS(neg.validate(), riskmap::FitError);
  GaussianMixture ragged{{1.0}, {0.0, 1.0}, {1.0}};
  CHECK_THROWS_AS(ragged.validate(), riskmap::FitError);
  GaussianMixture ok{{0.25, 0.75}, {0.0, 1.0}, {1.0, 2.0}};
  CHECK_NOTHROW(ok.validate());
}

TEST_CASE("risk summary is the lognormal transform of the log-risk law") {
  const auto s = riskmap::summarize_risk(kTwo);
  CHECK(s.mean == doctest::Approx(kTwo.exp_mean()));
  CHECK(s.sd ==
        doctest::Approx(std::sqrt(kTwo.exp_moment2() - kTwo.exp_mean() * kTwo.exp_mean())));
  CHECK(s.median == doctest::Approx(std::exp(kTwo.quantile(0.5))));
  CHECK(s.q025 == doctest::Approx(std::exp(kTwo.quantile(0.025))));
  CHECK(s.q975 == doctest::Approx(std::exp(kTwo.quantile(0.975))));
  CHECK(s.exceed_prob == doctest::Approx(kTwo.tail_prob(0.0)));
  CHECK(s.q025 < s.median);
  CHECK(s.median < s.q975);
}

TEST_CASE("symmetric mixture has exceedance one half at its center") {
  const GaussianMixture sym{{0.5, 0.5}, {-0.8, 0.8}, {0.4, 0.4}};
  CHECK(sym.tail_prob(0.0) == doctest::Approx(0.5).epsilon(1e-13));
  CHECK(sym.quantile(0.5) == doctest::Approx(0.0).epsilon(1e-10));
}

TEST_CASE("extreme tails stay inside [0,1] and are monotone") {
  CHECK(kTwo.tail_prob(60.0) >= 0.0);
  CHECK(kTwo.tail_prob(-60.0) <= 1.0);
  CHECK(kTwo.tail_prob(-60.0) == doctest::Approx(1.0));
  CHECK(kTwo.tail_prob(60.0) == doctest::Approx(0.0));
  double prev = 1.0;
  for (double t = -8.0; t <= 8.0; t += 0.25) {
    const double cur = kTwo.tail_prob(t);
    CHECK(cur <= prev + 1e-15);
    prev = cur;
  }
}
