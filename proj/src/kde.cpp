#include "riskmap/kde.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "riskmap/errors.hpp"

namespace riskmap {

namespace {

constexpr double kSqrt2Pi = 2.5066282746310005024;

double data_scale(const std::vector<double>& x) {
  const int n = static_cast<int>(x.size());
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (n - 1));
  std::vector<double> sorted = x;
  std::sort(sorted.begin(), sorted.end());
  const auto q = [&](double p) {
    const double h = p * (n - 1);
    const int lo = static_cast<int>(std::floor(h));
    const int hi = std::min(lo + 1, n - 1);
    return sorted[lo] + (h - lo) * (sorted[hi] - sorted[lo]);
  };
  const double iqr = (q(0.75) - q(0.25)) / 1.349;
  double scale = std::min(sd, iqr);
  if (!(scale > 0.0)) scale = sd;
  return scale;
}

// phi^(4) and phi^(6), the standard normal density derivatives that drive
// the plug-in functionals.
double phi4(double t) {
  const double p = std::exp(-0.5 * t * t) / kSqrt2Pi;
  const double t2 = t * t;
  return ((t2 - 6.0) * t2 + 3.0) * p;
}

double phi6(double t) {
  const double p = std::exp(-0.5 * t * t) / kSqrt2Pi;
  const double t2 = t * t;
  return (((t2 - 15.0) * t2 + 45.0) * t2 - 15.0) * p;
}

double pair_sum(const std::vector<double>& x, double bw, double (*f)(double)) {
  const int n = static_cast<int>(x.size());
  double s = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) s += f((x[i] - x[j]) / bw);
  return s;
}

// The plug-in functionals are O(n^2); past a few thousand points the extra
// precision is worthless, so they are estimated from a deterministic strided
// subsample while the final bandwidth equation keeps the true sample size.
constexpr int kMaxPairPoints = 2000;

std::vector<double> pair_points(const std::vector<double>& x) {
  const std::size_t n = x.size();
  if (n <= kMaxPairPoints) return x;
  std::vector<double> sub(kMaxPairPoints);
  for (std::size_t i = 0; i < kMaxPairPoints; ++i) sub[i] = x[i * n / kMaxPairPoints];
  return sub;
}

}  // namespace

double silverman_bandwidth(const std::vector<double>& x) {
  const int n = static_cast<int>(x.size());
  if (n < 2) throw DataError("bandwidth selection needs at least two points");
  const double scale = data_scale(x);
  if (!(scale > 0.0)) return 1e-9;
  return 0.9 * scale * std::pow(static_cast<double>(n), -0.2);
}

double sj_bandwidth(const std::vector<double>& x) {
  const int n = static_cast<int>(x.size());
  if (n < 2) throw DataError("bandwidth selection needs at least two points");
  const double scale = data_scale(x);
  if (!(scale > 0.0)) return 1e-9;
  const double nn = static_cast<double>(n);
  const std::vector<double> xs = pair_points(x);
  const double mm = static_cast<double>(xs.size());

  // Pilot functionals at reference-rule bandwidths.
  const double a = 0.920 * scale * std::pow(mm, -1.0 / 7.0);
  const double b = 0.912 * scale * std::pow(mm, -1.0 / 9.0);
  const double TD = -pair_sum(xs, b, phi6) / (mm * (mm - 1.0) * std::pow(b, 7.0));
  const double SD = pair_sum(xs, a, phi4) / (mm * (mm - 1.0) * std::pow(a, 5.0));
  if (!(TD > 0.0) || !(SD > 0.0)) return silverman_bandwidth(x);

  const double rk = 0.5 / std::sqrt(std::acos(-1.0));  // roughness of the Gaussian kernel
  auto fixed_point = [&](double h) {
    const double alpha2 = 1.357 * std::pow(SD / TD, 1.0 / 7.0) * std::pow(h, 5.0 / 7.0);
    const double sdh = pair_sum(xs, alpha2, phi4) / (mm * (mm - 1.0) * std::pow(alpha2, 5.0));
    if (!(sdh > 0.0)) return std::numeric_limits<double>::quiet_NaN();
    return std::pow(rk / (nn * sdh), 0.2) - h;
  };

  const double h0 = silverman_bandwidth(x);
  double lo = h0 / 16.0, hi = h0 * 16.0;
  double flo = fixed_point(lo), fhi = fixed_point(hi);
  if (!std::isfinite(flo) || !std::isfinite(fhi) || flo * fhi > 0.0)
    return silverman_bandwidth(x);
  for (int it = 0; it < 100; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = fixed_point(mid);
    if (!std::isfinite(fm)) return silverman_bandwidth(x);
    if (flo * fm <= 0.0) {
      hi = mid;
    } else {
      lo = mid;
      flo = fm;
    }
    if (hi - lo < 1e-4 * h0) break;  // four digits is plenty for a kernel width
  }
  return 0.5 * (lo + hi);
}

KdeResult kde_density(const std::vector<double>& x, int grid_points) {
  if (grid_points < 2) throw ConfigError("density grid needs at least two points");
  const int n = static_cast<int>(x.size());
  if (n < 2) throw DataError("density estimation needs at least two points");
  KdeResult out;
  out.bandwidth = sj_bandwidth(x);
  const auto [mn, mx] = std::minmax_element(x.begin(), x.end());
  const double lo = *mn - 3.0 * out.bandwidth;
  const double hi = *mx + 3.0 * out.bandwidth;
  out.grid.resize(grid_points);
  out.density.resize(grid_points);
  const double step = (hi - lo) / (grid_points - 1);
  for (int g = 0; g < grid_points; ++g) {
    const double t = lo + g * step;
    double s = 0.0;
    for (double v : x) {
      const double z = (t - v) / out.bandwidth;
      s += std::exp(-0.5 * z * z);
    }
    out.grid[g] = t;
    out.density[g] = s / (n * out.bandwidth * kSqrt2Pi);
  }
  return out;
}

}  // namespace riskmap
