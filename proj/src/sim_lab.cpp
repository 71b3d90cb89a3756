#include "riskmap/sim_lab.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>

#include "riskmap/errors.hpp"

namespace riskmap {

Eigen::MatrixXd lattice_coords(int rows, int cols, double spacing) {
  if (rows < 1 || cols < 1) throw ConfigError("lattice dimensions must be positive");
  if (!(spacing > 0.0)) throw ConfigError("lattice spacing must be positive");
  Eigen::MatrixXd coords(rows * cols, 2);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      coords(r * cols + c, 0) = c * spacing;
      coords(r * cols + c, 1) = r * spacing;
    }
  return coords;
}

TrueSurface scenario_bands(const Eigen::MatrixXd& coords, const std::vector<int>& high_centers,
                           const std::vector<int>& low_centers) {
  const int n = static_cast<int>(coords.rows());
  if (coords.cols() != 2) throw ConfigError("coordinates must have two columns");
  auto check = [&](int c) {
    if (c < 0 || c >= n) throw ConfigError("band center index out of range");
  };
  for (int c : high_centers) check(c);
  for (int c : low_centers) check(c);

  constexpr double radii[3] = {15.0, 30.0, 45.0};
  constexpr double up[3] = {1.5, 1.3, 1.2};
  constexpr double down[3] = {1.0 / 1.5, 1.0 / 1.3, 1.0 / 1.2};

  TrueSurface out;
  out.log_risk = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < n; ++i) {
    double best_dist = std::numeric_limits<double>::infinity();
    bool best_high = false;
    bool found = false;
    auto consider = [&](int c, bool is_high) {
      const double dist = (coords.row(i) - coords.row(c)).norm();
      if (dist >= radii[2]) return;
      if (dist < best_dist || (dist == best_dist && is_high && !best_high)) {
        best_dist = dist;
        best_high = is_high;
        found = true;
      }
    };
    for (int c : high_centers) consider(c, true);
    for (int c : low_centers) consider(c, false);
    if (!found) continue;
    int band = 2;
    if (best_dist < radii[0])
      band = 0;
    else if (best_dist < radii[1])
      band = 1;
    out.log_risk[i] = std::log(best_high ? up[band] : down[band]);
  }
  return out;
}

namespace {

// Cubic (order 4) spline basis on a clamped uniform knot vector with
// `m` functions over [lo, hi]; Cox-de Boor over the full basis.
Eigen::VectorXd spline_row(double u, double lo, double hi, int m) {
  constexpr int order = 4;
  const int nk = m + order;
  std::vector<double> knots(nk);
  const int interior = m - order;  // knots strictly inside (lo, hi)
  for (int j = 0; j < nk; ++j) {
    if (j < order)
      knots[j] = lo;
    else if (j >= m)
      knots[j] = hi;
    else
      knots[j] = lo + (hi - lo) * static_cast<double>(j - order + 1) / (interior + 1);
  }
  u = std::clamp(u, lo, hi);

  std::vector<double> b(nk - 1, 0.0);
  // Degree-0 indicators; the final half-open interval is closed at hi.
  for (int j = 0; j < nk - 1; ++j) {
    const bool last = knots[j] < hi && knots[j + 1] >= hi;
    b[j] = (u >= knots[j] && (u < knots[j + 1] || (last && u == hi))) ? 1.0 : 0.0;
  }
  for (int deg = 1; deg < order; ++deg) {
    for (int j = 0; j + deg + 1 < nk; ++j) {
      double left = 0.0, right = 0.0;
      const double dl = knots[j + deg] - knots[j];
      const double dr = knots[j + deg + 1] - knots[j + 1];
      if (dl > 0.0) left = (u - knots[j]) / dl * b[j];
      if (dr > 0.0) right = (knots[j + deg + 1] - u) / dr * b[j + 1];
      b[j] = left + right;
    }
  }
  Eigen::VectorXd out(m);
  for (int j = 0; j < m; ++j) out[j] = b[j];
  return out;
}

}  // namespace

TrueSurface scenario_spline(const Eigen::MatrixXd& coords, int basis_per_axis, double kappa,
                            Rng& rng) {
  const int n = static_cast<int>(coords.rows());
  if (coords.cols() != 2) throw ConfigError("coordinates must have two columns");
  const int m = basis_per_axis;
  if (m < 5) throw ConfigError("spline surface needs at least five basis functions per axis");
  if (!(kappa > 0.0)) throw ConfigError("penalty strength must be positive");

  // First-order random-walk penalty and its spectrum (shared by both axes).
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(m, m);
  for (int j = 0; j + 1 < m; ++j) {
    P(j, j) += 1.0;
    P(j + 1, j + 1) += 1.0;
    P(j, j + 1) -= 1.0;
    P(j + 1, j) -= 1.0;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(P);
  const Eigen::VectorXd lam = es.eigenvalues();
  const Eigen::MatrixXd U = es.eigenvectors();

  // Coefficients in the tensor eigenbasis: independent Gaussians with
  // variance 1 / (kappa (lam_i + lam_j)); flat directions pinned to zero.
  Eigen::MatrixXd C(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      const double ev = lam[i] + lam[j];
      const double z = rng.normal();  // always consumed: stream does not depend on the spectrum
      C(i, j) = ev > 1e-10 ? z / std::sqrt(kappa * ev) : 0.0;
    }
  const Eigen::MatrixXd theta = U * C * U.transpose();

  const double x_lo = coords.col(0).minCoeff(), x_hi = coords.col(0).maxCoeff();
  const double y_lo = coords.col(1).minCoeff(), y_hi = coords.col(1).maxCoeff();
  if (!(x_hi > x_lo) || !(y_hi > y_lo))
    throw ConfigError("spline surface needs spread in both coordinates");

  TrueSurface out;
  out.log_risk.resize(n);
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd bx = spline_row(coords(i, 0), x_lo, x_hi, m);
    const Eigen::VectorXd by = spline_row(coords(i, 1), y_lo, y_hi, m);
    out.log_risk[i] = bx.dot(theta * by);
  }
  out.log_risk.array() -= out.log_risk.mean();
  return out;
}

ObservedData generate_counts(const TrueSurface& surface, const Eigen::VectorXd& expected,
                             Rng& rng) {
  const int n = static_cast<int>(surface.log_risk.size());
  if (expected.size() != n) throw DataError("expected counts must match the surface size");
  ObservedData out;
  out.expected = expected;
  out.observed.resize(n);
  for (int i = 0; i < n; ++i) {
    if (!(expected[i] >= 0.0)) throw DataError("expected counts must be >= 0");
    out.observed[i] =
        expected[i] == 0.0
            ? 0.0
            : static_cast<double>(rng.poisson(expected[i] * std::exp(surface.log_risk[i])));
  }
  return out;
}

SimulationScore score_replicates(const Eigen::MatrixXd& estimate, const Eigen::MatrixXd& lo,
                                 const Eigen::MatrixXd& hi, const Eigen::VectorXd& true_risk) {
  const int n = static_cast<int>(estimate.rows());
  const int L = static_cast<int>(estimate.cols());
  if (n == 0 || L == 0) throw DataError("scores need at least one area and one replicate");
  if (lo.rows() != n || lo.cols() != L || hi.rows() != n || hi.cols() != L ||
      true_risk.size() != n)
    throw DataError("score inputs have mismatched shapes");

  SimulationScore out;
  int covered = 0;
  for (int i = 0; i < n; ++i) {
    const double r = true_risk[i];
    if (!(r > 0.0)) throw DataError("true risks must be positive");
    double bias = 0.0, sq = 0.0;
    for (int l = 0; l < L; ++l) {
      const double rel = (estimate(i, l) - r) / r;
      bias += rel;
      sq += rel * rel;
      if (lo(i, l) <= r && r <= hi(i, l)) ++covered;
    }
    out.marb += std::abs(bias / L);
    out.mrrmse += std::sqrt(sq / L);
  }
  out.marb /= n;
  out.mrrmse /= n;
  out.coverage = static_cast<double>(covered) / (static_cast<double>(n) * L);
  return out;
}

}  // namespace riskmap
