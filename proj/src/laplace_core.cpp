#include "riskmap/laplace_core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <queue>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>

#include "riskmap/errors.hpp"
#include "riskmap/sparse_inverse.hpp"

namespace riskmap {

void ObservedData::validate(int n_areas) const {
  if (observed.size() != n_areas || expected.size() != n_areas)
    throw DataError("count vectors must match the number of areas");
  double total_expected = 0.0;
  for (int i = 0; i < n_areas; ++i) {
    const double o = observed[i], e = expected[i];
    if (!std::isfinite(o) || o < 0.0) throw DataError("observed counts must be finite and >= 0");
    if (!std::isfinite(e) || e < 0.0) throw DataError("expected counts must be finite and >= 0");
    if (e == 0.0 && o != 0.0)
      throw DataError("area with zero expected count has a positive observed count");
    total_expected += e;
  }
  if (!(total_expected > 0.0)) throw DataError("all expected counts are zero");
}

double poisson_loglik(const ObservedData& data, const Eigen::VectorXd& eta) {
  const int n = data.size();
  double ll = 0.0;
  for (int i = 0; i < n; ++i) {
    const double e = data.expected[i];
    if (e == 0.0) continue;
    const double o = data.observed[i];
    const double log_mu = std::log(e) + eta[i];
    ll += o * log_mu - std::exp(log_mu) - std::lgamma(o + 1.0);
  }
  return ll;
}

namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Solver = Eigen::SimplicialLDLT<SpMat>;

constexpr double kPi = 3.14159265358979323846;

double softplus(double t) { return t > 30.0 ? t : std::log1p(std::exp(t)); }

double log_sum_exp(const std::vector<double>& v) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double x : v) mx = std::max(mx, x);
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double x : v) s += std::exp(x - mx);
  return mx + std::log(s);
}

double dense_logdet(const Eigen::MatrixXd& M) {
  Eigen::LLT<Eigen::MatrixXd> llt(M);
  if (llt.info() != Eigen::Success) throw FitError("constraint Gram matrix is not positive definite");
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

// Everything needed to evaluate the model at one hyperparameter point. A
// Problem is used serially; `warm` carries the previous latent mode across
// evaluations to shorten Newton runs.
struct Problem {
  const AdjacencyGraph* g = nullptr;
  CarFamily family = CarFamily::lcar;
  const ObservedData* data = nullptr;
  FitSettings st;
  int n = 0;    // areas
  int dim = 0;  // latent size (areas + intercept)
  int m = 0;    // constraint rows
  Eigen::MatrixXd A;   // m x dim
  Eigen::MatrixXd At;  // dim x m
  mutable Eigen::VectorXd warm;

  Problem(const AdjacencyGraph& graph, CarFamily fam, const ObservedData& d,
          const FitSettings& settings)
      : g(&graph), family(fam), data(&d), st(settings) {
    if (family == CarFamily::bym)
      throw ConfigError("convolution prior is available as a matrix builder only, not for fitting");
    n = graph.size();
    dim = n + 1;
    d.validate(n);
    CarSpec ref;
    ref.family = family;
    ref.tau = 1.0;
    ref.lambda = 0.5;
    const SparsePrecision sp = build_precision(graph, ref);
    m = static_cast<int>(sp.constraints.size());
    A = Eigen::MatrixXd::Zero(m, dim);
    for (int r = 0; r < m; ++r) A.row(r).head(n) = sp.constraints[r].transpose();
    At = A.transpose();
  }

  int tdim() const { return family == CarFamily::lcar ? 2 : 1; }

  CarSpec spec_at(const Eigen::VectorXd& theta) const {
    if (theta.size() != tdim()) throw ConfigError("hyperparameter point has the wrong dimension");
    CarSpec s;
    s.family = family;
    const double z0 = std::clamp(theta[0], -40.0, 40.0);
    s.tau = std::exp(z0);
    if (family == CarFamily::lcar) {
      const double lam = 1.0 / (1.0 + std::exp(-theta[1]));
      s.lambda = std::clamp(lam, 1e-12, 1.0 - 1e-12);
    }
    return s;
  }

  // Density of the internal-scale hyperparameters: uniform prior on the
  // random-effect standard deviation, uniform on the mixing weight; both
  // mapped through their transforms.
  double log_hyperprior(const Eigen::VectorXd& theta) const {
    double lp = -0.5 * theta[0] - std::log(2.0);
    if (family == CarFamily::lcar) lp += -softplus(theta[1]) - softplus(-theta[1]);
    return lp;
  }

  // Q_p: prior precision of (xi, alpha). Intrinsic models get a small
  // relative diagonal lift so the unrestricted factorization exists; the
  // tangent-space determinant is insensitive to it.
  SpMat prior_matrix(const Eigen::VectorXd& theta) const {
    const CarSpec spec = spec_at(theta);
    const SparsePrecision sp = build_precision(*g, spec);
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(sp.Q.nonZeros()) + dim);
    for (int c = 0; c < n; ++c)
      for (SpMat::InnerIterator it(sp.Q, c); it; ++it)
        trip.emplace_back(static_cast<int>(it.row()), c, it.value());
    if (family == CarFamily::icar) {
      const double lift = st.intrinsic_jitter * spec.tau;
      for (int i = 0; i < n; ++i) trip.emplace_back(i, i, lift);
    }
    trip.emplace_back(n, n, st.intercept_precision);
    SpMat Q(dim, dim);
    Q.setFromTriplets(trip.begin(), trip.end());
    return Q;
  }

  // Likelihood curvature at latent state x, clamped against overflow.
  void curvature(const Eigen::VectorXd& x, Eigen::VectorXd& c) const {
    c.resize(n);
    const double alpha = x[dim - 1];
    for (int i = 0; i < n; ++i) {
      const double e = data->expected[i];
      c[i] = e == 0.0 ? 0.0 : std::exp(std::min(std::log(e) + x[i] + alpha, 700.0));
    }
  }

  // Q_c = Q_p + likelihood curvature. The intercept row is made structurally
  // dense (entries inserted even where the curvature is zero) so the factor
  // pattern does not depend on which areas carry data.
  SpMat conditional_matrix(const SpMat& Qp, const Eigen::VectorXd& x) const {
    Eigen::VectorXd c;
    curvature(x, c);
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(Qp.nonZeros()) + 3 * n + 1);
    for (int col = 0; col < dim; ++col)
      for (SpMat::InnerIterator it(Qp, col); it; ++it)
        trip.emplace_back(static_cast<int>(it.row()), col, it.value());
    for (int i = 0; i < n; ++i) {
      trip.emplace_back(i, i, c[i]);
      trip.emplace_back(i, n, c[i]);
      trip.emplace_back(n, i, c[i]);
    }
    trip.emplace_back(n, n, c.sum());
    SpMat Q(dim, dim);
    Q.setFromTriplets(trip.begin(), trip.end());
    return Q;
  }

  Eigen::VectorXd eta_of(const Eigen::VectorXd& x) const {
    return (x.head(n).array() + x[dim - 1]).matrix();
  }

  double objective_latent(const SpMat& Qp, const Eigen::VectorXd& x) const {
    return poisson_loglik(*data, eta_of(x)) - 0.5 * x.dot(Qp * x);
  }

  Eigen::VectorXd gradient_latent(const SpMat& Qp, const Eigen::VectorXd& x) const {
    Eigen::VectorXd c;
    curvature(x, c);
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(dim);
    for (int i = 0; i < n; ++i) {
      const double gi = data->expected[i] == 0.0 ? 0.0 : data->observed[i] - c[i];
      grad[i] = gi;
      grad[dim - 1] += gi;
    }
    grad -= Qp * x;
    return grad;
  }

  // Constrained Newton ascent with conditioning-by-kriging after each solve
  // and step halving on the exact objective. On return `solver` holds the
  // factorization of Q_c at the mode.
  Eigen::VectorXd newton(const SpMat& Qp, Solver& solver, SpMat& Qc) const {
    Eigen::VectorXd x = (warm.size() == dim) ? warm : Eigen::VectorXd::Zero(dim);
    double f = objective_latent(Qp, x);
    if (!std::isfinite(f)) {
      x.setZero();
      f = objective_latent(Qp, x);
    }
    bool converged = false;
    for (int iter = 0; iter < st.newton_max_iter && !converged; ++iter) {
      Eigen::VectorXd c;
      curvature(x, c);
      Eigen::VectorXd b = Eigen::VectorXd::Zero(dim);
      const double alpha = x[dim - 1];
      for (int i = 0; i < n; ++i) {
        if (data->expected[i] == 0.0) continue;
        const double gi = data->observed[i] - c[i];
        const double bi = gi + c[i] * (x[i] + alpha);
        b[i] = bi;
        b[dim - 1] += bi;
      }
      Qc = conditional_matrix(Qp, x);
      solver.compute(Qc);
      if (solver.info() != Eigen::Success) throw FitError("conditional precision factorization failed");
      Eigen::VectorXd xn = solver.solve(b);
      const Eigen::MatrixXd V = solver.solve(At);
      Eigen::LLT<Eigen::MatrixXd> Mllt(A * V);
      if (Mllt.info() != Eigen::Success) throw FitError("constraint correction failed");
      xn -= V * Mllt.solve(A * xn);
      Eigen::VectorXd dx = xn - x;
      if (!dx.allFinite()) throw FitError("mode search produced a non-finite step");
      double s = 1.0;
      double ft = objective_latent(Qp, x + dx);
      int halvings = 0;
      while (ft < f - 1e-10 * (1.0 + std::abs(f)) && halvings < st.newton_max_halvings) {
        s *= 0.5;
        ft = objective_latent(Qp, x + s * dx);
        ++halvings;
      }
      const double step_size = s * dx.lpNorm<Eigen::Infinity>();
      if (ft >= f - 1e-10 * (1.0 + std::abs(f)) || step_size < st.newton_tol) {
        x += s * dx;
        f = ft;
        if (step_size < st.newton_tol) converged = true;
      } else {
        throw FitError("mode search stalled");
      }
    }
    if (!converged) throw FitError("mode search did not converge");
    // Refresh the factorization at the mode and polish the constraint.
    Qc = conditional_matrix(Qp, x);
    solver.compute(Qc);
    if (solver.info() != Eigen::Success) throw FitError("conditional precision factorization failed");
    const Eigen::MatrixXd V = solver.solve(At);
    Eigen::LLT<Eigen::MatrixXd> Mllt(A * V);
    if (Mllt.info() != Eigen::Success) throw FitError("constraint correction failed");
    x -= V * Mllt.solve(A * x);
    warm = x;
    return x;
  }

  // log determinant of M restricted to the tangent space {Ax = 0}; the
  // common Gram term log det(A A^T) is omitted because it cancels between
  // the prior and conditional factors of the posterior ratio.
  double tangent_logdet(const Solver& solver) const {
    const Eigen::VectorXd d = solver.vectorD();
    double ld = 0.0;
    for (int i = 0; i < dim; ++i) {
      if (!(d[i] > 0.0)) throw FitError("factor diagonal is not positive");
      ld += std::log(d[i]);
    }
    const Eigen::MatrixXd V = solver.solve(At);
    return ld + dense_logdet(A * V);
  }

  double log_post(const Eigen::VectorXd& theta, Eigen::VectorXd* mode_out) const {
    const SpMat Qp = prior_matrix(theta);
    Solver sc;
    SpMat Qc;
    const Eigen::VectorXd x = newton(Qp, sc, Qc);
    const double ll = poisson_loglik(*data, eta_of(x));
    const double quad = x.dot(Qp * x);
    Solver sp;
    sp.compute(Qp);
    if (sp.info() != Eigen::Success) throw FitError("prior precision factorization failed");
    const double lp = ll - 0.5 * quad + 0.5 * tangent_logdet(sp) - 0.5 * tangent_logdet(sc) +
                      log_hyperprior(theta);
    if (mode_out) *mode_out = x;
    return lp;
  }

  LaplaceEngine::PointEval full_eval(const Eigen::VectorXd& theta) const {
    const SpMat Qp = prior_matrix(theta);
    Solver sc;
    SpMat Qc;
    const Eigen::VectorXd x = newton(Qp, sc, Qc);
    const double ll = poisson_loglik(*data, eta_of(x));
    const double quad = x.dot(Qp * x);
    Solver sp;
    sp.compute(Qp);
    if (sp.info() != Eigen::Success) throw FitError("prior precision factorization failed");

    LaplaceEngine::PointEval out;
    out.log_post = ll - 0.5 * quad + 0.5 * tangent_logdet(sp) - 0.5 * tangent_logdet(sc) +
                   log_hyperprior(theta);
    out.mode = x;

    // Marginal variances on the constrained space: selected inverse of Q_c,
    // then the kriging covariance correction Sigma - V M^{-1} V^T.
    Eigen::VectorXd raw = marginal_variances(sc);
    const Eigen::MatrixXd V = sc.solve(At);
    Eigen::LLT<Eigen::MatrixXd> Mllt(A * V);
    if (Mllt.info() != Eigen::Success) throw FitError("constraint correction failed");
    const Eigen::MatrixXd W = Mllt.solve(V.transpose());  // m x dim
    Eigen::VectorXd var = raw - V.cwiseProduct(W.transpose()).rowwise().sum();

    // Covariances with the intercept from one exact solve, same correction.
    Eigen::VectorXd e_a = Eigen::VectorXd::Zero(dim);
    e_a[dim - 1] = 1.0;
    Eigen::VectorXd cov_a = sc.solve(e_a);
    cov_a -= V * Mllt.solve(V.row(dim - 1).transpose());

    const double var_alpha = std::max(var[dim - 1], 1e-14);
    out.alpha_sd = std::sqrt(var_alpha);
    out.eta_mean.resize(n);
    out.eta_sd.resize(n);
    const double alpha = x[dim - 1];
    for (int i = 0; i < n; ++i) {
      out.eta_mean[i] = x[i] + alpha;
      const double v = std::max(var[i], 0.0) + var_alpha + 2.0 * cov_a[i];
      out.eta_sd[i] = std::sqrt(std::max(v, 1e-14));
    }
    return out;
  }
};

// Nelder-Mead maximizer (works on -f internally); good enough to land within
// a fraction of a grid step of the hyperparameter mode.
template <typename F>
Eigen::VectorXd nelder_mead(const F& f, const Eigen::VectorXd& x0, double step, double ftol,
                            int max_iter) {
  const int d = static_cast<int>(x0.size());
  std::vector<Eigen::VectorXd> v(d + 1, x0);
  std::vector<double> fv(d + 1);
  for (int i = 0; i < d; ++i) v[i + 1][i] += step;
  for (int i = 0; i <= d; ++i) fv[i] = -f(v[i]);

  auto order = [&]() {
    for (int i = 1; i <= d; ++i)
      for (int j = i; j > 0 && fv[j] < fv[j - 1]; --j) {
        std::swap(fv[j], fv[j - 1]);
        std::swap(v[j], v[j - 1]);
      }
  };
  order();
  for (int it = 0; it < max_iter; ++it) {
    if (fv[d] - fv[0] < ftol) break;
    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(d);
    for (int i = 0; i < d; ++i) centroid += v[i];
    centroid /= d;
    Eigen::VectorXd xr = centroid + (centroid - v[d]);
    double fr = -f(xr);
    if (fr < fv[0]) {
      Eigen::VectorXd xe = centroid + 2.0 * (centroid - v[d]);
      const double fe = -f(xe);
      if (fe < fr) {
        v[d] = xe;
        fv[d] = fe;
      } else {
        v[d] = xr;
        fv[d] = fr;
      }
    } else if (fr < fv[d - 1]) {
      v[d] = xr;
      fv[d] = fr;
    } else {
      Eigen::VectorXd xc = centroid + 0.5 * (v[d] - centroid);
      const double fc = -f(xc);
      if (fc < fv[d]) {
        v[d] = xc;
        fv[d] = fc;
      } else {
        for (int i = 1; i <= d; ++i) {
          v[i] = v[0] + 0.5 * (v[i] - v[0]);
          fv[i] = -f(v[i]);
        }
      }
    }
    order();
  }
  return v[0];
}

}  // namespace

struct LaplaceEngine::Impl {
  AdjacencyGraph graph;
  ObservedData data;
  FitSettings settings;
  CarFamily family;
  Problem prob;

  Impl(const AdjacencyGraph& g, CarFamily fam, const ObservedData& d, const FitSettings& s)
      : graph(g), data(d), settings(s), family(fam), prob(graph, fam, data, settings) {}
};

LaplaceEngine::LaplaceEngine(const AdjacencyGraph& graph, CarFamily family,
                             const ObservedData& data, const FitSettings& settings)
    : impl_(std::make_unique<Impl>(graph, family, data, settings)) {}

LaplaceEngine::~LaplaceEngine() = default;

int LaplaceEngine::theta_dim() const { return impl_->prob.tdim(); }

double LaplaceEngine::objective(const Eigen::VectorXd& theta) const {
  return impl_->prob.log_post(theta, nullptr);
}

LaplaceEngine::PointEval LaplaceEngine::eval(const Eigen::VectorXd& theta) const {
  return impl_->prob.full_eval(theta);
}

double LaplaceEngine::latent_objective(const Eigen::VectorXd& theta,
                                       const Eigen::VectorXd& x) const {
  if (x.size() != impl_->prob.dim) throw ConfigError("latent state has the wrong dimension");
  return impl_->prob.objective_latent(impl_->prob.prior_matrix(theta), x);
}

Eigen::VectorXd LaplaceEngine::latent_gradient(const Eigen::VectorXd& theta,
                                               const Eigen::VectorXd& x) const {
  if (x.size() != impl_->prob.dim) throw ConfigError("latent state has the wrong dimension");
  return impl_->prob.gradient_latent(impl_->prob.prior_matrix(theta), x);
}

Eigen::SparseMatrix<double> LaplaceEngine::latent_neg_hessian(const Eigen::VectorXd& theta,
                                                              const Eigen::VectorXd& x) const {
  if (x.size() != impl_->prob.dim) throw ConfigError("latent state has the wrong dimension");
  return impl_->prob.conditional_matrix(impl_->prob.prior_matrix(theta), x);
}

namespace {

// Explore the hyperparameter posterior: locate the mode, standardize axes
// with a finite-difference Hessian, then walk an integer grid outward while
// the log density stays within the configured drop.
std::vector<std::pair<Eigen::VectorXd, double>> explore(const Problem& prob) {
  const int d = prob.tdim();
  auto lp = [&](const Eigen::VectorXd& z) { return prob.log_post(z, nullptr); };

  Eigen::VectorXd z0(d);
  z0[0] = 2.0;
  if (d == 2) z0[1] = 2.0;
  const Eigen::VectorXd zstar = nelder_mead(lp, z0, 1.0, 1e-4, 100 * d);
  const double f0 = lp(zstar);

  // Negated Hessian of the log posterior by central differences.
  const double h = 0.2;
  Eigen::MatrixXd H(d, d);
  for (int a = 0; a < d; ++a) {
    Eigen::VectorXd zp = zstar, zm = zstar;
    zp[a] += h;
    zm[a] -= h;
    H(a, a) = -(lp(zp) - 2.0 * f0 + lp(zm)) / (h * h);
    for (int b = a + 1; b < d; ++b) {
      Eigen::VectorXd zpp = zstar, zpm = zstar, zmp = zstar, zmm = zstar;
      zpp[a] += h; zpp[b] += h;
      zpm[a] += h; zpm[b] -= h;
      zmp[a] -= h; zmp[b] += h;
      zmm[a] -= h; zmm[b] -= h;
      H(a, b) = H(b, a) = -(lp(zpp) - lp(zpm) - lp(zmp) + lp(zmm)) / (4.0 * h * h);
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
  Eigen::MatrixXd dirs(d, d);
  for (int a = 0; a < d; ++a) {
    const double lam = std::max(es.eigenvalues()[a], 1e-2);
    dirs.col(a) = es.eigenvectors().col(a) / std::sqrt(lam);
  }

  std::vector<std::pair<Eigen::VectorXd, double>> accepted;
  std::map<std::vector<int>, double> seen;
  std::queue<std::vector<int>> frontier;
  const std::vector<int> origin(d, 0);
  seen[origin] = f0;
  accepted.emplace_back(zstar, f0);
  frontier.push(origin);
  while (!frontier.empty() && static_cast<int>(accepted.size()) < prob.st.grid_max_points) {
    const std::vector<int> cur = frontier.front();
    frontier.pop();
    for (int a = 0; a < d && static_cast<int>(accepted.size()) < prob.st.grid_max_points; ++a) {
      for (int sgn : {-1, +1}) {
        std::vector<int> nb = cur;
        nb[a] += sgn;
        if (seen.count(nb)) continue;
        Eigen::VectorXd offset = Eigen::VectorXd::Zero(d);
        for (int b = 0; b < d; ++b) offset += (prob.st.grid_step * nb[b]) * dirs.col(b);
        const Eigen::VectorXd z = zstar + offset;
        const double f = lp(z);
        seen[nb] = f;
        if (f0 - f < prob.st.grid_log_drop) {
          accepted.emplace_back(z, f);
          frontier.push(nb);
          if (static_cast<int>(accepted.size()) >= prob.st.grid_max_points) break;
        }
      }
    }
  }
  return accepted;
}

// Leave-one-out predictive ordinate of one area as a ratio of evidence
// integrals. Conditional on theta the predictive is an exact likelihood
// ratio, p(o_i | o_{-i}, theta) = p(o | theta) / p(o_{-i} | theta), so
//   CPO_i = p(o) / p(o_{-i})
//         = int exp(lp_full(theta)) dtheta / int exp(lp_rest(theta)) dtheta,
// where lp_rest is the log posterior of a genuine refit with observation i
// removed from a data copy, each refit's constrained Newton warm-started
// from the stored full-data mode. Approximating both integrands with the
// same nested-Laplace machinery makes their errors largely cancel in the
// ratio; integrating the marginal of eta_i instead (the tempting shortcut)
// inherits the Gaussian approximation's tail error at full strength.
// The leave-one-out posterior is wider than the full-data grid (removing an
// observation shifts the precision posterior, and the hyperprior tails decay
// only like exp(-|theta|/2)), so for a one-dimensional hyperparameter the
// grid is marched outward until the accumulated leave-one-out mass has
// converged. Both sums share one equally spaced point set, so the Riemann
// volume cancels.
double cpo_refit(const SubmodelFit& fit, const Problem& full_prob, const Problem& loo_prob,
                 ObservedData& loo, int i) {
  const double e = fit.data.expected[i];
  if (e == 0.0) return 1.0;
  loo.observed[i] = 0.0;
  loo.expected[i] = 0.0;
  // Dropping the model's only observation leaves an improper leave-one-out
  // posterior; the stored grid is then used as-is (no tail to converge on).
  const bool rest_informed = loo.expected.sum() > 0.0;

  std::vector<double> lp;    // full-data log posterior per point
  std::vector<double> rest;  // leave-one-out log posterior per point
  lp.reserve(fit.grid.size());
  rest.reserve(fit.grid.size());
  for (const GridPoint& gp : fit.grid) {
    if (gp.weight <= 0.0) continue;
    loo_prob.warm = gp.mode;
    lp.push_back(gp.log_post);
    rest.push_back(loo_prob.log_post(gp.theta, nullptr));
  }

  // Tail extension along log tau. March from each end of the stored grid at
  // its own spacing; stop once the new point adds a negligible fraction of
  // the accumulated leave-one-out mass (or at the configured cap). Skipped
  // for fixed-theta fits (nothing to integrate) and for two-dimensional
  // hyperparameters, where the stored rectangle is used as is.
  if (rest_informed && full_prob.tdim() == 1 && !fit.settings.fixed_theta &&
      fit.settings.cpo_tail_points > 0 && fit.grid.size() >= 2) {
    std::vector<int> order(fit.grid.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = static_cast<int>(k);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      return fit.grid[a].theta[0] < fit.grid[b].theta[0];
    });
    double h = std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k < order.size(); ++k)
      h = std::min(h, fit.grid[order[k]].theta[0] - fit.grid[order[k - 1]].theta[0]);
    if (std::isfinite(h) && h > 1e-9) {
      const double log_mass_frac = std::log(1e-3);
      for (int dir : {-1, +1}) {
        const GridPoint& edge = fit.grid[dir < 0 ? order.front() : order.back()];
        full_prob.warm = edge.mode;
        loo_prob.warm = edge.mode;
        for (int k = 1; k <= fit.settings.cpo_tail_points; ++k) {
          Eigen::VectorXd theta(1);
          theta << edge.theta[0] + dir * k * h;
          if (std::abs(theta[0]) > 38.0) break;  // precision transform saturates
          const double lp_ext = full_prob.log_post(theta, nullptr);
          const double rest_ext = loo_prob.log_post(theta, nullptr);
          if (!std::isfinite(lp_ext) || !std::isfinite(rest_ext)) break;
          lp.push_back(lp_ext);
          rest.push_back(rest_ext);
          if (rest_ext < log_sum_exp(rest) + log_mass_frac) break;
        }
      }
    }
  }

  loo.observed[i] = fit.data.observed[i];
  loo.expected[i] = e;
  const double log_inv_cpo = log_sum_exp(rest) - log_sum_exp(lp);
  return std::clamp(std::exp(-log_inv_cpo), 1e-300, 1.0);
}

}  // namespace

SubmodelFit LaplaceEngine::fit() const {
  const Problem& prob = impl_->prob;
  std::vector<std::pair<Eigen::VectorXd, double>> points;
  if (prob.st.fixed_theta) {
    Eigen::VectorXd th = *prob.st.fixed_theta;
    if (th.size() != prob.tdim()) throw ConfigError("fixed hyperparameter point has the wrong dimension");
    points.emplace_back(th, 0.0);
  } else {
    points = explore(prob);
  }

  double lp_max = -std::numeric_limits<double>::infinity();
  std::vector<GridPoint> grid;
  grid.reserve(points.size());
  for (const auto& [theta, lp_light] : points) {
    PointEval pe = impl_->prob.full_eval(theta);
    GridPoint gp;
    gp.theta = theta;
    gp.log_post = pe.log_post;
    gp.mode = std::move(pe.mode);
    gp.eta_mean = std::move(pe.eta_mean);
    gp.eta_sd = std::move(pe.eta_sd);
    gp.alpha_sd = pe.alpha_sd;
    lp_max = std::max(lp_max, gp.log_post);
    grid.push_back(std::move(gp));
  }
  double total = 0.0;
  for (GridPoint& gp : grid) {
    gp.weight = std::exp(gp.log_post - lp_max);
    total += gp.weight;
  }
  for (GridPoint& gp : grid) gp.weight /= total;
  // Drop numerically irrelevant points so downstream sampling does not
  // refactorize for them.
  std::vector<GridPoint> kept;
  kept.reserve(grid.size());
  double kept_total = 0.0;
  for (GridPoint& gp : grid) {
    if (gp.weight >= 1e-12) {
      kept_total += gp.weight;
      kept.push_back(std::move(gp));
    }
  }
  for (GridPoint& gp : kept) gp.weight /= kept_total;

  SubmodelFit out;
  out.family = impl_->family;
  out.graph = impl_->graph;
  out.data = impl_->data;
  out.settings = impl_->settings;
  out.grid = std::move(kept);
  return out;
}

double SubmodelFit::cpo_at(int local_area) const {
  if (local_area < 0 || local_area >= n_areas()) throw ConfigError("area index out of range");
  if (grid.empty()) throw ConfigError("fit has no hyperparameter grid");
  ObservedData loo = data;  // validated intact, then mutated per area
  const Problem full_prob(graph, family, data, settings);
  const Problem loo_prob(graph, family, loo, settings);
  return cpo_refit(*this, full_prob, loo_prob, loo, local_area);
}

std::vector<double> SubmodelFit::compute_cpo() const {
  if (grid.empty()) throw ConfigError("fit has no hyperparameter grid");
  ObservedData loo = data;
  const Problem full_prob(graph, family, data, settings);
  const Problem loo_prob(graph, family, loo, settings);
  std::vector<double> out(n_areas());
  for (int i = 0; i < n_areas(); ++i) out[i] = cpo_refit(*this, full_prob, loo_prob, loo, i);
  return out;
}

GaussianMixture SubmodelFit::area_marginal(int i) const {
  if (i < 0 || i >= n_areas()) throw ConfigError("area index out of range");
  GaussianMixture m;
  m.w.reserve(grid.size());
  for (const GridPoint& gp : grid) {
    m.w.push_back(gp.weight);
    m.mu.push_back(gp.eta_mean[i]);
    m.sigma.push_back(gp.eta_sd[i]);
  }
  return m;
}

GaussianMixture SubmodelFit::alpha_marginal() const {
  GaussianMixture m;
  const int alpha_idx = n_areas();
  for (const GridPoint& gp : grid) {
    m.w.push_back(gp.weight);
    m.mu.push_back(gp.mode[alpha_idx]);
    m.sigma.push_back(gp.alpha_sd);
  }
  return m;
}

Eigen::MatrixXd SubmodelFit::sample_joint(int n_samples, Rng& rng) const {
  if (n_samples <= 0) throw ConfigError("sample count must be positive");
  Problem prob(graph, family, data, settings);
  const int dim = prob.dim;
  const int K = static_cast<int>(grid.size());

  std::vector<double> cum(K);
  double run = 0.0;
  for (int k = 0; k < K; ++k) {
    run += grid[k].weight;
    cum[k] = run;
  }
  cum[K - 1] = 1.0;
  std::vector<int> pick(n_samples);
  for (int s = 0; s < n_samples; ++s) {
    const double u = rng.uniform();
    pick[s] = static_cast<int>(std::lower_bound(cum.begin(), cum.end(), u) - cum.begin());
  }

  Eigen::MatrixXd out(dim, n_samples);
  for (int k = 0; k < K; ++k) {
    std::vector<int> idx;
    for (int s = 0; s < n_samples; ++s)
      if (pick[s] == k) idx.push_back(s);
    if (idx.empty()) continue;
    const GridPoint& gp = grid[k];
    const SpMat Qp = prob.prior_matrix(gp.theta);
    const SpMat Qc = prob.conditional_matrix(Qp, gp.mode);
    Solver solver;
    solver.compute(Qc);
    if (solver.info() != Eigen::Success) throw FitError("sampling factorization failed");
    const Eigen::MatrixXd V = solver.solve(prob.At);
    Eigen::LLT<Eigen::MatrixXd> Mllt(prob.A * V);
    if (Mllt.info() != Eigen::Success) throw FitError("constraint correction failed");
    const Eigen::VectorXd d = solver.vectorD();
    Eigen::VectorXd dinv_sqrt(dim);
    for (int i = 0; i < dim; ++i) {
      if (!(d[i] > 0.0)) throw FitError("factor diagonal is not positive");
      dinv_sqrt[i] = 1.0 / std::sqrt(d[i]);
    }
    for (int s : idx) {
      Eigen::VectorXd w(dim);
      for (int i = 0; i < dim; ++i) w[i] = rng.normal();
      Eigen::VectorXd y = solver.matrixU().solve((w.array() * dinv_sqrt.array()).matrix().eval());
      Eigen::VectorXd x = solver.permutationPinv() * y;
      x += gp.mode;
      x -= V * Mllt.solve(prob.A * x);
      out.col(s) = x;
    }
  }
  return out;
}

}  // namespace riskmap
