#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <memory>
#include <optional>
#include <vector>

#include "riskmap/areal_graph.hpp"
#include "riskmap/car_priors.hpp"
#include "riskmap/gaussian_mixture.hpp"
#include "riskmap/rng.hpp"

namespace riskmap {

// Observed and expected counts per area. Areas with expected == 0 carry no
// likelihood information and must have a zero count.
struct ObservedData {
  Eigen::VectorXd observed;
  Eigen::VectorXd expected;

  int size() const { return static_cast<int>(observed.size()); }
  void validate(int n_areas) const;
};

// Full Poisson log likelihood (normalizing constants included); areas with
// expected == 0 contribute zero.
double poisson_loglik(const ObservedData& data, const Eigen::VectorXd& eta);

struct FitSettings {
  double intercept_precision = 1e-3;
  double grid_step = 0.75;        // step between grid points in standardized coords
  double grid_log_drop = 6.0;     // keep grid points within this log-density drop
  int grid_max_points = 500;
  int newton_max_iter = 100;
  int newton_max_halvings = 30;
  double newton_tol = 1e-8;       // sup-norm change in the latent state
  double intrinsic_jitter = 1e-8; // relative diagonal lift for intrinsic priors
  // Predictive-ordinate evaluation may extend the hyperparameter grid along
  // log tau: the leave-one-out posterior has heavier tails than the full one
  // and can put mass beyond the stored grid. Cap on extra points marched per
  // direction; 0 disables the extension.
  int cpo_tail_points = 80;
  // When set, hyperparameter exploration is skipped and the model is
  // evaluated at exactly this internal-scale point (weight 1).
  std::optional<Eigen::VectorXd> fixed_theta;
};

// One hyperparameter grid point with its Gaussian field approximation.
// Latent layout: x = (xi_0 .. xi_{n-1}, alpha).
struct GridPoint {
  Eigen::VectorXd theta;    // internal scale: (log tau) or (log tau, logit lambda)
  double log_post = 0.0;    // unnormalized log posterior of theta
  double weight = 0.0;      // normalized integration weight
  Eigen::VectorXd mode;     // conditional latent mode, length n+1
  Eigen::VectorXd eta_mean; // per-area log-risk mean (alpha + xi_i)
  Eigen::VectorXd eta_sd;   // per-area log-risk sd, constraint corrected
  double alpha_sd = 0.0;
};

// Self-contained fit of one (sub)model: everything needed to evaluate
// posterior marginals, predictive ordinates and to draw joint samples.
struct SubmodelFit {
  CarFamily family = CarFamily::lcar;
  AdjacencyGraph graph;
  ObservedData data;
  FitSettings settings;
  std::vector<GridPoint> grid;

  int n_areas() const { return graph.size(); }
  // Posterior marginal of the log risk of area i (mixture over the grid).
  GaussianMixture area_marginal(int i) const;
  GaussianMixture alpha_marginal() const;
  // Conditional predictive ordinate p(o_i | o_{-i}), evaluated on demand as
  // a ratio of evidence integrals: each hyperparameter grid point gets a
  // genuine leave-one-out Newton refit (warm-started from the stored
  // full-data mode) whose log posterior is summed against the stored
  // full-data ones; for a one-dimensional hyperparameter the grid is
  // extended into the tails until the leave-one-out posterior mass is
  // covered. Areas with expected == 0 carry no likelihood term and return 1.
  double cpo_at(int local_area) const;
  std::vector<double> compute_cpo() const;  // cpo_at for every area
  // Joint posterior draws of the latent vector (xi..., alpha); one column per
  // sample. Grid points are drawn from the integration weights, then the
  // Gaussian field is sampled and constraint-corrected.
  Eigen::MatrixXd sample_joint(int n_samples, Rng& rng) const;
};

class LaplaceEngine {
 public:
  LaplaceEngine(const AdjacencyGraph& graph, CarFamily family,
                const ObservedData& data, const FitSettings& settings);
  ~LaplaceEngine();
  LaplaceEngine(const LaplaceEngine&) = delete;
  LaplaceEngine& operator=(const LaplaceEngine&) = delete;

  int theta_dim() const;

  struct PointEval {
    double log_post = 0.0;
    Eigen::VectorXd mode;
    Eigen::VectorXd eta_mean;
    Eigen::VectorXd eta_sd;
    double alpha_sd = 0.0;
  };
  // Full evaluation at one hyperparameter point: constrained Newton mode
  // search, tangent-space determinants, selected-inverse marginal variances.
  PointEval eval(const Eigen::VectorXd& theta) const;

  // Unnormalized log posterior of theta alone (no variance work).
  double objective(const Eigen::VectorXd& theta) const;

  // Pieces of the inner optimization, exposed for derivative checks.
  // latent_objective is the constrained Newton target before restriction;
  // latent_neg_hessian is its negated second derivative (prior precision
  // plus likelihood curvature).
  double latent_objective(const Eigen::VectorXd& theta, const Eigen::VectorXd& x) const;
  Eigen::VectorXd latent_gradient(const Eigen::VectorXd& theta, const Eigen::VectorXd& x) const;
  Eigen::SparseMatrix<double> latent_neg_hessian(const Eigen::VectorXd& theta,
                                                 const Eigen::VectorXd& x) const;

  // Hyperparameter exploration (mode search + standardized grid walk) plus
  // per-point evaluation and predictive ordinates.
  SubmodelFit fit() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace riskmap
