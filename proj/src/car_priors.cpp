#include "riskmap/car_priors.hpp"

#include <cmath>
#include <stdexcept>

#include "riskmap/errors.hpp"

namespace riskmap {

std::string family_name(CarFamily f) {
  switch (f) {
    case CarFamily::icar: return "icar";
    case CarFamily::lcar: return "lcar";
    case CarFamily::bym: return "bym";
  }
  throw std::logic_error("unreachable family");
}

CarFamily family_from_name(const std::string& name) {
  if (name == "icar") return CarFamily::icar;
  if (name == "lcar") return CarFamily::lcar;
  if (name == "bym") return CarFamily::bym;
  throw ConfigError("unknown prior family '" + name + "' (expected icar, lcar or bym)");
}

void CarSpec::validate() const {
  auto positive = [](double v, const char* what) {
    if (!(v > 0.0) || !std::isfinite(v))
      throw ConfigError(std::string(what) + " must be positive and finite");
  };
  switch (family) {
    case CarFamily::icar:
      positive(tau, "tau");
      break;
    case CarFamily::lcar:
      positive(tau, "tau");
      if (!(lambda >= 0.0 && lambda < 1.0))
        throw ConfigError("lambda must lie in [0, 1)");
      break;
    case CarFamily::bym:
      positive(tau_u, "tau_u");
      positive(tau_v, "tau_v");
      break;
  }
}

namespace {

// Graph Laplacian D_W - W as triplets scaled by `weight`, offset by
// (row_off, col_off) into a larger matrix.
void laplacian_triplets(const AdjacencyGraph& g, double weight, int row_off,
                        int col_off, std::vector<Eigen::Triplet<double>>& out) {
  const int n = g.size();
  for (int i = 0; i < n; ++i) {
    out.emplace_back(row_off + i, col_off + i, weight * static_cast<double>(g.degree(i)));
    for (int j : g.neighbors(i)) out.emplace_back(row_off + i, col_off + j, -weight);
  }
}

Eigen::VectorXd ones_constraint(int n) {
  return Eigen::VectorXd::Ones(n);
}

}  // namespace

SparsePrecision build_icar(const AdjacencyGraph& g, double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw ConfigError("tau must be positive and finite");
  const int n = g.size();
  SparsePrecision out;
  out.n = n;
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(n) + 2 * static_cast<std::size_t>(g.edge_count()));
  laplacian_triplets(g, tau, 0, 0, trip);
  out.Q.resize(n, n);
  out.Q.setFromTriplets(trip.begin(), trip.end());
  // One flat direction per connected component: constrain each component's
  // indicator vector so the restricted prior is proper.
  auto comps = g.connected_components();
  out.rank_deficiency = static_cast<int>(comps.size());
  for (const auto& comp : comps) {
    Eigen::VectorXd a = Eigen::VectorXd::Zero(n);
    for (int v : comp) a[v] = 1.0;
    out.constraints.push_back(std::move(a));
  }
  return out;
}

SparsePrecision build_lcar(const AdjacencyGraph& g, double tau, double lambda) {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw ConfigError("tau must be positive and finite");
  if (!(lambda >= 0.0 && lambda < 1.0)) throw ConfigError("lambda must lie in [0, 1)");
  const int n = g.size();
  SparsePrecision out;
  out.n = n;
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(n) + 2 * static_cast<std::size_t>(g.edge_count()));
  laplacian_triplets(g, tau * lambda, 0, 0, trip);
  for (int i = 0; i < n; ++i) trip.emplace_back(i, i, tau * (1.0 - lambda));
  out.Q.resize(n, n);
  out.Q.setFromTriplets(trip.begin(), trip.end());
  // Full rank already, but the global level stays confounded with the
  // intercept in practice, so the sum-to-zero restriction is kept.
  out.rank_deficiency = 0;
  out.constraints.push_back(ones_constraint(n));
  return out;
}

SparsePrecision build_bym(const AdjacencyGraph& g, double tau_u, double tau_v) {
  if (!(tau_u > 0.0) || !std::isfinite(tau_u)) throw ConfigError("tau_u must be positive and finite");
  if (!(tau_v > 0.0) || !std::isfinite(tau_v)) throw ConfigError("tau_v must be positive and finite");
  const int n = g.size();
  SparsePrecision out;
  out.n = 2 * n;
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(2 * static_cast<std::size_t>(n) + 2 * static_cast<std::size_t>(g.edge_count()));
  laplacian_triplets(g, tau_u, 0, 0, trip);
  for (int i = 0; i < n; ++i) trip.emplace_back(n + i, n + i, tau_v);
  out.Q.resize(2 * n, 2 * n);
  out.Q.setFromTriplets(trip.begin(), trip.end());
  out.rank_deficiency = static_cast<int>(g.connected_components().size());
  // The observable field is u + v; a single constraint on its total keeps the
  // combined level identified against the intercept.
  out.constraints.push_back(ones_constraint(2 * n));
  return out;
}

SparsePrecision build_precision(const AdjacencyGraph& g, const CarSpec& spec) {
  spec.validate();
  switch (spec.family) {
    case CarFamily::icar: return build_icar(g, spec.tau);
    case CarFamily::lcar: return build_lcar(g, spec.tau, spec.lambda);
    case CarFamily::bym: return build_bym(g, spec.tau_u, spec.tau_v);
  }
  throw std::logic_error("unreachable family");
}

}  // namespace riskmap
