#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <set>
#include <vector>

#include "riskmap/areal_graph.hpp"
#include "riskmap/errors.hpp"
#include "riskmap/partition_engine.hpp"
#include "riskmap/rng.hpp"
#include "riskmap/sim_lab.hpp"

using riskmap::AdjacencyGraph;
using riskmap::DomainPartition;
using riskmap::FitBundle;
using riskmap::FitKind;
using riskmap::FitPlan;
using riskmap::ObservedData;

namespace {

ObservedData lattice_counts(int rows, int cols, double expected, std::uint64_t seed) {
  const Eigen::MatrixXd coords = riskmap::lattice_coords(rows, cols, 5.0);
  riskmap::Rng rng(seed);
  const auto surface = riskmap::scenario_bands(coords, {0}, {rows * cols - 1});
  return riskmap::generate_counts(surface, Eigen::VectorXd::Constant(rows * cols, expected), rng);
}

DomainPartition quarters(int rows, int cols) {
  const Eigen::MatrixXd coords = riskmap::lattice_coords(rows, cols, 5.0);
  return riskmap::grid_partition(coords, 2, 2);
}

bool same_grid(const riskmap::SubmodelFit& a, const riskmap::SubmodelFit& b) {
  if (a.grid.size() != b.grid.size()) return false;
  for (size_t k = 0; k < a.grid.size(); ++k) {
    if (a.grid[k].weight != b.grid[k].weight) return false;
    if ((a.grid[k].theta - b.grid[k].theta).norm() != 0.0) return false;
    if ((a.grid[k].eta_mean - b.grid[k].eta_mean).norm() != 0.0) return false;
    if ((a.grid[k].eta_sd - b.grid[k].eta_sd).norm() != 0.0) return false;
  }
  return a.compute_cpo() == b.compute_cpo();
}

}  // namespace

TEST_CASE("fit kind names round trip") {
  for (auto k : {FitKind::global, FitKind::disjoint, FitKind::k_order})
    CHECK(riskmap::fit_kind_from_name(riskmap::fit_kind_name(k)) == k);
  CHECK(riskmap::fit_kind_from_name("k_order") == FitKind::k_order);
  CHECK(riskmap::fit_kind_from_name("k-order") == FitKind::k_order);
  CHECK_THROWS_AS(riskmap::fit_kind_from_name("cluster"), riskmap::ConfigError);
}

TEST_CASE("global plan ignores the partition and fits one block") {
  const auto g = AdjacencyGraph::lattice(4, 4);
  const auto data = lattice_counts(4, 4, 25.0, 3);
  FitPlan plan;
  plan.kind = FitKind::global;
  plan.family = riskmap::CarFamily::lcar;
  const FitBundle bundle = riskmap::fit_partition(g, data, quarters(4, 4), plan);
  REQUIRE(bundle.submodels.size() == 1);
  CHECK(bundle.partition.count() == 1);
  CHECK(bundle.submodels[0].members.size() == 16);
  CHECK(bundle.n_areas == 16);
  CHECK(bundle.submodels[0].fit.n_areas() == 16);
  CHECK(bundle.max_seconds > 0.0);
  CHECK(bundle.sum_seconds >= bundle.max_seconds);
}

TEST_CASE("disjoint fit produces one submodel per block over its own subgraph") {
  const auto g = AdjacencyGraph::lattice(4, 4);
  const auto data = lattice_counts(4, 4, 25.0, 5);
  FitPlan plan;
  plan.kind = FitKind::disjoint;
  const FitBundle bundle = riskmap::fit_partition(g, data, quarters(4, 4), plan);
  REQUIRE(bundle.submodels.size() == 4);
  for (const auto& sub : bundle.submodels) {
    CHECK(sub.members.size() == 4);
    CHECK(sub.fit.n_areas() == 4);
    CHECK(sub.seconds > 0.0);
    // Local data slices line up with the member map.
    for (size_t j = 0; j < sub.members.size(); ++j) {
      CHECK(sub.fit.data.observed[j] == data.observed[sub.members[j]]);
      CHECK(sub.fit.data.expected[j] == data.expected[sub.members[j]]);
    }
  }
}

TEST_CASE("k-order expansion happens inside the fit") {
  const auto g = AdjacencyGraph::lattice(4, 4);
  const auto data = lattice_counts(4, 4, 25.0, 7);
  FitPlan plan;
  plan.kind = FitKind::k_order;
  plan.k = 1;
  const FitBundle bundle = riskmap::fit_partition(g, data, quarters(4, 4), plan);
  CHECK(bundle.partition.mode == DomainPartition::Mode::overlapping);
  CHECK(bundle.partition.order == 1);
  const auto base = quarters(4, 4);
  for (int d = 0; d < 4; ++d) {
    const auto& mem = bundle.submodels[d].members;
    CHECK(mem.size() == 8);  // 2x2 block + distance-1 fringe on a 4x4 lattice
    const std::set<int> s(mem.begin(), mem.end());
    for (int v : base.members[d]) CHECK(s.count(v) == 1);
  }
  CHECK_THROWS_AS([&] {
    FitPlan bad = plan;
    bad.k = 0;
    riskmap::fit_partition(g, data, quarters(4, 4), bad);
  }(), riskmap::ConfigError);
}

TEST_CASE("disjoint plans refuse overlapping partitions") {
  const auto g = AdjacencyGraph::lattice(3, 3);
  const auto data = lattice_counts(3, 3, 20.0, 9);
  DomainPartition p;
  p.mode = DomainPartition::Mode::overlapping;
  p.members = {{0, 1, 2, 3, 4}, {4, 5, 6, 7, 8}};
  FitPlan plan;
  plan.kind = FitKind::disjoint;
  CHECK_THROWS_AS(riskmap::fit_partition(g, data, p, plan), riskmap::ConfigError);
}

TEST_CASE("submodel seeds are decoupled from worker count and block order") {
  FitPlan plan;
  plan.seed = 42;
  const auto s0 = riskmap::submodel_seed(plan, 0);
  const auto s1 = riskmap::submodel_seed(plan, 1);
  CHECK(s0 != s1);
  plan.workers = 8;
  CHECK(riskmap::submodel_seed(plan, 0) == s0);
  CHECK(riskmap::submodel_seed(plan, 1) == s1);
}

TEST_CASE("results are identical for any worker count") {
  const auto g = AdjacencyGraph::lattice(6, 6);
  const auto data = lattice_counts(6, 6, 30.0, 11);
  const Eigen::MatrixXd coords = riskmap::lattice_coords(6, 6, 5.0);
  const auto base = riskmap::grid_partition(coords, 2, 2);

  FitPlan plan;
  plan.kind = FitKind::k_order;
  plan.k = 1;
  plan.seed = 17;
  plan.workers = 1;
  const FitBundle serial = riskmap::fit_partition(g, data, base, plan);
  plan.workers = 4;
  const FitBundle pooled = riskmap::fit_partition(g, data, base, plan);

  REQUIRE(serial.submodels.size() == pooled.submodels.size());
  for (size_t d = 0; d < serial.submodels.size(); ++d) {
    CHECK(serial.submodels[d].members == pooled.submodels[d].members);
    CHECK(same_grid(serial.submodels[d].fit, pooled.submodels[d].fit));
  }
}

TEST_CASE("global helper equals the degenerate partition fit") {
  const auto g = AdjacencyGraph::lattice(3, 4);
  const auto data = lattice_counts(3, 4, 22.0, 13);
  FitPlan plan;
  plan.kind = FitKind::global;
  plan.seed = 5;
  const FitBundle a = riskmap::fit_global(g, data, plan);
  FitPlan via = plan;
  const FitBundle b = riskmap::fit_partition(g, data, riskmap::single_partition(12), via);
  REQUIRE(a.submodels.size() == 1);
  REQUIRE(b.submodels.size() == 1);
  CHECK(same_grid(a.submodels[0].fit, b.submodels[0].fit));
}

TEST_CASE("a failing submodel surfaces as a fit error naming the block") {
  const auto g = AdjacencyGraph::lattice(3, 3);
  const auto data = lattice_counts(3, 3, 20.0, 15);
  DomainPartition p;
  p.members = {{0, 1, 2, 3, 4, 5}, {6, 7, 8}};
  FitPlan plan;
  plan.kind = FitKind::disjoint;
  // One Newton step cannot reach the mode, so every block fails inside the
  // dispatch loop; the first failing block is reported with its index.
  plan.settings.newton_max_iter = 1;
  CHECK_THROWS_WITH_AS(riskmap::fit_partition(g, data, p, plan),
                       doctest::Contains("submodel 0"), riskmap::FitError);
}

TEST_CASE("plan validation rejects nonsense") {
  const auto g = AdjacencyGraph::lattice(2, 2);
  const auto data = lattice_counts(2, 2, 10.0, 1);
  FitPlan plan;
  plan.samples = 0;
  CHECK_THROWS_AS(riskmap::fit_partition(g, data, riskmap::single_partition(4), plan),
                  riskmap::ConfigError);
  plan.samples = 100;
  plan.workers = 0;
  CHECK_THROWS_AS(riskmap::fit_partition(g, data, riskmap::single_partition(4), plan),
                  riskmap::ConfigError);
}
