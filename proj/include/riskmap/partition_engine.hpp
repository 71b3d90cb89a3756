#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "riskmap/areal_graph.hpp"
#include "riskmap/laplace_core.hpp"
#include "riskmap/rng.hpp"

namespace riskmap {

enum class FitKind { global, disjoint, k_order };

std::string fit_kind_name(FitKind k);
FitKind fit_kind_from_name(const std::string& name);

struct FitPlan {
  FitKind kind = FitKind::disjoint;
  CarFamily family = CarFamily::lcar;
  int k = 1;            // neighbourhood expansion order, k_order only
  int samples = 1000;   // joint draws used for intercept and criteria work
  std::uint64_t seed = 1;
  int workers = 1;      // submodel-level parallelism
  FitSettings settings;
};

struct SubmodelResult {
  std::vector<int> members;  // local index -> area index in the full map
  SubmodelFit fit;
  double seconds = 0.0;      // wall time of this submodel fit
};

struct FitBundle {
  FitPlan plan;
  DomainPartition partition;  // the partition actually fitted (after expansion)
  std::vector<SubmodelResult> submodels;
  int n_areas = 0;
  double max_seconds = 0.0;   // slowest submodel (the wall time bound with
                              // one worker per submodel)
  double sum_seconds = 0.0;
};

// Deterministic per-submodel RNG seed, independent of worker count.
inline std::uint64_t submodel_seed(const FitPlan& plan, int d) {
  return derive_seed(plan.seed, static_cast<std::uint64_t>(d));
}

// Fit every subregion of the partition as its own model. `base` must be a
// disjoint cover of the map; for k_order plans it is expanded with the
// k-order graph neighbourhood first, for global plans it is replaced by the
// single-block partition. Submodels are dispatched largest first across the
// plan's workers; results are identical for any worker count.
FitBundle fit_partition(const AdjacencyGraph& graph, const ObservedData& data,
                        const DomainPartition& base, const FitPlan& plan);

// Whole-map fit: exactly the single-block disjoint fit.
FitBundle fit_global(const AdjacencyGraph& graph, const ObservedData& data, FitPlan plan);

}  // namespace riskmap
