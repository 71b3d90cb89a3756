#include "riskmap/partition_engine.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>

#include "riskmap/errors.hpp"
#include "riskmap/parallel.hpp"

namespace riskmap {

std::string fit_kind_name(FitKind k) {
  switch (k) {
    case FitKind::global: return "global";
    case FitKind::disjoint: return "disjoint";
    case FitKind::k_order: return "k-order";
  }
  throw std::logic_error("unreachable kind");
}

FitKind fit_kind_from_name(const std::string& name) {
  if (name == "global") return FitKind::global;
  if (name == "disjoint") return FitKind::disjoint;
  if (name == "k-order" || name == "k_order") return FitKind::k_order;
  throw ConfigError("unknown fit kind '" + name + "' (expected global, disjoint or k-order)");
}

FitBundle fit_partition(const AdjacencyGraph& graph, const ObservedData& data,
                        const DomainPartition& base, const FitPlan& plan) {
  const int n = graph.size();
  data.validate(n);
  if (plan.samples <= 0) throw ConfigError("sample count must be positive");
  if (plan.workers < 1) throw ConfigError("worker count must be at least 1");

  DomainPartition part;
  switch (plan.kind) {
    case FitKind::global:
      part = single_partition(n);
      break;
    case FitKind::disjoint:
      if (base.mode != DomainPartition::Mode::disjoint)
        throw ConfigError("a disjoint plan needs a disjoint partition");
      part = base;
      break;
    case FitKind::k_order:
      if (plan.k < 1) throw ConfigError("k-order plans need k >= 1");
      part = k_order_expand(graph, base, plan.k);
      break;
  }
  part.validate(n);
  const int D = part.count();

  // Largest blocks first so a slow block does not trail the batch.
  std::vector<int> order(D);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return part.members[a].size() > part.members[b].size();
  });

  std::vector<SubmodelResult> results(D);
  std::vector<std::string> failures(D);
  parallel_for(D, plan.workers, [&](int t) {
    const int d = order[t];
    try {
      const auto t0 = std::chrono::steady_clock::now();
      const std::vector<int>& members = part.members[d];
      AdjacencyGraph sub = graph.induced_subgraph(members);
      ObservedData local;
      const int nd = static_cast<int>(members.size());
      local.observed.resize(nd);
      local.expected.resize(nd);
      for (int i = 0; i < nd; ++i) {
        local.observed[i] = data.observed[members[i]];
        local.expected[i] = data.expected[members[i]];
      }
      LaplaceEngine engine(sub, plan.family, local, plan.settings);
      results[d].fit = engine.fit();
      results[d].members = members;
      results[d].seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    } catch (const std::exception& e) {
      failures[d] = e.what();
      if (failures[d].empty()) failures[d] = "unknown error";
    }
  });
  for (int d = 0; d < D; ++d)
    if (!failures[d].empty())
      throw FitError("submodel " + std::to_string(d) + " failed: " + failures[d]);

  FitBundle out;
  out.plan = plan;
  out.partition = std::move(part);
  out.submodels = std::move(results);
  out.n_areas = n;
  for (const SubmodelResult& r : out.submodels) {
    out.max_seconds = std::max(out.max_seconds, r.seconds);
    out.sum_seconds += r.seconds;
  }
  return out;
}

FitBundle fit_global(const AdjacencyGraph& graph, const ObservedData& data, FitPlan plan) {
  plan.kind = FitKind::global;
  return fit_partition(graph, data, single_partition(graph.size()), plan);
}

}  // namespace riskmap
