// Compares serial and OpenMP submodel dispatch on a synthetic lattice and
// verifies the results are identical bit for bit.

#include <chrono>
#include <cstdio>
#include <iostream>

#include "CLI11.hpp"
#include "riskmap/parallel.hpp"
#include "riskmap/partition_engine.hpp"
#include "riskmap/posterior_merge.hpp"
#include "riskmap/sim_lab.hpp"

using namespace riskmap;

int main(int argc, char** argv) {
  CLI::App app{"Submodel dispatch benchmark: serial vs OpenMP"};
  int rows = 24, cols = 24, block_rows = 3, block_cols = 3;
  double expected = 20.0;
  std::uint64_t seed = 7;
  app.add_option("--rows", rows)->capture_default_str();
  app.add_option("--cols", cols)->capture_default_str();
  app.add_option("--block-rows", block_rows)->capture_default_str();
  app.add_option("--block-cols", block_cols)->capture_default_str();
  app.add_option("--expected", expected)->capture_default_str();
  app.add_option("--seed", seed)->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  const Eigen::MatrixXd coords = lattice_coords(rows, cols, 5.0);
  const AdjacencyGraph graph = AdjacencyGraph::lattice(rows, cols);
  Rng rng(seed);
  const TrueSurface surface = scenario_bands(
      coords, {(rows / 4) * cols + cols / 4, (3 * rows / 4) * cols + (3 * cols) / 4},
      {(rows / 2) * cols + cols / 2});
  const ObservedData data =
      generate_counts(surface, Eigen::VectorXd::Constant(rows * cols, expected), rng);
  const DomainPartition part = grid_partition(coords, block_rows, block_cols);

  FitPlan plan;
  plan.kind = FitKind::disjoint;
  plan.seed = seed;
  plan.samples = 200;

  std::printf("%-10s %-9s %-12s %-12s\n", "mode", "workers", "wall[s]", "max-sub[s]");
  Eigen::VectorXd reference;
  for (const int workers : {1, hardware_workers()}) {
    plan.workers = workers;
    const auto t0 = std::chrono::steady_clock::now();
    const FitBundle bundle = fit_partition(graph, data, part, plan);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const MergedPosterior merged = merge_posteriors(bundle);
    Eigen::VectorXd means(bundle.n_areas);
    for (int i = 0; i < bundle.n_areas; ++i) means[i] = merged.summaries[i].mean;
    if (reference.size() == 0) {
      reference = means;
    } else if ((reference.array() != means.array()).any()) {
      std::cerr << "worker counts disagree: results are not reproducible\n";
      return 1;
    }
    std::printf("%-10s %-9d %-12.3f %-12.3f\n", workers == 1 ? "serial" : "openmp", workers, wall,
                bundle.max_seconds);
  }
  std::puts("results identical across worker counts");
  return 0;
}
