// Command line front end: fit partitioned risk models, generate synthetic
// maps, score replicate fits against a known surface, and standardize
// stratified counts.

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "riskmap/cli_io.hpp"
#include "riskmap/errors.hpp"
#include "riskmap/parallel.hpp"
#include "riskmap/sim_lab.hpp"

namespace {

using namespace riskmap;

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open output file '" + path + "'");
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open input file '" + path + "'");
  return in;
}

Eigen::VectorXd parse_theta(const std::string& text) {
  std::vector<double> vals;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      vals.push_back(std::stod(tok));
    } catch (const std::exception&) {
      throw ConfigError("cannot parse hyperparameter value '" + tok + "'");
    }
  }
  if (vals.empty()) throw ConfigError("empty hyperparameter point");
  return Eigen::Map<Eigen::VectorXd>(vals.data(), static_cast<int>(vals.size()));
}

struct FitArgs {
  FitRunOptions opt;
  std::string kind = "disjoint";
  std::string family = "lcar";
  std::string fixed_theta;
};

struct SimArgs {
  int rows = 30, cols = 30;
  double spacing = 5.0;
  std::string scenario = "bands";
  double expected = 10.0;
  std::uint64_t seed = 1;
  std::vector<int> high_centers, low_centers;
  int basis = 40;
  double kappa = 1.0;
  int block_rows = 0, block_cols = 0;
  std::string out_prefix;
};

struct ScoreArgs {
  std::string truth_path;
  std::vector<std::string> results_paths;
};

struct StdArgs {
  std::string stratified_path;
  std::string out_path;
};

void do_fit(FitArgs& a) {
  a.opt.plan.kind = fit_kind_from_name(a.kind);
  a.opt.plan.family = family_from_name(a.family);
  if (!a.fixed_theta.empty()) a.opt.plan.settings.fixed_theta = parse_theta(a.fixed_theta);
  run_fit(a.opt, std::cout);
}

void do_simulate(const SimArgs& a) {
  if (a.out_prefix.empty()) throw ConfigError("simulate needs --out-prefix");
  const int n = a.rows * a.cols;
  const Eigen::MatrixXd coords = lattice_coords(a.rows, a.cols, a.spacing);
  Rng rng(a.seed);

  TrueSurface surface;
  if (a.scenario == "bands") {
    std::vector<int> high = a.high_centers, low = a.low_centers;
    if (high.empty() && low.empty()) {
      high = {(a.rows / 4) * a.cols + a.cols / 4,
              (3 * a.rows / 4) * a.cols + (3 * a.cols) / 4};
      low = {(a.rows / 2) * a.cols + a.cols / 2};
    }
    surface = scenario_bands(coords, high, low);
  } else if (a.scenario == "spline") {
    surface = scenario_spline(coords, a.basis, a.kappa, rng);
  } else {
    throw ConfigError("unknown scenario '" + a.scenario + "' (expected bands or spline)");
  }

  const Eigen::VectorXd expected = Eigen::VectorXd::Constant(n, a.expected);
  const ObservedData data = generate_counts(surface, expected, rng);

  std::vector<std::string> ids(n);
  for (int i = 0; i < n; ++i) ids[i] = "a" + std::to_string(i);
  AdjacencyGraph graph = AdjacencyGraph::lattice(a.rows, a.cols);

  {
    auto out = open_out(a.out_prefix + "_counts.csv");
    write_counts_csv(out, ids, data);
  }
  {
    auto out = open_out(a.out_prefix + "_edges.txt");
    for (int i = 0; i < n; ++i)
      for (int j : graph.neighbors(i))
        if (i < j) out << ids[i] << ' ' << ids[j] << '\n';
  }
  {
    auto out = open_out(a.out_prefix + "_truth.csv");
    write_truth_csv(out, ids, surface.log_risk.array().exp().matrix());
  }
  if (a.block_rows > 0 && a.block_cols > 0) {
    const DomainPartition part = grid_partition(coords, a.block_rows, a.block_cols);
    auto out = open_out(a.out_prefix + "_partition.csv");
    out << "area_id,subregion\n";
    std::vector<int> label(n, -1);
    for (int d = 0; d < part.count(); ++d)
      for (int v : part.members[d]) label[v] = d;
    for (int i = 0; i < n; ++i) out << ids[i] << ",b" << label[i] << '\n';
  }
  std::cout << "wrote " << a.out_prefix << "_{counts.csv,edges.txt,truth.csv"
            << (a.block_rows > 0 && a.block_cols > 0 ? ",partition.csv" : "") << "}\n";
}

void do_score(const ScoreArgs& a) {
  std::vector<std::string> truth_ids;
  Eigen::VectorXd truth;
  {
    auto in = open_in(a.truth_path);
    truth = read_truth_csv(in, truth_ids);
  }
  const int n = static_cast<int>(truth.size());
  const int L = static_cast<int>(a.results_paths.size());
  Eigen::MatrixXd est(n, L), lo(n, L), hi(n, L);
  for (int l = 0; l < L; ++l) {
    std::vector<std::string> ids;
    auto in = open_in(a.results_paths[l]);
    const auto summaries = read_results_csv(in, ids);
    if (ids != truth_ids)
      throw DataError("results file '" + a.results_paths[l] +
                      "' does not list the same areas as the truth file");
    for (int i = 0; i < n; ++i) {
      est(i, l) = summaries[i].median;
      lo(i, l) = summaries[i].q025;
      hi(i, l) = summaries[i].q975;
    }
  }
  const SimulationScore score = score_replicates(est, lo, hi, truth);
  std::cout << "replicates " << L << '\n'
            << "marb " << score.marb << '\n'
            << "mrrmse " << score.mrrmse << '\n'
            << "coverage " << score.coverage << '\n';
}

void do_standardize(const StdArgs& a) {
  StratifiedCounts sc;
  {
    auto in = open_in(a.stratified_path);
    sc = read_stratified_csv(in);
  }
  const ObservedData data = standardize_indirect(sc);
  const AreaRates rates = crude_and_smr(sc, data);
  auto out = open_out(a.out_path);
  out << "area_id,observed,expected,crude_rate,smr\n";
  char buf[160];
  for (std::size_t i = 0; i < sc.area_ids.size(); ++i) {
    const int r = static_cast<int>(i);
    std::snprintf(buf, sizeof buf, "%s,%.6g,%.6g,%.6g,%.6g\n", sc.area_ids[i].c_str(),
                  data.observed[r], data.expected[r], rates.crude_rate[r], rates.smr[r]);
    out << buf;
  }
  std::cout << "wrote " << a.out_path << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Areal disease risk mapping with partitioned latent Gaussian models"};
  app.require_subcommand(1);

  FitArgs fit_args;
  fit_args.opt.plan.workers = hardware_workers();
  CLI::App* fit = app.add_subcommand("fit", "Fit a risk model over a partitioned map");
  fit->add_option("--counts", fit_args.opt.counts_path, "CSV of area_id,observed,expected")
      ->required();
  fit->add_option("--edges", fit_args.opt.edges_path, "adjacency edge list (two ids per line)")
      ->required();
  fit->add_option("--partition", fit_args.opt.partition_path,
                  "CSV of area_id,subregion (disjoint and k-order plans)");
  fit->add_option("--out-prefix", fit_args.opt.out_prefix, "prefix for output files")->required();
  fit->add_option("--kind", fit_args.kind, "global, disjoint or k-order")
      ->capture_default_str();
  fit->add_option("--family", fit_args.family, "icar or lcar")->capture_default_str();
  fit->add_option("--k", fit_args.opt.plan.k, "neighbourhood expansion order")
      ->capture_default_str();
  fit->add_option("--samples", fit_args.opt.plan.samples, "joint posterior draws")
      ->capture_default_str();
  fit->add_option("--seed", fit_args.opt.plan.seed, "base RNG seed")->capture_default_str();
  fit->add_option("--workers", fit_args.opt.plan.workers, "parallel submodel fits")
      ->capture_default_str();
  fit->add_option("--fixed-theta", fit_args.fixed_theta,
                  "skip hyperparameter exploration; comma separated internal-scale values");
  fit->set_config("--config", "", "read options from an ini file");

  SimArgs sim_args;
  CLI::App* sim = app.add_subcommand("simulate", "Generate a synthetic map and counts");
  sim->add_option("--rows", sim_args.rows, "lattice rows")->capture_default_str();
  sim->add_option("--cols", sim_args.cols, "lattice columns")->capture_default_str();
  sim->add_option("--spacing", sim_args.spacing, "lattice spacing (km)")->capture_default_str();
  sim->add_option("--scenario", sim_args.scenario, "bands or spline")->capture_default_str();
  sim->add_option("--expected", sim_args.expected, "expected count per area")
      ->capture_default_str();
  sim->add_option("--seed", sim_args.seed, "RNG seed")->capture_default_str();
  sim->add_option("--high-centers", sim_args.high_centers, "area indices of elevated centers");
  sim->add_option("--low-centers", sim_args.low_centers, "area indices of reduced centers");
  sim->add_option("--basis", sim_args.basis, "spline basis functions per axis")
      ->capture_default_str();
  sim->add_option("--kappa", sim_args.kappa, "spline penalty strength")->capture_default_str();
  sim->add_option("--block-rows", sim_args.block_rows, "partition blocks per column axis");
  sim->add_option("--block-cols", sim_args.block_cols, "partition blocks per row axis");
  sim->add_option("--out-prefix", sim_args.out_prefix, "prefix for output files")->required();

  ScoreArgs score_args;
  CLI::App* sc = app.add_subcommand("score", "Score replicate fits against a known surface");
  sc->add_option("--truth", score_args.truth_path, "CSV of area_id,true_risk")->required();
  sc->add_option("--results", score_args.results_paths, "result CSVs, one per replicate")
      ->required();

  StdArgs std_args;
  CLI::App* st = app.add_subcommand("standardize", "Indirectly standardized expected counts");
  st->add_option("--stratified", std_args.stratified_path,
                 "CSV of area_id,stratum,population,observed")
      ->required();
  st->add_option("--out", std_args.out_path, "output CSV path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (fit->parsed()) do_fit(fit_args);
    if (sim->parsed()) do_simulate(sim_args);
    if (sc->parsed()) do_score(score_args);
    if (st->parsed()) do_standardize(std_args);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const FitError& e) {
    std::cerr << "fit error: " << e.what() << '\n';
    return 3;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
