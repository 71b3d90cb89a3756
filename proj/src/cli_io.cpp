#include "riskmap/cli_io.hpp"

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "json.hpp"
#include "riskmap/errors.hpp"

namespace riskmap {

namespace {

std::string fmt_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

double parse_number(const std::string& tok, const std::string& what, int line_no) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(tok, &pos);
    if (pos != tok.size()) throw std::invalid_argument(tok);
    if (!std::isfinite(v)) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw DataError("line " + std::to_string(line_no) + ": cannot parse " + what + " '" + tok +
                    "'");
  }
}

void expect_header(const std::string& got, const std::string& want) {
  if (trim(got) != want) throw DataError("expected header '" + want + "', found '" + trim(got) + "'");
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open input file '" + path + "'");
  return in;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open output file '" + path + "'");
  return out;
}

}  // namespace

StratifiedCounts read_stratified_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("stratified file is empty");
  expect_header(line, "area_id,stratum,population,observed");

  StratifiedCounts sc;
  std::unordered_map<std::string, int> area_index, stratum_index;
  std::vector<std::array<double, 2>> cells;  // parallel to (area, stratum) pairs
  std::vector<std::pair<int, int>> keys;
  std::unordered_map<long long, bool> seen;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto tok = split_csv(t);
    if (tok.size() != 4)
      throw DataError("line " + std::to_string(line_no) + ": expected 4 fields, found " +
                      std::to_string(tok.size()));
    if (tok[0].empty() || tok[1].empty())
      throw DataError("line " + std::to_string(line_no) + ": empty area or stratum id");
    int a;
    if (auto it = area_index.find(tok[0]); it != area_index.end()) {
      a = it->second;
    } else {
      a = static_cast<int>(sc.area_ids.size());
      area_index.emplace(tok[0], a);
      sc.area_ids.push_back(tok[0]);
    }
    int j;
    if (auto it = stratum_index.find(tok[1]); it != stratum_index.end()) {
      j = it->second;
    } else {
      j = static_cast<int>(sc.strata.size());
      stratum_index.emplace(tok[1], j);
      sc.strata.push_back(tok[1]);
    }
    const long long key = static_cast<long long>(a) * 1000000 + j;
    if (seen.count(key))
      throw DataError("line " + std::to_string(line_no) + ": duplicate area/stratum pair");
    seen[key] = true;
    const double pop = parse_number(tok[2], "population", line_no);
    const double obs = parse_number(tok[3], "observed", line_no);
    if (pop < 0.0 || obs < 0.0)
      throw DataError("line " + std::to_string(line_no) + ": negative population or count");
    if (obs != std::floor(obs))
      throw DataError("line " + std::to_string(line_no) + ": observed count must be an integer");
    keys.emplace_back(a, j);
    cells.push_back({pop, obs});
  }
  const int n = static_cast<int>(sc.area_ids.size());
  const int J = static_cast<int>(sc.strata.size());
  if (n == 0 || J == 0) throw DataError("stratified file has no data rows");
  sc.population = Eigen::MatrixXd::Zero(n, J);
  sc.observed = Eigen::MatrixXd::Zero(n, J);
  for (std::size_t r = 0; r < keys.size(); ++r) {
    sc.population(keys[r].first, keys[r].second) = cells[r][0];
    sc.observed(keys[r].first, keys[r].second) = cells[r][1];
  }
  return sc;
}

ObservedData standardize_indirect(const StratifiedCounts& sc) {
  const int n = static_cast<int>(sc.population.rows());
  const int J = static_cast<int>(sc.population.cols());
  Eigen::VectorXd rate(J);
  for (int j = 0; j < J; ++j) {
    const double pop = sc.population.col(j).sum();
    const double obs = sc.observed.col(j).sum();
    if (pop <= 0.0) {
      if (obs > 0.0) throw DataError("stratum '" + sc.strata[j] + "' has cases but no population");
      rate[j] = 0.0;
    } else {
      rate[j] = obs / pop;
    }
  }
  ObservedData out;
  out.observed.resize(n);
  out.expected.resize(n);
  for (int i = 0; i < n; ++i) {
    out.observed[i] = sc.observed.row(i).sum();
    out.expected[i] = sc.population.row(i).dot(rate);
  }
  return out;
}

AreaRates crude_and_smr(const StratifiedCounts& sc, const ObservedData& data) {
  const int n = static_cast<int>(sc.population.rows());
  if (data.size() != n) throw DataError("rates need counts for every area");
  AreaRates out;
  out.crude_rate.resize(n);
  out.smr.resize(n);
  for (int i = 0; i < n; ++i) {
    const double pop = sc.population.row(i).sum();
    out.crude_rate[i] = pop > 0.0 ? data.observed[i] / pop * 100000.0 : 0.0;
    out.smr[i] = data.expected[i] > 0.0 ? data.observed[i] / data.expected[i] : 0.0;
  }
  return out;
}

ObservedData read_counts_csv(std::istream& in, std::vector<std::string>& ids_out) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("counts file is empty");
  expect_header(line, "area_id,observed,expected");
  ids_out.clear();
  std::vector<double> obs, exp_;
  std::unordered_map<std::string, bool> seen;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto tok = split_csv(t);
    if (tok.size() != 3)
      throw DataError("line " + std::to_string(line_no) + ": expected 3 fields, found " +
                      std::to_string(tok.size()));
    if (tok[0].empty()) throw DataError("line " + std::to_string(line_no) + ": empty area id");
    if (seen.count(tok[0]))
      throw DataError("line " + std::to_string(line_no) + ": duplicate area id '" + tok[0] + "'");
    seen[tok[0]] = true;
    const double o = parse_number(tok[1], "observed count", line_no);
    if (o != std::floor(o))
      throw DataError("line " + std::to_string(line_no) + ": observed count must be an integer");
    const double e = parse_number(tok[2], "expected count", line_no);
    ids_out.push_back(tok[0]);
    obs.push_back(o);
    exp_.push_back(e);
  }
  if (ids_out.empty()) throw DataError("counts file has no data rows");
  ObservedData out;
  out.observed = Eigen::Map<Eigen::VectorXd>(obs.data(), static_cast<int>(obs.size()));
  out.expected = Eigen::Map<Eigen::VectorXd>(exp_.data(), static_cast<int>(exp_.size()));
  return out;
}

void write_counts_csv(std::ostream& out, const std::vector<std::string>& ids,
                      const ObservedData& data) {
  out << "area_id,observed,expected\n";
  for (std::size_t i = 0; i < ids.size(); ++i)
    out << ids[i] << ',' << fmt_g(data.observed[static_cast<int>(i)]) << ','
        << fmt_g(data.expected[static_cast<int>(i)]) << '\n';
}

Eigen::VectorXd read_truth_csv(std::istream& in, std::vector<std::string>& ids_out) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("truth file is empty");
  expect_header(line, "area_id,true_risk");
  ids_out.clear();
  std::vector<double> risk;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto tok = split_csv(t);
    if (tok.size() != 2)
      throw DataError("line " + std::to_string(line_no) + ": expected 2 fields");
    ids_out.push_back(tok[0]);
    risk.push_back(parse_number(tok[1], "true risk", line_no));
  }
  if (ids_out.empty()) throw DataError("truth file has no data rows");
  return Eigen::Map<Eigen::VectorXd>(risk.data(), static_cast<int>(risk.size()));
}

void write_truth_csv(std::ostream& out, const std::vector<std::string>& ids,
                     const Eigen::VectorXd& risk) {
  out << "area_id,true_risk\n";
  for (std::size_t i = 0; i < ids.size(); ++i)
    out << ids[i] << ',' << fmt_g(risk[static_cast<int>(i)]) << '\n';
}

void write_results_csv(std::ostream& out, const std::vector<std::string>& ids,
                       const std::vector<MarginalSummary>& summaries) {
  if (ids.size() != summaries.size()) throw DataError("results need one summary per area");
  out << "area_id,mean,sd,median,q025,q975,exceed_prob\n";
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const MarginalSummary& s = summaries[i];
    out << ids[i] << ',' << fmt_g(s.mean) << ',' << fmt_g(s.sd) << ',' << fmt_g(s.median) << ','
        << fmt_g(s.q025) << ',' << fmt_g(s.q975) << ',' << fmt_g(s.exceed_prob) << '\n';
  }
}

std::vector<MarginalSummary> read_results_csv(std::istream& in,
                                              std::vector<std::string>& ids_out) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("results file is empty");
  expect_header(line, "area_id,mean,sd,median,q025,q975,exceed_prob");
  ids_out.clear();
  std::vector<MarginalSummary> out;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto tok = split_csv(t);
    if (tok.size() != 7)
      throw DataError("line " + std::to_string(line_no) + ": expected 7 fields");
    MarginalSummary s;
    s.mean = parse_number(tok[1], "mean", line_no);
    s.sd = parse_number(tok[2], "sd", line_no);
    s.median = parse_number(tok[3], "median", line_no);
    s.q025 = parse_number(tok[4], "q025", line_no);
    s.q975 = parse_number(tok[5], "q975", line_no);
    s.exceed_prob = parse_number(tok[6], "exceed_prob", line_no);
    ids_out.push_back(tok[0]);
    out.push_back(s);
  }
  if (out.empty()) throw DataError("results file has no data rows");
  return out;
}

void write_alpha_density_csv(std::ostream& out, const AlphaEstimate& alpha) {
  out << "value,density\n";
  for (int g = 0; g < alpha.grid.size(); ++g)
    out << fmt_g(alpha.grid[g]) << ',' << fmt_g(alpha.density[g]) << '\n';
}

void write_criteria_report(std::ostream& out, const CriteriaReport& criteria,
                           const AlphaEstimate& alpha, const RunTiming& timing) {
  out << "samples " << criteria.samples << '\n';
  out << "mean_deviance " << fmt_g(criteria.mean_deviance) << '\n';
  out << "deviance_at_mean " << fmt_g(criteria.deviance_at_mean) << '\n';
  out << "p_eff " << fmt_g(criteria.p_eff) << '\n';
  out << "dic " << fmt_g(criteria.dic) << '\n';
  out << "waic " << fmt_g(criteria.waic) << '\n';
  out << "p_waic " << fmt_g(criteria.p_waic) << '\n';
  out << "mc_se_mean_deviance " << fmt_g(criteria.mc_se_mean_deviance) << '\n';
  out << "alpha.mean " << fmt_g(alpha.mean) << '\n';
  out << "alpha.sd " << fmt_g(alpha.sd) << '\n';
  out << "alpha.median " << fmt_g(alpha.median) << '\n';
  out << "alpha.q025 " << fmt_g(alpha.q025) << '\n';
  out << "alpha.q975 " << fmt_g(alpha.q975) << '\n';
  out << "alpha.kde_bandwidth " << fmt_g(alpha.bandwidth) << '\n';
  out << "T.run " << fmt_g(timing.fit_seconds) << '\n';
  out << "T.merge " << fmt_g(timing.merge_seconds) << '\n';
  out << "T.total " << fmt_g(timing.total_seconds) << '\n';
}

void write_run_manifest(std::ostream& out, const FitBundle& bundle, const RunTiming& timing,
                        const std::string& counts_path, const std::string& edges_path,
                        const std::string& partition_path) {
  nlohmann::json j;
  j["command"] = "fit";
  j["inputs"]["counts"] = counts_path;
  j["inputs"]["edges"] = edges_path;
  j["inputs"]["partition"] = partition_path;
  j["plan"]["kind"] = fit_kind_name(bundle.plan.kind);
  j["plan"]["family"] = family_name(bundle.plan.family);
  j["plan"]["k"] = bundle.plan.k;
  j["plan"]["samples"] = bundle.plan.samples;
  j["plan"]["seed"] = bundle.plan.seed;
  j["plan"]["workers"] = bundle.plan.workers;
  j["n_areas"] = bundle.n_areas;
  j["n_submodels"] = static_cast<int>(bundle.submodels.size());
  j["timing"]["fit_seconds"] = timing.fit_seconds;
  j["timing"]["merge_seconds"] = timing.merge_seconds;
  j["timing"]["total_seconds"] = timing.total_seconds;
  j["timing"]["max_submodel_seconds"] = bundle.max_seconds;
  j["timing"]["sum_submodel_seconds"] = bundle.sum_seconds;
  out << j.dump(2) << '\n';
}

void run_fit(const FitRunOptions& opt, std::ostream& log) {
  const auto t0 = std::chrono::steady_clock::now();
  auto seconds_since = [](const std::chrono::steady_clock::time_point& t) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
  };

  std::vector<std::string> ids;
  ObservedData data;
  {
    std::ifstream in = open_input(opt.counts_path);
    data = read_counts_csv(in, ids);
  }
  AdjacencyGraph graph;
  {
    std::ifstream in = open_input(opt.edges_path);
    graph = parse_edge_list(in, ids);
  }
  DomainPartition base = single_partition(graph.size());
  if (opt.plan.kind != FitKind::global) {
    if (opt.partition_path.empty())
      throw ConfigError("disjoint and k-order plans need a partition file");
    std::ifstream in = open_input(opt.partition_path);
    base = parse_partition_csv(in, graph);
  }

  const auto t_fit0 = std::chrono::steady_clock::now();
  FitBundle bundle = fit_partition(graph, data, base, opt.plan);
  RunTiming timing;
  timing.fit_seconds = seconds_since(t_fit0);
  log << "fitted " << bundle.submodels.size() << " submodel(s) over " << bundle.n_areas
      << " areas in " << fmt_g(timing.fit_seconds) << "s\n";

  const auto t_merge0 = std::chrono::steady_clock::now();
  MergedPosterior merged = merge_posteriors(bundle);
  if (merged.uniform_weight_areas > 0)
    log << "warning: predictive weights degenerated in " << merged.uniform_weight_areas
        << " area(s); used an even mix there\n";
  AlphaEstimate alpha = estimate_alpha(bundle, merged);
  const std::uint64_t criteria_seed = derive_seed(
      bundle.plan.seed, static_cast<std::uint64_t>(bundle.submodels.size()) + 1);
  CriteriaReport criteria =
      approx_criteria(data, merged.marginals, bundle.plan.samples, criteria_seed);
  timing.merge_seconds = seconds_since(t_merge0);
  timing.total_seconds = seconds_since(t0);

  {
    std::ofstream out = open_output(opt.out_prefix + "_results.csv");
    write_results_csv(out, ids, merged.summaries);
  }
  {
    std::ofstream out = open_output(opt.out_prefix + "_criteria.txt");
    write_criteria_report(out, criteria, alpha, timing);
  }
  {
    std::ofstream out = open_output(opt.out_prefix + "_alpha.csv");
    write_alpha_density_csv(out, alpha);
  }
  {
    std::ofstream out = open_output(opt.out_prefix + "_manifest.json");
    write_run_manifest(out, bundle, timing, opt.counts_path, opt.edges_path, opt.partition_path);
  }
  log << "wrote " << opt.out_prefix << "_{results.csv,criteria.txt,alpha.csv,manifest.json}\n";
}

}  // namespace riskmap
