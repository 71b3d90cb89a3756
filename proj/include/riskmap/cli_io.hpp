#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "riskmap/areal_graph.hpp"
#include "riskmap/laplace_core.hpp"
#include "riskmap/model_criteria.hpp"
#include "riskmap/partition_engine.hpp"
#include "riskmap/posterior_merge.hpp"

namespace riskmap {

// Stratified counts in long form: one row per (area, stratum) pair.
struct StratifiedCounts {
  std::vector<std::string> area_ids;
  std::vector<std::string> strata;
  Eigen::MatrixXd population;  // areas x strata
  Eigen::MatrixXd observed;    // areas x strata
};

// Header: area_id,stratum,population,observed
StratifiedCounts read_stratified_csv(std::istream& in);

// Indirect standardization against the whole-map stratum rates; the expected
// counts sum exactly to the observed total.
ObservedData standardize_indirect(const StratifiedCounts& sc);

struct AreaRates {
  Eigen::VectorXd crude_rate;  // per 100000 population
  Eigen::VectorXd smr;         // observed over expected
};
AreaRates crude_and_smr(const StratifiedCounts& sc, const ObservedData& data);

// Header: area_id,observed,expected
ObservedData read_counts_csv(std::istream& in, std::vector<std::string>& ids_out);
void write_counts_csv(std::ostream& out, const std::vector<std::string>& ids,
                      const ObservedData& data);

// Header: area_id,true_risk
Eigen::VectorXd read_truth_csv(std::istream& in, std::vector<std::string>& ids_out);
void write_truth_csv(std::ostream& out, const std::vector<std::string>& ids,
                     const Eigen::VectorXd& risk);

// Header: area_id,mean,sd,median,q025,q975,exceed_prob
void write_results_csv(std::ostream& out, const std::vector<std::string>& ids,
                       const std::vector<MarginalSummary>& summaries);
std::vector<MarginalSummary> read_results_csv(std::istream& in,
                                              std::vector<std::string>& ids_out);

// Header: value,density
void write_alpha_density_csv(std::ostream& out, const AlphaEstimate& alpha);

struct RunTiming {
  double fit_seconds = 0.0;
  double merge_seconds = 0.0;
  double total_seconds = 0.0;
};

// Key-value report: criteria, intercept summary, stage timings.
void write_criteria_report(std::ostream& out, const CriteriaReport& criteria,
                           const AlphaEstimate& alpha, const RunTiming& timing);

void write_run_manifest(std::ostream& out, const FitBundle& bundle, const RunTiming& timing,
                        const std::string& counts_path, const std::string& edges_path,
                        const std::string& partition_path);

struct FitRunOptions {
  std::string counts_path;
  std::string edges_path;
  std::string partition_path;  // may be empty for global plans
  std::string out_prefix;
  FitPlan plan;
};

// Full pipeline: read inputs, fit the partition, merge, compute criteria and
// the intercept posterior, and write <prefix>_results.csv,
// <prefix>_criteria.txt, <prefix>_alpha.csv and <prefix>_manifest.json.
void run_fit(const FitRunOptions& opt, std::ostream& log);

}  // namespace riskmap
