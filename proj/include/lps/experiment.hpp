#ifndef LPS_EXPERIMENT_HPP
#define LPS_EXPERIMENT_HPP

// Test-set evaluation of LPS, LPS-q and the baseline, and the repeated-split
// experiment protocol with its CSV report.

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "lps/training.hpp"

namespace lps {

struct ExperimentPlan {
  int runs = 10;
  std::uint64_t seed = 0;
  int workers = 1;
  GeneratorConfig generator;  // also supplies the oracle's generating parameters
  std::optional<std::filesystem::path> dataset;  // generated from `generator` when absent
  SplitSpec split;     // seed replaced per run
  TrainConfig train;   // seed replaced per run
  bool save_models = true;

  // Throws ConfigError.
  void validate() const;
};

void to_json(nlohmann::json& j, const ExperimentPlan& p);
void from_json(const nlohmann::json& j, ExperimentPlan& p);
// "generator" and "train" may be objects or paths of config files;
// relative paths resolve against the plan's directory.
ExperimentPlan read_experiment_plan(const std::filesystem::path& path);

// Distinct per-run seed derived from the plan seed.
std::uint64_t run_seed(std::uint64_t plan_seed, int run);

// log p(y = 1 | z) - log p(y = 0 | z) under the generating model, π
// integrated out: expands Π_m (1 + π (r_m - 1)) with r_m the component
// density ratio and takes Beta moments term by term.
double bayes_oracle_score(const ConceptVector& z, const GeneratorConfig& g);

// Test metrics of one method. NaN where a metric does not apply.
struct MethodMetrics {
  std::string method;
  double auc = 0.0;
  double objective = 0.0;  // mean log joint of the point estimates
  double f1_co = 0.0;
  double f1_all_positive = 0.0;
  bool f1_undefined = false;
  double r2_hr = 0.0;
  double r2_bp_sys = 0.0;
  double r2_bp_dias = 0.0;
  double mae_hr = 0.0;
  double mae_bp_sys = 0.0;
  double mae_bp_dias = 0.0;
  double spearman_co = 0.0;
  // Medians of inferred CO and R in the top and bottom risk quartiles.
  double co_top = 0.0;
  double co_bottom = 0.0;
  double r_top = 0.0;
  double r_bottom = 0.0;

  static MethodMetrics unavailable(std::string method);
};

// Risk and concept metrics of point estimates on a test set. `cohort` and
// `data` hold the same patients in the same order.
MethodMetrics evaluate_estimates(const std::string& method, const LpsModel& model, const PointEstimates& est,
                                 const Dataset& data, const Cohort& cohort);
// Risk-only metrics for classifiers without concepts.
MethodMetrics evaluate_scores(const std::string& method, const Vector& scores, const Vector& labels);

struct RunReport {
  int run = 0;
  std::uint64_t seed = 0;
  double oracle_auc = 0.0;
  double eta = 0.0;
  int best_epoch_vem = 0;
  int best_epoch_map = 0;
  int best_epoch_baseline = 0;
  Vector phi;           // trained mixture means, index 2m + i
  double elbo_first = 0.0;
  double elbo_last = 0.0;
  std::array<MethodMetrics, 3> methods;  // lps, lps_q, baseline
};

struct ExperimentReport {
  std::vector<RunReport> runs;
};

using LogSink = std::function<void(const std::string&)>;

// One run: split, scaler and priors on train, both LPS stages, baseline,
// test evaluation. With `out` the models, traces and test predictions go to
// out/run_<k>.
RunReport run_single(const ExperimentPlan& plan, const Cohort& cohort, int run,
                     const std::optional<std::filesystem::path>& out, const LogSink& log = {});

// All runs, plan.workers at a time. A failing run aborts with its index.
ExperimentReport run_experiment(const ExperimentPlan& plan, const Cohort& cohort,
                                const std::optional<std::filesystem::path>& out, const LogSink& log = {});

// The cohort a plan refers to.
Cohort load_plan_cohort(const ExperimentPlan& plan);

// per_run.csv, stage_one.csv, summary.csv (median and half-IQR) and
// significance.csv (Welch tests) in `dir`.
void write_report(const ExperimentReport& report, const std::filesystem::path& dir);

}  // namespace lps

#endif
