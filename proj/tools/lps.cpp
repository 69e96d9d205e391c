// Command-line front end: data generation, training, evaluation, the
// repeated-split experiment, per-patient explanations and figure tables.

#include <chrono>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>

#include "CLI11.hpp"
#include "json.hpp"

#include "lps/analysis.hpp"
#include "lps/csv.hpp"
#include "lps/experiment.hpp"
#include "lps/metrics.hpp"

namespace fs = std::filesystem;
using namespace lps;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kTraining = 3 };

void log_line(const std::string& s) { std::cerr << s << std::endl; }

TrainConfig load_train_config(const std::optional<fs::path>& path) {
  return path ? read_train_config(*path) : TrainConfig{};
}

void write_json(const nlohmann::json& j, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

// Train / validation / test partitions of a dataset file, recorded by id.
struct Partition {
  CohortSplits splits;
  SplitSpec spec;
};

Partition partition(const Cohort& cohort, std::uint64_t seed) {
  Partition p;
  p.spec.seed = seed;
  p.splits = split_cohort(cohort, p.spec);
  if (p.splits.train.empty() || p.splits.val.empty()) throw DataError("dataset too small to split");
  return p;
}

void write_partition(const Partition& p, const fs::path& path) {
  auto ids = [](const Cohort& c) {
    std::vector<std::int64_t> v;
    for (const auto& r : c) v.push_back(r.id);
    return v;
  };
  write_json({{"seed", p.spec.seed},
              {"train", ids(p.splits.train)},
              {"val", ids(p.splits.val)},
              {"test", ids(p.splits.test)}},
             path);
}

Cohort select_ids(const Cohort& cohort, const fs::path& split_file, const std::string& part) {
  std::ifstream in(split_file);
  if (!in) throw DataError("cannot open " + split_file.string());
  std::set<std::int64_t> keep;
  try {
    const nlohmann::json split = nlohmann::json::parse(in);
    for (const auto& id : split.at(part)) keep.insert(id.get<std::int64_t>());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(split_file.string() + ": " + e.what());
  }
  Cohort out;
  for (const auto& r : cohort)
    if (keep.count(r.id)) out.push_back(r);
  return out;
}

int cmd_gen(const fs::path& config, const fs::path& out, std::optional<std::uint64_t> seed,
            std::optional<std::int64_t> size) {
  GeneratorConfig cfg = read_generator_config(config);
  if (seed) cfg.seed = *seed;
  if (size) cfg.size = *size;
  cfg.validate();
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_cohort(generate_cohort(cfg), out);
  log_line("wrote " + std::to_string(cfg.size) + " patients to " + out.string());
  return kOk;
}

int cmd_train(const fs::path& dataset, const std::optional<fs::path>& config, const fs::path& out,
              std::optional<std::uint64_t> seed, std::optional<fs::path> generator) {
  TrainConfig cfg = load_train_config(config);
  if (seed) cfg.seed = *seed;
  const WindkesselConfig wk = generator ? read_generator_config(*generator).windkessel : WindkesselConfig{};
  const Cohort cohort = read_cohort(dataset);
  const Partition p = partition(cohort, cfg.seed);
  FeatureLayout layout;
  if (!cohort.empty()) layout = {int(cohort.front().tabular.size()), int(cohort.front().waveform.size())};
  const FeatureScaler scaler = FeatureScaler::fit(feature_matrix(p.splits.train, layout));
  const Dataset train = Dataset::from_cohort(p.splits.train, scaler, layout);
  const Dataset val = Dataset::from_cohort(p.splits.val, scaler, layout);

  LpsModel model = LpsModel::create(layout, scaler, fit_concept_priors(p.splits.train), cfg.arch, wk, cfg.seed);
  model.threshold = train.y.mean();
  auto progress = [](const char* stage) {
    return [stage](const EpochRecord& r) {
      if (r.epoch % 20 == 0 || r.epoch == 1)
        log_line(std::string(stage) + " epoch " + std::to_string(r.epoch) + " objective " + csv_number(r.objective) +
                 " val_auc " + csv_number(r.val_auc));
    };
  };
  const RunResult vem = train_variational_em(model, train, val, cfg, progress("stage one"));
  const RunResult map = train_map_network(model, train, val, cfg, progress("stage two"));
  fs::create_directories(out);
  write_model(model, out / "model.json");
  write_trace_csv(vem, out / "trace_stage_one.csv", true);
  write_trace_csv(map, out / "trace_stage_two.csv", false);
  write_partition(p, out / "split.json");
  log_line("checkpoints: stage one epoch " + std::to_string(vem.best_epoch) + ", stage two epoch " +
           std::to_string(map.best_epoch));
  return kOk;
}

int cmd_train_baseline(const fs::path& dataset, const std::optional<fs::path>& config, const fs::path& out,
                       std::optional<std::uint64_t> seed) {
  TrainConfig cfg = load_train_config(config);
  if (seed) cfg.seed = *seed;
  const Cohort cohort = read_cohort(dataset);
  const Partition p = partition(cohort, cfg.seed);
  FeatureLayout layout;
  if (!cohort.empty()) layout = {int(cohort.front().tabular.size()), int(cohort.front().waveform.size())};
  const FeatureScaler scaler = FeatureScaler::fit(feature_matrix(p.splits.train, layout));
  const Dataset train = Dataset::from_cohort(p.splits.train, scaler, layout);
  const Dataset val = Dataset::from_cohort(p.splits.val, scaler, layout);
  BaselineModel b = BaselineModel::create(layout, scaler, cfg.arch, train.y.mean(), cfg.seed);
  const RunResult run = train_baseline(b, train, val, cfg);
  fs::create_directories(out);
  write_baseline(b, out / "baseline.json");
  write_trace_csv(run, out / "trace_baseline.csv", false);
  if (!fs::exists(out / "split.json")) write_partition(p, out / "split.json");
  log_line("checkpoint epoch " + std::to_string(run.best_epoch));
  return kOk;
}

int cmd_eval(const fs::path& models, const fs::path& dataset, const fs::path& out, const std::string& subset) {
  Cohort cohort = read_cohort(dataset);
  if (subset != "all") cohort = select_ids(cohort, models / "split.json", subset);
  if (cohort.empty()) throw DataError("no patients to evaluate");
  const bool has_lps = fs::exists(models / "model.json");
  const bool has_base = fs::exists(models / "baseline.json");
  if (!has_lps && !has_base) throw DataError("no model.json or baseline.json in " + models.string());

  std::vector<MethodMetrics> rows;
  if (has_lps) {
    const LpsModel m = read_model(models / "model.json");
    const Dataset d = Dataset::from_cohort(cohort, m.scaler, m.layout);
    rows.push_back(evaluate_estimates("lps", m, lps_inference(m, d.x), d, cohort));
    rows.push_back(evaluate_estimates("lps_q", m, lps_q_inference(m, d.x), d, cohort));
  }
  if (has_base) {
    const BaselineModel b = read_baseline(models / "baseline.json");
    const Dataset d = Dataset::from_cohort(cohort, b.scaler, b.layout);
    rows.push_back(evaluate_scores("baseline", b.predict_proba(d.x), d.y));
  }
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  CsvWriter csv(out);
  csv.row({"method", "metric", "value"});
  for (const MethodMetrics& m : rows) {
    const std::pair<const char*, double> cells[] = {
        {"auc", m.auc},           {"objective", m.objective}, {"f1_co", m.f1_co},
        {"f1_all_positive", m.f1_all_positive}, {"r2_hr", m.r2_hr}, {"r2_bp_sys", m.r2_bp_sys},
        {"r2_bp_dias", m.r2_bp_dias}, {"mae_hr", m.mae_hr}, {"mae_bp_sys", m.mae_bp_sys},
        {"mae_bp_dias", m.mae_bp_dias}, {"spearman_co", m.spearman_co}, {"co_top", m.co_top},
        {"co_bottom", m.co_bottom}, {"r_top", m.r_top}, {"r_bottom", m.r_bottom}};
    for (const auto& [name, v] : cells)
      if (!std::isnan(v)) csv.row({m.method, name, csv_number(v)});
    if (!std::isnan(m.f1_co)) csv.row({m.method, "f1_undefined", m.f1_undefined ? "1" : "0"});
  }
  return kOk;
}

int cmd_experiment(const fs::path& plan_path, const fs::path& out, std::optional<std::uint64_t> seed,
                   std::optional<int> workers, std::optional<int> runs) {
  ExperimentPlan plan = read_experiment_plan(plan_path);
  if (seed) plan.seed = *seed;
  if (workers) plan.workers = *workers;
  if (runs) plan.runs = *runs;
  plan.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const Cohort cohort = load_plan_cohort(plan);
  const ExperimentReport report = run_experiment(plan, cohort, out, log_line);
  write_report(report, out);
  write_json(plan, out / "plan.json");
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  log_line("experiment finished: " + std::to_string(plan.runs) + " runs in " + csv_number(secs) + " s");
  return kOk;
}

int cmd_explain(const fs::path& model_dir, const fs::path& dataset, std::int64_t id, const fs::path& out,
                const std::optional<fs::path>& ranges_path, const std::optional<fs::path>& generator, int steps) {
  const Cohort cohort = read_cohort(dataset);
  const auto it = std::find_if(cohort.begin(), cohort.end(), [&](const auto& r) { return r.id == id; });
  if (it == cohort.end()) throw DataError("patient " + std::to_string(id) + " not in " + dataset.string());
  const LpsModel model = read_model(model_dir / "model.json");
  NormalRanges ranges = default_normal_ranges(generator ? read_generator_config(*generator) : GeneratorConfig{});
  if (ranges_path) ranges = read_normal_ranges(*ranges_path, ranges);
  std::optional<BaselineModel> baseline;
  if (fs::exists(model_dir / "baseline.json")) baseline = read_baseline(model_dir / "baseline.json");
  write_json(explain_patient(model, *it, ranges, baseline ? &*baseline : nullptr, steps), out);
  return kOk;
}

int cmd_report(const fs::path& in, const fs::path& out, int bins) {
  const int n = write_figure_tables(in, out, bins);
  log_line("figure tables from " + std::to_string(n) + " runs written to " + out.string());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Latent probabilistic risk model with physiological supporting evidence"};
  app.require_subcommand(1);

  fs::path config, out, dataset, models, plan, in, model_dir;
  std::optional<fs::path> train_config, ranges, generator;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> size;
  std::optional<int> workers, runs;
  std::int64_t patient = 0;
  std::string subset = "all";
  int steps = 256, bins = 20;

  auto* gen = app.add_subcommand("gen", "Generate a synthetic cohort");
  gen->add_option("--config", config, "Generator config (JSON)")->required()->check(CLI::ExistingFile);
  gen->add_option("--out", out, "Output dataset (one JSON record per line)")->required();
  gen->add_option("--seed", seed, "Overrides the config seed");
  gen->add_option("--size", size, "Overrides the cohort size");

  auto* train = app.add_subcommand("train", "Train both LPS stages");
  train->add_option("--dataset", dataset, "Dataset file")->required();
  train->add_option("--config", train_config, "Training config (JSON)")->check(CLI::ExistingFile);
  train->add_option("--out", out, "Model directory")->required();
  train->add_option("--seed", seed, "Overrides the config seed (also the split seed)");
  train->add_option("--generator", generator, "Generator config supplying the Windkessel settings")
      ->check(CLI::ExistingFile);

  auto* base = app.add_subcommand("train-baseline", "Train the baseline classifier");
  base->add_option("--dataset", dataset, "Dataset file")->required();
  base->add_option("--config", train_config, "Training config (JSON)")->check(CLI::ExistingFile);
  base->add_option("--out", out, "Model directory")->required();
  base->add_option("--seed", seed, "Overrides the config seed (also the split seed)");

  auto* eval = app.add_subcommand("eval", "Evaluate trained models on a dataset");
  eval->add_option("--models", models, "Model directory")->required();
  eval->add_option("--dataset", dataset, "Dataset file")->required();
  eval->add_option("--out", out, "Report CSV")->required();
  eval->add_option("--subset", subset, "all, or a partition recorded in split.json")
      ->check(CLI::IsMember({"all", "train", "val", "test"}));

  auto* exp = app.add_subcommand("experiment", "Run the repeated-split protocol");
  exp->add_option("--plan", plan, "Experiment plan (JSON)")->required()->check(CLI::ExistingFile);
  exp->add_option("--out", out, "Output directory")->required();
  exp->add_option("--seed", seed, "Overrides the plan seed");
  exp->add_option("--workers", workers, "Parallel runs")->check(CLI::PositiveNumber);
  exp->add_option("--runs", runs, "Overrides the number of runs")->check(CLI::PositiveNumber);

  auto* explain = app.add_subcommand("explain", "Evidence and attributions for one patient");
  explain->add_option("--model", model_dir, "Model directory")->required();
  explain->add_option("--dataset", dataset, "Dataset file")->required();
  explain->add_option("--patient", patient, "Patient id")->required();
  explain->add_option("--out", out, "Output JSON")->required();
  explain->add_option("--ranges", ranges, "Normal ranges (JSON)");
  explain->add_option("--generator", generator, "Generator config for the default ranges")->check(CLI::ExistingFile);
  explain->add_option("--steps", steps, "Integrated Gradients steps")->check(CLI::PositiveNumber);

  auto* report = app.add_subcommand("report", "Plot-ready tables from an experiment directory");
  report->add_option("--in", in, "Experiment output directory")->required();
  report->add_option("--out", out, "Output directory")->required();
  report->add_option("--bins", bins, "Histogram bins")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*gen) return cmd_gen(config, out, seed, size);
    if (*train) return cmd_train(dataset, train_config, out, seed, generator);
    if (*base) return cmd_train_baseline(dataset, train_config, out, seed);
    if (*eval) return cmd_eval(models, dataset, out, subset);
    if (*exp) return cmd_experiment(plan, out, seed, workers, runs);
    if (*explain) return cmd_explain(model_dir, dataset, patient, out, ranges, generator, steps);
    if (*report) return cmd_report(in, out, bins);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kUsage;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const MetricError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const TrainingError& e) {
    std::cerr << "training error: " << e.what() << '\n';
    return kTraining;
  } catch (const InferenceError& e) {
    std::cerr << "training error: " << e.what() << '\n';
    return kTraining;
  } catch (const DomainError& e) {
    std::cerr << "training error: " << e.what() << '\n';
    return kTraining;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  }
  return kUsage;
}
