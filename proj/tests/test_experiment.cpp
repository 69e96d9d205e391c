#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "doctest.h"
#include "lps/analysis.hpp"
#include "lps/experiment.hpp"
#include "lps/special.hpp"

using namespace lps;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int count_lines(const fs::path& p) {
  std::ifstream in(p);
  int n = 0;
  for (std::string line; std::getline(in, line);) ++n;
  return n;
}

ExperimentPlan tiny_plan() {
  ExperimentPlan plan;
  plan.runs = 2;
  plan.seed = 17;
  plan.workers = 2;
  plan.generator.size = 300;
  plan.generator.seed = 4;
  plan.train.epochs = 2;
  plan.train.warmup_epochs = 1;
  plan.train.arch = {{16}, {8}};
  return plan;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("lps_test_experiment_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("oracle score matches direct integration over the risk") {
  // log ∫ π Beta(π) Π_m mix_m(π) dπ - log ∫ (1 - π) Beta(π) Π_m mix_m(π) dπ
  const GeneratorConfig g;
  boost::math::quadrature::tanh_sinh<double> q;
  std::mt19937_64 rng(3);
  for (int k = 0; k < 20; ++k) {
    ConceptVector z;
    for (int m = 0; m < 5; ++m) {
      const auto& mix = g.mixtures[std::size_t(m)];
      const bool high = k % 3 == 0;
      std::normal_distribution<double> n(high ? mix.high.mu : mix.low.mu, std::sqrt(mix.low.var) * 1.5);
      z[std::size_t(m)] = std::exp(n(rng));
    }
    auto joint = [&](double pi) {
      double log_mix = 0.0;
      for (int m = 0; m < 5; ++m) log_mix += mixture_logpdf(z[std::size_t(m)], pi, g.mixtures[std::size_t(m)]);
      return std::exp(log_mix + (g.alpha - 1.0) * std::log(pi) + (g.beta - 1.0) * std::log1p(-pi));
    };
    const double p1 = q.integrate([&](double pi) { return pi * joint(pi); }, 0.0, 1.0);
    const double p0 = q.integrate([&](double pi) { return (1.0 - pi) * joint(pi); }, 0.0, 1.0);
    CHECK(bayes_oracle_score(z, g) == doctest::Approx(std::log(p1 / p0)).epsilon(1e-9));
  }
}

TEST_CASE("run seeds are distinct and stable") {
  std::set<std::uint64_t> seen;
  for (int r = 0; r < 50; ++r) seen.insert(run_seed(2024, r));
  CHECK(seen.size() == 50);
  CHECK(run_seed(2024, 3) == run_seed(2024, 3));
  CHECK(run_seed(2024, 3) != run_seed(2025, 3));
}

TEST_CASE("plan json round trip and file references") {
  ExperimentPlan plan = tiny_plan();
  plan.dataset = "cohort.jsonl";
  const ExperimentPlan back = nlohmann::json(plan).get<ExperimentPlan>();
  CHECK(back.runs == 2);
  CHECK(back.seed == 17);
  CHECK(back.workers == 2);
  CHECK(back.generator.size == 300);
  CHECK(back.train.epochs == 2);
  CHECK(back.dataset == plan.dataset);

  const fs::path dir = scratch("plan");
  fs::create_directories(dir);
  write_generator_config(plan.generator, dir / "gen.json");
  std::ofstream(dir / "plan.json") << R"({"runs": 3, "generator": "gen.json", "dataset": "data.jsonl"})";
  const ExperimentPlan read = read_experiment_plan(dir / "plan.json");
  CHECK(read.runs == 3);
  CHECK(read.generator.size == 300);
  CHECK(*read.dataset == dir / "data.jsonl");
  std::ofstream(dir / "bad.json") << R"({"runs": 0})";
  CHECK_THROWS_AS(read_experiment_plan(dir / "bad.json"), ConfigError);
  std::ofstream(dir / "broken.json") << "{";
  CHECK_THROWS_AS(read_experiment_plan(dir / "broken.json"), DataError);
}

TEST_CASE("estimate metrics on known concepts") {
  GeneratorConfig g;
  g.size = 400;
  g.seed = 9;
  g.bp_noise = g.hr_noise = 0.0;
  const Cohort cohort = generate_cohort(g);
  const FeatureLayout layout;
  const FeatureScaler scaler = FeatureScaler::fit(feature_matrix(cohort, layout));
  const Dataset d = Dataset::from_cohort(cohort, scaler, layout);
  const LpsModel model = LpsModel::create(layout, scaler, fit_concept_priors(cohort), Architecture{}, g.windkessel, 1);
  // True concepts and risks as estimates: noiseless vitals are reproduced.
  PointEstimates est;
  est.pi.resize(d.size());
  est.z.resize(d.size(), 5);
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    est.pi(i) = cohort[std::size_t(i)].true_pi;
    for (int c = 0; c < 5; ++c) est.z(i, c) = cohort[std::size_t(i)].true_z[std::size_t(c)];
  }
  const MethodMetrics m = evaluate_estimates("truth", model, est, d, cohort);
  CHECK(m.r2_hr == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(m.r2_bp_sys == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(m.mae_bp_dias < 1e-6);
  CHECK(m.f1_co == 1.0);
  CHECK(m.spearman_co == doctest::Approx(1.0));
  CHECK(m.f1_all_positive < 1.0);
  CHECK(m.co_top < m.co_bottom);  // high risk, low CO
  CHECK(m.r_top > m.r_bottom);
  CHECK(std::isfinite(m.objective));
  const MethodMetrics s = evaluate_scores("scores", est.pi, d.y);
  CHECK(s.auc > 0.6);
  CHECK(std::isnan(s.r2_hr));
}

TEST_CASE("experiment report layout, determinism and figure tables") {
  const ExperimentPlan plan = tiny_plan();
  const Cohort cohort = load_plan_cohort(plan);
  const fs::path a = scratch("a"), b = scratch("b");
  write_report(run_experiment(plan, cohort, a), a);
  ExperimentPlan serial = plan;
  serial.workers = 1;
  write_report(run_experiment(serial, cohort, b), b);
  for (const char* f : {"per_run.csv", "summary.csv", "significance.csv", "stage_one.csv"}) {
    CAPTURE(f);
    REQUIRE(fs::exists(a / f));
    CHECK(slurp(a / f) == slurp(b / f));
  }
  CHECK(slurp(a / "run_1" / "predictions.csv") == slurp(b / "run_1" / "predictions.csv"));
  CHECK(count_lines(a / "per_run.csv") == 1 + 2 * 3);
  CHECK(count_lines(a / "stage_one.csv") == 1 + 2);
  for (const char* f : {"model.json", "baseline.json", "trace_stage_one.csv", "trace_stage_two.csv",
                        "trace_baseline.csv", "predictions.csv"})
    CHECK(fs::exists(a / "run_0" / f));
  CHECK(count_lines(a / "run_0" / "trace_stage_one.csv") == 1 + 2);

  const fs::path figs = scratch("figs");
  CHECK(write_figure_tables(a, figs, 10) == 2);
  CHECK(count_lines(figs / "fig4_quartiles.csv") == 1 + 2 * 4);
  CHECK(count_lines(figs / "fig4_histograms.csv") == 1 + 5 * 2 * 2 * 10);
  CHECK(count_lines(figs / "fig3_scatter.csv") > 1);
  CHECK_THROWS_AS(write_figure_tables(scratch("empty"), figs), DataError);

  // Explanation of one test patient.
  const LpsModel model = read_model(a / "run_0" / "model.json");
  const BaselineModel base = read_baseline(a / "run_0" / "baseline.json");
  const nlohmann::json e = explain_patient(model, cohort[5], default_normal_ranges(plan.generator), &base, 256);
  CHECK(e.at("concepts").size() == 5);
  CHECK(e.at("baseline").at("attributions").size() == std::size_t(model.layout.total()));
  const double gap = e.at("baseline").at("probability").get<double>() -
                     e.at("baseline").at("reference_probability").get<double>();
  CHECK(std::abs(e.at("baseline").at("attribution_sum").get<double>() - gap) <= 0.01 * std::abs(gap) + 1e-12);
  const int cls = e.at("risk").at("predicted_class");
  CHECK(cls == classify(e.at("risk").at("pi").get<double>(), e.at("risk").at("eta").get<double>()));
}

TEST_CASE("normal ranges") {
  const NormalRanges r = default_normal_ranges();
  CHECK(r[4].low == 4.0);
  CHECK(std::isinf(r[4].high));
  CHECK(r[0].low < 1000.0);
  CHECK(r[0].high > 1000.0);
  CHECK(range_flag(3.5, r[4]) == "low");
  CHECK(range_flag(5.0, r[4]) == "normal");
  CHECK(range_flag(5000.0, r[0]) == "high");
  const fs::path dir = scratch("ranges");
  fs::create_directories(dir);
  std::ofstream(dir / "r.json") << R"({"CO": [3.5, null], "R": [800, 1200]})";
  const NormalRanges custom = read_normal_ranges(dir / "r.json", r);
  CHECK(custom[4].low == 3.5);
  CHECK(custom[0].high == 1200.0);
  CHECK(custom[1].low == r[1].low);
  std::ofstream(dir / "bad.json") << R"({"CO": [5, 4]})";
  CHECK_THROWS_AS(read_normal_ranges(dir / "bad.json", r), DataError);
  CHECK(feature_names(FeatureLayout{}).size() == 71);
}
