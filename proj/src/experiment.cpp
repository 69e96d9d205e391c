#include "lps/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <numeric>
#include <random>
#include <thread>

#include "lps/csv.hpp"
#include "lps/metrics.hpp"

namespace lps {

using nlohmann::json;

namespace {

constexpr int kCo = 4;
constexpr int kR = 0;

std::span<const double> as_span(const Vector& v) { return {v.data(), std::size_t(v.size())}; }

double nan() { return std::nan(""); }

}  // namespace

// Plan ------------------------------------------------------------------------------

void ExperimentPlan::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("experiment plan: " + msg); };
  if (runs < 1) fail("runs must be >= 1");
  if (workers < 1) fail("workers must be >= 1");
  if (split.train <= 0.0 || split.val <= 0.0 || split.test <= 0.0 ||
      std::abs(split.train + split.val + split.test - 1.0) > 1e-9)
    fail("split fractions must be positive and sum to 1");
  generator.validate();
  train.validate();
}

void to_json(json& j, const ExperimentPlan& p) {
  j = json{{"runs", p.runs},
           {"seed", p.seed},
           {"workers", p.workers},
           {"generator", p.generator},
           {"split", {{"train", p.split.train}, {"val", p.split.val}, {"test", p.split.test}}},
           {"train", p.train},
           {"save_models", p.save_models}};
  if (p.dataset) j["dataset"] = p.dataset->string();
}

void from_json(const json& j, ExperimentPlan& p) {
  auto read = [&](const char* key, auto& out) {
    if (j.contains(key)) out = j.at(key).get<std::decay_t<decltype(out)>>();
  };
  read("runs", p.runs);
  read("seed", p.seed);
  read("workers", p.workers);
  read("save_models", p.save_models);
  if (j.contains("generator") && j.at("generator").is_object()) p.generator = j.at("generator").get<GeneratorConfig>();
  if (j.contains("split")) {
    const json& s = j.at("split");
    p.split.train = s.value("train", p.split.train);
    p.split.val = s.value("val", p.split.val);
    p.split.test = s.value("test", p.split.test);
  }
  if (j.contains("train") && j.at("train").is_object()) p.train = j.at("train").get<TrainConfig>();
  if (j.contains("dataset")) p.dataset = std::filesystem::path(j.at("dataset").get<std::string>());
}

ExperimentPlan read_experiment_plan(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open experiment plan " + path.string());
  ExperimentPlan plan;
  const std::filesystem::path base = path.parent_path();
  auto resolve = [&](const std::filesystem::path& p) { return p.is_relative() ? base / p : p; };
  try {
    const json j = json::parse(in);
    plan = j.get<ExperimentPlan>();
    if (j.contains("generator") && j.at("generator").is_string())
      plan.generator = read_generator_config(resolve(j.at("generator").get<std::string>()));
    if (j.contains("train") && j.at("train").is_string())
      plan.train = read_train_config(resolve(j.at("train").get<std::string>()));
  } catch (const json::exception& e) {
    throw DataError("experiment plan " + path.string() + ": " + e.what());
  }
  if (plan.dataset) plan.dataset = resolve(*plan.dataset);
  plan.validate();
  return plan;
}

std::uint64_t run_seed(std::uint64_t plan_seed, int run) {
  std::seed_seq seq{plan_seed, std::uint64_t(run), std::uint64_t(0x5eed)};
  std::array<std::uint32_t, 2> words{};
  seq.generate(words.begin(), words.end());
  return (std::uint64_t(words[0]) << 32) | words[1];
}

// Oracle ----------------------------------------------------------------------------

double bayes_oracle_score(const ConceptVector& z, const GeneratorConfig& g) {
  // Π_m (π h_m + (1 - π) l_m) = Π_m l_m · Σ_k c_k π^k; the Π l_m factor cancels.
  std::vector<double> c{1.0};
  for (int m = 0; m < 5; ++m) {
    const double r = std::exp(lognormal_logpdf(z[m], g.mixtures[m].high) - lognormal_logpdf(z[m], g.mixtures[m].low));
    std::vector<double> next(c.size() + 1, 0.0);
    for (std::size_t k = 0; k < c.size(); ++k) {
      next[k] += c[k];
      next[k + 1] += c[k] * (r - 1.0);
    }
    c = std::move(next);
  }
  // E_{Beta(a, b)}[π^k] = Π_{j<k} (a + j) / (a + b + j)
  auto expect = [&](double a, double b) {
    double s = 0.0, moment = 1.0;
    for (std::size_t k = 0; k < c.size(); ++k) {
      s += c[k] * moment;
      moment *= (a + double(k)) / (a + b + double(k));
    }
    return s;
  };
  // p(y = 1, z) ∝ B(α + 1, β) E_{Beta(α+1, β)}[...], the Beta functions give α / β.
  return std::log(g.alpha / g.beta) + std::log(expect(g.alpha + 1.0, g.beta)) - std::log(expect(g.alpha, g.beta + 1.0));
}

// Evaluation ------------------------------------------------------------------------

MethodMetrics MethodMetrics::unavailable(std::string method) {
  MethodMetrics m;
  m.method = std::move(method);
  for (double* v : {&m.auc, &m.objective, &m.f1_co, &m.f1_all_positive, &m.r2_hr, &m.r2_bp_sys, &m.r2_bp_dias,
                    &m.mae_hr, &m.mae_bp_sys, &m.mae_bp_dias, &m.spearman_co, &m.co_top, &m.co_bottom, &m.r_top,
                    &m.r_bottom})
    *v = nan();
  return m;
}

MethodMetrics evaluate_scores(const std::string& method, const Vector& scores, const Vector& labels) {
  MethodMetrics m = MethodMetrics::unavailable(method);
  m.auc = auc(as_span(scores), as_span(labels));
  return m;
}

MethodMetrics evaluate_estimates(const std::string& method, const LpsModel& model, const PointEstimates& est,
                                 const Dataset& data, const Cohort& cohort) {
  if (std::size_t(data.size()) != cohort.size() || est.pi.size() != data.size())
    throw UsageError("evaluate_estimates: estimates, data and cohort differ in size");
  MethodMetrics m = evaluate_scores(method, est.pi, data.y);
  m.objective = mean_log_joint(model, est, data);

  // CO against the revealed values.
  std::vector<double> co_hat, co_true;
  for (std::size_t i = 0; i < cohort.size(); ++i)
    if (cohort[i].cardiac_output) {
      co_hat.push_back(est.z(Eigen::Index(i), kCo));
      co_true.push_back(*cohort[i].cardiac_output);
    }
  if (co_true.size() >= 2) {
    const F1Result f1 = f1_thresholded_co(co_hat, co_true);
    m.f1_co = f1.f1;
    m.f1_undefined = f1.undefined;
    m.f1_all_positive = f1_all_positive(co_true);
    m.spearman_co = spearman(co_hat, co_true);
  }

  // Vitals rebuilt through the Windkessel model against the observed ones.
  const VitalsColumns rebuilt = reconstruct_vitals(est.z, model.windkessel);
  std::vector<double> hr, sys, dias;
  for (const PatientRecord& r : cohort) {
    hr.push_back(r.vitals.hr);
    sys.push_back(r.vitals.bp_sys);
    dias.push_back(r.vitals.bp_dias);
  }
  m.r2_hr = r_squared(hr, rebuilt.hr);
  m.r2_bp_sys = r_squared(sys, rebuilt.bp_sys);
  m.r2_bp_dias = r_squared(dias, rebuilt.bp_dias);
  m.mae_hr = median_abs_error(hr, rebuilt.hr);
  m.mae_bp_sys = median_abs_error(sys, rebuilt.bp_sys);
  m.mae_bp_dias = median_abs_error(dias, rebuilt.bp_dias);

  // Risk quartiles by π̂; ties broken by position so the split is stable.
  std::vector<Eigen::Index> order(std::size_t(data.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return est.pi(a) < est.pi(b); });
  const std::size_t q = order.size() / 4;
  if (q > 0) {
    auto med = [&](std::size_t from, int col) {
      std::vector<double> v;
      for (std::size_t k = from; k < from + q; ++k) v.push_back(est.z(order[k], col));
      return median(v);
    };
    m.co_bottom = med(0, kCo);
    m.co_top = med(order.size() - q, kCo);
    m.r_bottom = med(0, kR);
    m.r_top = med(order.size() - q, kR);
  }
  return m;
}

// Runs ------------------------------------------------------------------------------

namespace {

void write_predictions(const std::filesystem::path& path, const Cohort& test, const GeneratorConfig& g,
                       const PointEstimates& lps, const PointEstimates& lps_q, const Vector& baseline,
                       const WindkesselConfig& wk) {
  const VitalsColumns rebuilt = reconstruct_vitals(lps.z, wk);
  CsvWriter csv(path);
  std::vector<std::string> header{"id", "y", "true_pi", "oracle", "pi_lps", "pi_lps_q", "p_baseline"};
  for (const char* prefix : {"lps_", "lps_q_", "true_"})
    for (const char* c : kConceptNames) header.push_back(std::string(prefix) + c);
  header.insert(header.end(), {"co_observed", "r_observed", "hr", "bp_sys", "bp_dias", "hr_lps", "bp_sys_lps",
                               "bp_dias_lps"});
  csv.row(header);
  auto opt = [](const std::optional<double>& v) { return v ? csv_number(*v) : std::string(); };
  for (std::size_t i = 0; i < test.size(); ++i) {
    const PatientRecord& r = test[i];
    const auto k = Eigen::Index(i);
    std::vector<std::string> row{std::to_string(r.id),         std::to_string(r.outcome),
                                 csv_number(r.true_pi),        csv_number(bayes_oracle_score(r.true_z, g)),
                                 csv_number(lps.pi(k)),        csv_number(lps_q.pi(k)),
                                 csv_number(baseline(k))};
    for (int c = 0; c < 5; ++c) row.push_back(csv_number(lps.z(k, c)));
    for (int c = 0; c < 5; ++c) row.push_back(csv_number(lps_q.z(k, c)));
    for (int c = 0; c < 5; ++c) row.push_back(csv_number(r.true_z[std::size_t(c)]));
    row.insert(row.end(), {opt(r.cardiac_output), opt(r.resistance), csv_number(r.vitals.hr),
                           csv_number(r.vitals.bp_sys), csv_number(r.vitals.bp_dias), csv_number(rebuilt.hr[i]),
                           csv_number(rebuilt.bp_sys[i]), csv_number(rebuilt.bp_dias[i])});
    csv.row(row);
  }
}

}  // namespace

RunReport run_single(const ExperimentPlan& plan, const Cohort& cohort, int run,
                     const std::optional<std::filesystem::path>& out, const LogSink& log) {
  RunReport rep;
  rep.run = run;
  rep.seed = run_seed(plan.seed, run);

  SplitSpec split = plan.split;
  split.seed = rep.seed;
  const CohortSplits sp = split_cohort(cohort, split);
  TrainConfig cfg = plan.train;
  cfg.seed = rep.seed;

  const FeatureLayout layout{plan.generator.tabular_dim, plan.generator.waveform_dim};
  const FeatureScaler scaler = FeatureScaler::fit(feature_matrix(sp.train, layout));
  const Dataset train = Dataset::from_cohort(sp.train, scaler, layout);
  const Dataset val = Dataset::from_cohort(sp.val, scaler, layout);
  const Dataset test = Dataset::from_cohort(sp.test, scaler, layout);

  auto say = [&](const std::string& s) {
    if (log) log("run " + std::to_string(run) + ": " + s);
  };

  LpsModel model =
      LpsModel::create(layout, scaler, fit_concept_priors(sp.train), cfg.arch, plan.generator.windkessel, rep.seed);
  model.threshold = train.y.mean();
  rep.eta = model.threshold;
  const RunResult vem = train_variational_em(model, train, val, cfg);
  say("stage one done, checkpoint epoch " + std::to_string(vem.best_epoch));
  const RunResult map = train_map_network(model, train, val, cfg);
  say("stage two done, checkpoint epoch " + std::to_string(map.best_epoch));
  BaselineModel baseline = BaselineModel::create(layout, scaler, cfg.arch, train.y.mean(), rep.seed);
  const RunResult base = train_baseline(baseline, train, val, cfg);
  say("baseline done, checkpoint epoch " + std::to_string(base.best_epoch));

  rep.best_epoch_vem = vem.best_epoch;
  rep.best_epoch_map = map.best_epoch;
  rep.best_epoch_baseline = base.best_epoch;
  rep.phi = model.priors.means;
  rep.elbo_first = vem.trace.front().elbo;
  rep.elbo_last = vem.trace.back().elbo;

  Vector oracle(test.size());
  for (Eigen::Index i = 0; i < test.size(); ++i) oracle(i) = bayes_oracle_score(sp.test[std::size_t(i)].true_z, plan.generator);
  rep.oracle_auc = auc(as_span(oracle), as_span(test.y));

  const PointEstimates lps = lps_inference(model, test.x);
  const PointEstimates lps_q = lps_q_inference(model, test.x);
  const Vector p_base = baseline.predict_proba(test.x);
  rep.methods = {evaluate_estimates("lps", model, lps, test, sp.test),
                 evaluate_estimates("lps_q", model, lps_q, test, sp.test),
                 evaluate_scores("baseline", p_base, test.y)};

  if (out) {
    const std::filesystem::path dir = *out / ("run_" + std::to_string(run));
    std::filesystem::create_directories(dir);
    if (plan.save_models) {
      write_model(model, dir / "model.json");
      write_baseline(baseline, dir / "baseline.json");
    }
    write_trace_csv(vem, dir / "trace_stage_one.csv", true);
    write_trace_csv(map, dir / "trace_stage_two.csv", false);
    write_trace_csv(base, dir / "trace_baseline.csv", false);
    write_predictions(dir / "predictions.csv", sp.test, plan.generator, lps, lps_q, p_base, model.windkessel);
  }
  return rep;
}

Cohort load_plan_cohort(const ExperimentPlan& plan) {
  return plan.dataset ? read_cohort(*plan.dataset) : generate_cohort(plan.generator);
}

ExperimentReport run_experiment(const ExperimentPlan& plan, const Cohort& cohort,
                                const std::optional<std::filesystem::path>& out, const LogSink& log) {
  plan.validate();
  if (out) std::filesystem::create_directories(*out);
  std::mutex log_mutex;
  LogSink sink;
  if (log)
    sink = [&](const std::string& s) {
      std::lock_guard lock(log_mutex);
      log(s);
    };

  ExperimentReport report;
  report.runs.resize(std::size_t(plan.runs));
  std::vector<std::exception_ptr> errors(std::size_t(plan.runs));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int r = next++; r < plan.runs; r = next++) {
      try {
        report.runs[std::size_t(r)] = run_single(plan, cohort, r, out, sink);
      } catch (...) {
        errors[std::size_t(r)] = std::current_exception();
      }
    }
  };
  const int n = std::min(plan.workers, plan.runs);
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < n; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (int r = 0; r < plan.runs; ++r) {
    if (!errors[std::size_t(r)]) continue;
    const std::string where = "run " + std::to_string(r) + ": ";
    try {
      std::rethrow_exception(errors[std::size_t(r)]);
    } catch (const TrainingError& e) {
      throw TrainingError(where + e.what());
    } catch (const DataError& e) {
      throw DataError(where + e.what());
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    } catch (const MetricError& e) {
      throw DataError(where + e.what());
    } catch (const std::exception& e) {
      throw TrainingError(where + e.what());
    }
  }
  return report;
}

// Report ----------------------------------------------------------------------------

namespace {

using Field = double MethodMetrics::*;

struct Column {
  const char* name;
  Field field;
};

constexpr Column kColumns[] = {
    {"auc", &MethodMetrics::auc},
    {"objective", &MethodMetrics::objective},
    {"f1_co", &MethodMetrics::f1_co},
    {"f1_all_positive", &MethodMetrics::f1_all_positive},
    {"r2_hr", &MethodMetrics::r2_hr},
    {"r2_bp_sys", &MethodMetrics::r2_bp_sys},
    {"r2_bp_dias", &MethodMetrics::r2_bp_dias},
    {"mae_hr", &MethodMetrics::mae_hr},
    {"mae_bp_sys", &MethodMetrics::mae_bp_sys},
    {"mae_bp_dias", &MethodMetrics::mae_bp_dias},
    {"spearman_co", &MethodMetrics::spearman_co},
    {"co_top", &MethodMetrics::co_top},
    {"co_bottom", &MethodMetrics::co_bottom},
    {"r_top", &MethodMetrics::r_top},
    {"r_bottom", &MethodMetrics::r_bottom},
};

std::vector<double> collect(const ExperimentReport& rep, std::size_t method, Field f) {
  std::vector<double> v;
  for (const RunReport& r : rep.runs) v.push_back(r.methods[method].*f);
  return v;
}

bool all_finite(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

void write_report(const ExperimentReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    CsvWriter csv(dir / "per_run.csv");
    std::vector<std::string> header{"run", "method", "oracle_auc", "checkpoint_epoch"};
    for (const Column& c : kColumns) header.push_back(c.name);
    header.push_back("f1_undefined");
    csv.row(header);
    for (const RunReport& r : report.runs)
      for (std::size_t k = 0; k < r.methods.size(); ++k) {
        const MethodMetrics& m = r.methods[k];
        const int epoch = k == 0 ? r.best_epoch_map : k == 1 ? r.best_epoch_vem : r.best_epoch_baseline;
        std::vector<std::string> row{std::to_string(r.run), m.method, csv_number(r.oracle_auc), std::to_string(epoch)};
        for (const Column& c : kColumns) row.push_back(csv_number(m.*c.field));
        row.push_back(m.f1_undefined ? "1" : "0");
        csv.row(row);
      }
  }
  {
    CsvWriter csv(dir / "stage_one.csv");
    std::vector<std::string> header{"run", "seed", "eta", "elbo_first", "elbo_last"};
    for (int m = 0; m < 5; ++m)
      for (int i = 0; i < 2; ++i) header.push_back(std::string("mu_") + kConceptNames[m] + "_" + std::to_string(i));
    csv.row(header);
    for (const RunReport& r : report.runs) {
      std::vector<std::string> row{std::to_string(r.run), std::to_string(r.seed), csv_number(r.eta),
                                   csv_number(r.elbo_first), csv_number(r.elbo_last)};
      for (double v : r.phi) row.push_back(csv_number(v));
      csv.row(row);
    }
  }
  if (report.runs.empty()) return;
  const std::size_t n_methods = report.runs.front().methods.size();
  {
    CsvWriter csv(dir / "summary.csv");
    csv.row({"method", "metric", "median", "half_iqr", "n"});
    std::vector<double> oracle;
    for (const RunReport& r : report.runs) oracle.push_back(r.oracle_auc);
    const Spread o = median_half_iqr(oracle);
    csv.row({"oracle", "auc", csv_number(o.median), csv_number(o.half_iqr), std::to_string(oracle.size())});
    for (std::size_t k = 0; k < n_methods; ++k)
      for (const Column& c : kColumns) {
        const std::vector<double> v = collect(report, k, c.field);
        if (!all_finite(v)) continue;
        const Spread s = median_half_iqr(v);
        csv.row({report.runs.front().methods[k].method, c.name, csv_number(s.median), csv_number(s.half_iqr),
                 std::to_string(v.size())});
      }
  }
  {
    CsvWriter csv(dir / "significance.csv");
    csv.row({"metric", "method_a", "method_b", "t", "dof", "p"});
    for (std::size_t a = 0; a < n_methods; ++a)
      for (std::size_t b = a + 1; b < n_methods; ++b)
        for (const Column& c : kColumns) {
          const std::vector<double> va = collect(report, a, c.field), vb = collect(report, b, c.field);
          if (!all_finite(va) || !all_finite(vb)) continue;
          std::vector<std::string> row{c.name, report.runs.front().methods[a].method,
                                       report.runs.front().methods[b].method};
          try {
            const WelchResult w = welch_t_test(va, vb);
            row.insert(row.end(), {csv_number(w.t), csv_number(w.dof), csv_number(w.p)});
          } catch (const MetricError&) {
            row.insert(row.end(), {"", "", ""});
          }
          csv.row(row);
        }
  }
}

}  // namespace lps
