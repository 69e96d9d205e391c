#include "lps/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "lps/csv.hpp"
#include "lps/distributions.hpp"
#include "lps/metrics.hpp"
#include "lps/optim.hpp"

namespace lps {

using nlohmann::json;

// Configuration -------------------------------------------------------------------

void TrainConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("train config: " + msg); };
  if (!(lr_vem > 0.0) || !(lr_map > 0.0) || !(lr_baseline > 0.0)) fail("learning rates must be positive");
  if (epochs < 1) fail("epochs must be >= 1");
  if (batch < 1) fail("batch must be >= 1");
  if (warmup_epochs < 0 || warmup_epochs > epochs) fail("warmup_epochs must lie in [0, epochs]");
  if (arch.hidden.empty() || arch.forward_hidden.empty()) fail("networks need at least one hidden layer");
}

void to_json(json& j, const TrainConfig& c) {
  j = json{{"lr_vem", c.lr_vem},
           {"lr_map", c.lr_map},
           {"lr_baseline", c.lr_baseline},
           {"epochs", c.epochs},
           {"batch", c.batch},
           {"warmup_epochs", c.warmup_epochs},
           {"seed", c.seed},
           {"clip_norm", c.clip_norm},
           {"map_warm_start", c.map_warm_start},
           {"hidden", c.arch.hidden},
           {"forward_hidden", c.arch.forward_hidden}};
}

void from_json(const json& j, TrainConfig& c) {
  auto read = [&](const char* key, auto& out) {
    if (j.contains(key)) out = j.at(key).get<std::decay_t<decltype(out)>>();
  };
  read("lr_vem", c.lr_vem);
  read("lr_map", c.lr_map);
  read("lr_baseline", c.lr_baseline);
  read("epochs", c.epochs);
  read("batch", c.batch);
  read("warmup_epochs", c.warmup_epochs);
  read("seed", c.seed);
  read("clip_norm", c.clip_norm);
  read("map_warm_start", c.map_warm_start);
  read("hidden", c.arch.hidden);
  read("forward_hidden", c.arch.forward_hidden);
}

TrainConfig read_train_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open train config " + path.string());
  TrainConfig cfg;
  try {
    cfg = json::parse(in).get<TrainConfig>();
  } catch (const json::exception& e) {
    throw DataError("train config " + path.string() + ": " + e.what());
  }
  cfg.validate();
  return cfg;
}

Dataset Dataset::from_cohort(const Cohort& cohort, const FeatureScaler& scaler, const FeatureLayout& layout) {
  Dataset d;
  d.x = scaler.apply(feature_matrix(cohort, layout));
  d.y = outcome_vector(cohort);
  for (const PatientRecord& r : cohort) d.ids.push_back(r.id);
  return d;
}

// Bound -----------------------------------------------------------------------------

double ElboTerms::sum_of_parts() const {
  return log_p_pi + log_p_y + log_p_z + (warmup ? 0.0 : log_p_x) + neg_log_q_z + neg_log_q_pi + log_p_phi;
}

ElboTerms ElboVars::values() const {
  auto s = [](const Var& v) { return v.value().sum(); };
  ElboTerms t;
  t.log_p_pi = s(joint.log_p_pi);
  t.log_p_y = s(joint.log_p_y);
  t.log_p_z = s(joint.log_p_z);
  t.log_p_x = s(joint.log_p_x);
  t.neg_log_q_z = s(neg_log_q_z);
  t.neg_log_q_pi = s(neg_log_q_pi);
  t.log_p_phi = log_p_phi.scalar();
  t.total = total.scalar();
  t.warmup = warmup;
  return t;
}

ElboDraws ElboDraws::sample(std::mt19937_64& rng, Eigen::Index batch) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  ElboDraws d;
  d.eps.resize(batch, 5);
  d.u.resize(batch);
  for (Eigen::Index i = 0; i < batch; ++i) {
    for (int m = 0; m < 5; ++m) d.eps(i, m) = normal(rng);
    // Keep u away from the endpoints so log π̃ and log(1 - π̃) stay finite.
    d.u(i) = std::clamp(uniform(rng), 1e-9, 1.0 - 1e-9);
  }
  return d;
}

ElboVars elbo_minibatch(const LpsModel& model, const Var& x, const Vector& y, const Var& theta_q, const Var& phi,
                        const Var& psi, const ElboDraws& draws, bool warmup) {
  Tape& t = *x.tape();
  const Eigen::Index n = x.rows();
  if (n == 0) throw UsageError("elbo_minibatch: empty batch");
  if (y.size() != n || draws.eps.rows() != n || draws.u.size() != n)
    throw UsageError("elbo_minibatch: batch, labels and draws differ in size");

  const PosteriorVars q = posterior_forward(model, x, theta_q);
  const Var var = exp(q.log_var);
  const Var log_z = q.mu + exp(0.5 * q.log_var) * t.constant(draws.eps);

  // Kumaraswamy draw in log space: log π̃ = log(1 - (1 - u)^(1/b)) / a.
  const Var u = t.constant(Matrix(draws.u));
  const Var log_pi = log(-expm1(log1p(-u) / q.b)) / q.a;
  const Var pi = exp(log_pi);
  const RiskVar risk{pi, log_pi, log1p(-pi)};

  ElboVars e;
  e.warmup = warmup;
  e.joint = log_joint_terms(model, risk, log_z, x, t.constant(Matrix(y)), phi, psi);
  e.neg_log_q_z = -row_sum(lognormal_logpdf_of_log(log_z, q.mu, var));
  e.neg_log_q_pi = -kumaraswamy_logpdf(pi, q.a, q.b);
  e.log_p_phi = log_hyperprior(model, phi);
  e.per_patient = e.joint.log_p_pi + e.joint.log_p_y + e.joint.log_p_z + e.neg_log_q_z + e.neg_log_q_pi;
  if (!warmup) e.per_patient = e.per_patient + e.joint.log_p_x;
  e.total = sum(e.per_patient) + e.log_p_phi;
  return e;
}

// Shared optimization loop ------------------------------------------------------------

namespace {

constexpr std::uint64_t kStageVem = 1;
constexpr std::uint64_t kStageMap = 2;
constexpr std::uint64_t kStageBaseline = 3;

std::mt19937_64 epoch_rng(std::uint64_t seed, std::uint64_t stage, int epoch) {
  std::seed_seq seq{seed, stage, std::uint64_t(epoch)};
  return std::mt19937_64(seq);
}

double safe_auc(const Vector& scores, const Vector& labels) {
  try {
    return auc(std::span(scores.data(), scores.size()), std::span(labels.data(), labels.size()));
  } catch (const MetricError&) {
    return std::nan("");
  }
}

Matrix gather_rows(const Matrix& m, std::span<const Eigen::Index> rows) {
  Matrix out(Eigen::Index(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(Eigen::Index(i)) = m.row(rows[i]);
  return out;
}

Vector gather(const Vector& v, std::span<const Eigen::Index> rows) {
  Vector out(Eigen::Index(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) out(Eigen::Index(i)) = v(rows[i]);
  return out;
}

struct Group {
  const char* name;
  Vector* params;
};

struct StepResult {
  double objective = 0.0;  // value being maximized on this batch
  std::vector<Vector> grads;  // d objective / d params, one per group
  std::vector<bool> frozen;   // groups left untouched on this step
  EpochRecord extra;          // stage-specific accumulations
};

template <typename Step, typename Score>
RunResult optimize(const char* stage, std::uint64_t stage_tag, std::vector<Group> groups, double lr,
                   const Dataset& train, const Dataset& val, const TrainConfig& cfg, Step step, Score score,
                   const EpochCallback& on_epoch) {
  cfg.validate();
  if (train.size() == 0) throw ConfigError(std::string(stage) + ": empty training set");
  std::vector<AdamState> adam;
  for (const Group& g : groups) adam.push_back(AdamState::for_size(g.params->size(), lr));

  std::vector<Vector> best;
  RunResult run;
  run.best_val_auc = -INFINITY;
  std::vector<Eigen::Index> order(std::size_t(train.size()));

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::mt19937_64 rng = epoch_rng(cfg.seed, stage_tag, epoch);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);

    EpochRecord rec;
    rec.epoch = epoch;
    int batches = 0;
    for (std::size_t start = 0; start < order.size(); start += std::size_t(cfg.batch)) {
      const std::size_t stop = std::min(order.size(), start + std::size_t(cfg.batch));
      const std::span<const Eigen::Index> rows(order.data() + start, stop - start);
      StepResult r;
      try {
        r = step(gather_rows(train.x, rows), gather(train.y, rows), rng, epoch);
      } catch (const DomainError& e) {
        std::string ids;
        for (auto i : rows) ids += (ids.empty() ? "" : " ") + std::to_string(train.ids.empty() ? i : train.ids[i]);
        throw TrainingError(std::string(stage) + ": epoch " + std::to_string(epoch) + ": " + e.what() +
                            " (batch patients " + ids + ")");
      }
      if (!std::isfinite(r.objective))
        throw TrainingError(std::string(stage) + ": non-finite objective at epoch " + std::to_string(epoch));

      std::vector<Vector*> active;
      for (std::size_t k = 0; k < groups.size(); ++k) {
        r.grads[k] = -r.grads[k];  // Adam descends
        if (r.frozen.empty() || !r.frozen[k]) active.push_back(&r.grads[k]);
      }
      if (cfg.clip_norm > 0.0) clip_global_norm(active, cfg.clip_norm);
      for (std::size_t k = 0; k < groups.size(); ++k) {
        if (!r.frozen.empty() && r.frozen[k]) continue;
        try {
          adam_step(*groups[k].params, r.grads[k], adam[k], groups[k].name);
        } catch (const TrainingError& e) {
          throw TrainingError(std::string(stage) + ": epoch " + std::to_string(epoch) + ": " + e.what());
        }
      }

      rec.objective += r.objective;
      rec.elbo += r.extra.elbo;
      rec.terms.log_p_pi += r.extra.terms.log_p_pi;
      rec.terms.log_p_y += r.extra.terms.log_p_y;
      rec.terms.log_p_z += r.extra.terms.log_p_z;
      rec.terms.log_p_x += r.extra.terms.log_p_x;
      rec.terms.neg_log_q_z += r.extra.terms.neg_log_q_z;
      rec.terms.neg_log_q_pi += r.extra.terms.neg_log_q_pi;
      rec.terms.log_p_phi += r.extra.terms.log_p_phi;
      rec.terms.total += r.extra.terms.total;
      rec.terms.warmup = r.extra.terms.warmup;
      ++batches;
    }
    const double nb = batches;
    rec.objective /= nb;
    rec.elbo /= nb;
    for (double* v : {&rec.terms.log_p_pi, &rec.terms.log_p_y, &rec.terms.log_p_z, &rec.terms.log_p_x,
                      &rec.terms.neg_log_q_z, &rec.terms.neg_log_q_pi, &rec.terms.log_p_phi, &rec.terms.total})
      *v /= nb;

    rec.val_auc = val.size() > 0 ? safe_auc(score(val.x), val.y) : std::nan("");
    if (best.empty() || rec.val_auc > run.best_val_auc) {
      run.best_epoch = epoch;
      run.best_val_auc = rec.val_auc;
      best.clear();
      for (const Group& g : groups) best.push_back(*g.params);
    }
    run.trace.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  for (std::size_t k = 0; k < groups.size(); ++k) *groups[k].params = best[k];
  return run;
}

Vector beta_modes(const Vector& a, const Vector& b) {
  Vector m(a.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) m(i) = beta_mode({a(i), b(i)});
  return m;
}

}  // namespace

void write_trace_csv(const RunResult& run, const std::filesystem::path& path, bool with_terms) {
  CsvWriter csv(path);
  std::vector<std::string> header{"epoch", "objective"};
  if (with_terms)
    header.insert(header.end(), {"elbo", "log_p_pi", "log_p_y", "log_p_z", "log_p_x", "neg_log_q_z", "neg_log_q_pi",
                                 "log_p_phi", "warmup"});
  header.push_back("val_auc");
  csv.row(header);
  for (const EpochRecord& r : run.trace) {
    std::vector<std::string> row{std::to_string(r.epoch), csv_number(r.objective)};
    if (with_terms) {
      const ElboTerms& t = r.terms;
      for (double v : {r.elbo, t.log_p_pi, t.log_p_y, t.log_p_z, t.log_p_x, t.neg_log_q_z, t.neg_log_q_pi, t.log_p_phi})
        row.push_back(csv_number(v));
      row.push_back(t.warmup ? "1" : "0");
    }
    row.push_back(csv_number(r.val_auc));
    csv.row(row);
  }
}

// Stage one -------------------------------------------------------------------------

RunResult train_variational_em(LpsModel& model, const Dataset& train, const Dataset& val, const TrainConfig& cfg,
                               const EpochCallback& on_epoch) {
  auto step = [&](const Matrix& xb, const Vector& yb, std::mt19937_64& rng, int epoch) {
    const bool warmup = epoch <= cfg.warmup_epochs;
    const ElboDraws draws = ElboDraws::sample(rng, xb.rows());
    Tape t;
    const Var theta_q = t.leaf(Matrix(model.theta_q));
    const Var phi = t.leaf(Matrix(model.priors.means));
    const Var psi = t.leaf(Matrix(model.psi));
    const ElboVars e = elbo_minibatch(model, t.constant(xb), yb, theta_q, phi, psi, draws, warmup);
    const Gradients g = t.backward(e.total);
    StepResult r;
    r.objective = e.total.scalar();
    r.grads = {g[theta_q], g[phi], g[psi]};
    // The likelihood is ψ's only path into the bound, so ψ rests in warmup.
    r.frozen = {false, false, warmup};
    r.extra.terms = e.values();
    r.extra.elbo = r.extra.terms.total + (warmup ? r.extra.terms.log_p_x : 0.0);
    return r;
  };
  auto score = [&](const Matrix& x) {
    const PosteriorBatch p = posterior_forward(model, x);
    return beta_modes(p.a, p.b);
  };
  return optimize("variational EM", kStageVem,
                  {{"theta_q", &model.theta_q}, {"phi", &model.priors.means}, {"psi", &model.psi}}, cfg.lr_vem, train,
                  val, cfg, step, score, on_epoch);
}

// Stage two -------------------------------------------------------------------------

namespace {

Var map_batch_objective(const LpsModel& model, Tape& t, const Matrix& x, const Vector& y, const Var& theta_n) {
  const MapVars m = map_forward(model, t.constant(x), theta_n);
  const Var phi = t.constant(Matrix(model.priors.means));
  const Var psi = t.constant(Matrix(model.psi));
  return sum(log_joint_terms(model, m.risk, m.log_z, t.constant(x), t.constant(Matrix(y)), phi, psi).total());
}

constexpr Eigen::Index kEvalChunk = 512;

}  // namespace

double map_objective(const LpsModel& model, const Dataset& data) {
  double total = 0.0;
  for (Eigen::Index s = 0; s < data.size(); s += kEvalChunk) {
    const Eigen::Index n = std::min(kEvalChunk, data.size() - s);
    Tape t;
    total += map_batch_objective(model, t, data.x.middleRows(s, n), data.y.segment(s, n),
                                 t.constant(Matrix(model.theta_n)))
                 .scalar();
  }
  return total / double(data.size());
}

RunResult train_map_network(LpsModel& model, const Dataset& train, const Dataset& val, const TrainConfig& cfg,
                            const EpochCallback& on_epoch) {
  if (cfg.map_warm_start) init_map_from_posterior(model);
  auto step = [&](const Matrix& xb, const Vector& yb, std::mt19937_64&, int) {
    Tape t;
    const Var theta_n = t.leaf(Matrix(model.theta_n));
    const Var obj = map_batch_objective(model, t, xb, yb, theta_n);
    StepResult r;
    r.objective = obj.scalar();
    r.grads = {t.backward(obj)[theta_n]};
    return r;
  };
  auto score = [&](const Matrix& x) { return map_forward(model, x).pi; };
  return optimize("MAP network", kStageMap, {{"theta_n", &model.theta_n}}, cfg.lr_map, train, val, cfg, step, score,
                  on_epoch);
}

// Baseline --------------------------------------------------------------------------

Var bce_with_logits(const Var& logits, const Var& y) {
  // -[y log σ(l) + (1 - y) log(1 - σ(l))] = softplus(l) - y l
  return logaddexp(logits, logits.tape()->constant(0.0)) - y * logits;
}

RunResult train_baseline(BaselineModel& model, const Dataset& train, const Dataset& val, const TrainConfig& cfg,
                         const EpochCallback& on_epoch) {
  auto step = [&](const Matrix& xb, const Vector& yb, std::mt19937_64&, int) {
    Tape t;
    const Var params = t.leaf(Matrix(model.params));
    const Var loss = sum(bce_with_logits(model.net.forward(t.constant(xb), params), t.constant(Matrix(yb))));
    StepResult r;
    r.objective = -loss.scalar();
    r.grads = {-t.backward(loss)[params]};
    return r;
  };
  auto score = [&](const Matrix& x) { return model.logits(x); };
  return optimize("baseline", kStageBaseline, {{"baseline", &model.params}}, cfg.lr_baseline, train, val, cfg, step,
                  score, on_epoch);
}

// Inference -------------------------------------------------------------------------

PointEstimates lps_q_inference(const LpsModel& model, const Matrix& x) {
  const PosteriorBatch p = posterior_forward(model, x);
  PointEstimates e;
  e.pi = beta_modes(p.a, p.b);
  e.z = (p.mu - p.var).array().exp().matrix();
  return e;
}

PointEstimates lps_inference(const LpsModel& model, const Matrix& x) {
  const MapBatch m = map_forward(model, x);
  return {m.pi, m.z};
}

double mean_log_joint(const LpsModel& model, const PointEstimates& est, const Dataset& data) {
  const Vector pi = est.pi.cwiseMax(1e-12).cwiseMin(1.0 - 1e-12);
  double total = 0.0;
  for (Eigen::Index s = 0; s < data.size(); s += kEvalChunk) {
    const Eigen::Index n = std::min(kEvalChunk, data.size() - s);
    total += log_joint_batch(model, pi.segment(s, n), est.z.middleRows(s, n), data.x.middleRows(s, n),
                             data.y.segment(s, n))
                 .sum();
  }
  return total / double(data.size());
}

RowVector integrated_gradients(const Classifier& f, const RowVector& x, const RowVector& baseline, int steps) {
  if (steps < 1) throw UsageError("integrated_gradients: steps must be >= 1");
  if (x.size() != baseline.size()) throw UsageError("integrated_gradients: input and baseline differ in size");
  const RowVector delta = x - baseline;
  Matrix path(steps, x.size());
  for (int k = 0; k < steps; ++k) path.row(k) = baseline + ((k + 0.5) / steps) * delta;
  Tape t;
  const Var input = t.leaf(path);
  const Var out = f(input);
  if (out.rows() != steps || out.cols() != 1) throw UsageError("integrated_gradients: classifier must map rows to one output each");
  const Matrix g = t.backward(sum(out))[input];
  return delta.cwiseProduct(g.colwise().mean());
}

Classifier baseline_classifier(const BaselineModel& model) {
  return [net = model.net, params = model.params](const Var& x) {
    return sigmoid(net.forward(x, x.tape()->constant(Matrix(params))));
  };
}

}  // namespace lps
