#include "lps/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "lps/distributions.hpp"
#include "lps/special.hpp"

namespace lps {

using nlohmann::json;

// Mlp ---------------------------------------------------------------------------

Mlp::Mlp(std::vector<int> widths, Activation hidden) : widths_(std::move(widths)), activation_(hidden) {
  if (widths_.size() < 2) throw UsageError("Mlp: need at least an input and an output width");
  for (int w : widths_)
    if (w < 1) throw UsageError("Mlp: layer widths must be positive");
}

Eigen::Index Mlp::param_count() const {
  Eigen::Index n = 0;
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) n += Eigen::Index(widths_[l] + 1) * widths_[l + 1];
  return n;
}

Eigen::Index Mlp::output_bias_offset() const { return param_count() - widths_.back(); }

Vector Mlp::init(std::mt19937_64& rng, double output_scale) const {
  Vector p = Vector::Zero(param_count());
  std::normal_distribution<double> normal(0.0, 1.0);
  const double gain = activation_ == Activation::relu ? std::sqrt(2.0) : 1.0;
  Eigen::Index off = 0;
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    const int in = widths_[l];
    const int out = widths_[l + 1];
    double scale = gain / std::sqrt(double(in));
    if (l + 2 == widths_.size()) scale = output_scale / std::sqrt(double(in));
    for (Eigen::Index k = 0; k < Eigen::Index(in) * out; ++k) p(off + k) = scale * normal(rng);
    off += Eigen::Index(in + 1) * out;
  }
  return p;
}

Matrix Mlp::forward(const Matrix& x, const Vector& params) const {
  if (x.cols() != inputs()) throw UsageError("Mlp::forward: input width mismatch");
  if (params.size() != param_count()) throw UsageError("Mlp::forward: parameter count mismatch");
  Matrix h = x;
  Eigen::Index off = 0;
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    const int in = widths_[l];
    const int out = widths_[l + 1];
    const Eigen::Map<const Matrix> w(params.data() + off, in, out);
    off += Eigen::Index(in) * out;
    const Eigen::Map<const RowVector> b(params.data() + off, out);
    off += out;
    Matrix next = h * w;
    next.rowwise() += b;
    if (l + 2 < widths_.size()) {
      if (activation_ == Activation::relu)
        next = next.cwiseMax(0.0);
      else
        next = next.array().tanh().matrix();
    }
    h = std::move(next);
  }
  return h;
}

Var Mlp::forward(const Var& x, const Var& params) const {
  if (x.cols() != inputs()) throw UsageError("Mlp::forward: input width mismatch");
  if (params.rows() != param_count() || params.cols() != 1) throw UsageError("Mlp::forward: parameter count mismatch");
  Var h = x;
  Eigen::Index off = 0;
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    const int in = widths_[l];
    const int out = widths_[l + 1];
    const Var w = reshape(params, off, in, out);
    off += Eigen::Index(in) * out;
    const Var b = reshape(params, off, 1, out);
    off += out;
    h = affine(h, w, b);
    if (l + 2 < widths_.size()) h = activation_ == Activation::relu ? relu(h) : tanh(h);
  }
  return h;
}

// Features ----------------------------------------------------------------------

Matrix feature_matrix(const Cohort& cohort, const FeatureLayout& layout) {
  Matrix x(Eigen::Index(cohort.size()), layout.total());
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    const PatientRecord& r = cohort[i];
    if (r.tabular.size() != layout.tabular_dim || r.waveform.size() != layout.waveform_dim)
      throw DataError("patient " + std::to_string(r.id) + ": expected " + std::to_string(layout.tabular_dim) +
                      " tabular and " + std::to_string(layout.waveform_dim) + " waveform values");
    const auto row = Eigen::Index(i);
    x(row, FeatureLayout::kHr) = r.vitals.hr;
    x(row, FeatureLayout::kBpSys) = r.vitals.bp_sys;
    x(row, FeatureLayout::kBpDias) = r.vitals.bp_dias;
    x.block(row, FeatureLayout::kVitals, 1, layout.tabular_dim) = r.tabular.transpose();
    x.block(row, FeatureLayout::kVitals + layout.tabular_dim, 1, layout.waveform_dim) = r.waveform.transpose();
  }
  return x;
}

Vector outcome_vector(const Cohort& cohort) {
  Vector y(Eigen::Index(cohort.size()));
  for (std::size_t i = 0; i < cohort.size(); ++i) y(Eigen::Index(i)) = cohort[i].outcome;
  return y;
}

FeatureScaler FeatureScaler::fit(const Matrix& raw) {
  if (raw.rows() == 0) throw DataError("fit_scaler: empty training set");
  FeatureScaler s;
  s.mean = raw.colwise().mean();
  const Matrix centered = raw.rowwise() - s.mean;
  s.sd = (centered.array().square().colwise().sum() / double(raw.rows())).sqrt().matrix();
  s.sd = s.sd.cwiseMax(kFloor);
  return s;
}

Matrix FeatureScaler::apply(const Matrix& raw) const {
  if (raw.cols() != mean.size()) throw UsageError("FeatureScaler: feature count mismatch");
  return ((raw.rowwise() - mean).array().rowwise() / sd.array()).matrix();
}

Matrix FeatureScaler::invert(const Matrix& standardized) const {
  if (standardized.cols() != mean.size()) throw UsageError("FeatureScaler: feature count mismatch");
  Matrix raw = (standardized.array().rowwise() * sd.array()).matrix();
  raw.rowwise() += mean;
  return raw;
}

// Priors and model assembly -------------------------------------------------------

ConceptPriors ConceptPriors::from_table(const PriorTable& table) {
  ConceptPriors p;
  p.centers = table;
  p.means.resize(10);
  for (int m = 0; m < 5; ++m)
    for (int i = 0; i < 2; ++i) {
      if (!(table[m][i].var > 0.0)) throw ConfigError(std::string("prior variance for ") + kConceptNames[m] + " must be positive");
      p.means(2 * m + i) = table[m][i].mu;
    }
  return p;
}

namespace {

double logit(double p) { return std::log(p / (1.0 - p)); }

std::vector<int> widths_for(int in, const std::vector<int>& hidden, int out) {
  std::vector<int> w{in};
  w.insert(w.end(), hidden.begin(), hidden.end());
  w.push_back(out);
  return w;
}

// Inverse of r ↦ range·tanh(r / range).
double unsquash(double target, double range) { return range * std::atanh(target / range); }

Var squash(const Var& raw, double range) { return range * tanh(raw / range); }

Matrix squash(const Matrix& raw, double range) { return (range * (raw.array() / range).tanh()).matrix(); }

}  // namespace

LpsModel LpsModel::create(const FeatureLayout& layout, const FeatureScaler& scaler, const PriorTable& priors,
                          const Architecture& arch, const WindkesselConfig& windkessel, std::uint64_t seed) {
  LpsModel m;
  m.layout = layout;
  m.scaler = scaler;
  m.priors = ConceptPriors::from_table(priors);
  m.windkessel = windkessel;
  m.arch = arch;
  m.latent_center.resize(5);
  m.latent_scale.resize(5);
  RowVector log_var(5);
  for (int c = 0; c < 5; ++c) {
    m.latent_center(c) = 0.5 * (priors[c][0].mu + priors[c][1].mu);
    log_var(c) = std::log(0.5 * (priors[c][0].var + priors[c][1].var));
    m.latent_scale(c) = std::max(std::exp(0.5 * log_var(c)), 0.05);
  }

  m.posterior_net = Mlp(widths_for(layout.total(), arch.hidden, 12), Activation::relu);
  m.map_net = Mlp(widths_for(layout.total(), arch.hidden, 6), Activation::relu);
  m.forward_net = Mlp(widths_for(5, arch.forward_hidden, layout.rest()), Activation::tanh);

  std::mt19937_64 rng(seed);
  m.theta_q = m.posterior_net.init(rng, 0.01);
  const Eigen::Index qb = m.posterior_net.output_bias_offset();
  for (int c = 0; c < 5; ++c) m.theta_q(qb + 5 + c) = unsquash(log_var(c), kLogVarRange);
  m.theta_q(qb + 10) = logit(0.02);  // a ≈ 1.2
  m.theta_q(qb + 11) = logit(0.9);   // b ≈ 10

  m.theta_n = m.map_net.init(rng, 0.01);
  m.theta_n(m.map_net.output_bias_offset()) = logit(0.1);

  m.psi = m.forward_net.init(rng, 0.1);
  return m;
}

void init_map_from_posterior(LpsModel& model) {
  const Mlp& q = model.posterior_net;
  const Mlp& n = model.map_net;
  const auto& wq = q.widths();
  const auto& wn = n.widths();
  if (!std::equal(wq.begin(), wq.end() - 1, wn.begin(), wn.end() - 1))
    throw UsageError("init_map_from_posterior: networks differ in their hidden layers");
  const Eigen::Index trunk = q.output_bias_offset() - Eigen::Index(wq[wq.size() - 2]) * wq.back();
  const Eigen::Index hidden = wq[wq.size() - 2];
  model.theta_n.head(trunk) = model.theta_q.head(trunk);
  const Eigen::Map<const Matrix> w_q(model.theta_q.data() + trunk, hidden, q.outputs());
  Eigen::Map<Matrix> w_n(model.theta_n.data() + trunk, hidden, n.outputs());
  w_n.rightCols(5) = w_q.leftCols(5);
  model.theta_n.segment(n.output_bias_offset() + 1, 5) = model.theta_q.segment(q.output_bias_offset(), 5);
}

// Networks ------------------------------------------------------------------------

RiskVar risk_from_logit(const Var& logit) {
  const Var zero = logit.tape()->constant(0.0);
  return {sigmoid(logit), -logaddexp(-logit, zero), -logaddexp(logit, zero)};
}

RiskVar risk_from_probability(const Var& pi) {
  detail::require_open_unit("risk", pi);
  return {pi, log(pi), log1p(-pi)};
}

PosteriorVars posterior_forward(const LpsModel& model, const Var& x, const Var& theta_q) {
  Tape& t = *x.tape();
  const Var out = model.posterior_net.forward(x, theta_q);
  const Var center = t.constant(Matrix(model.latent_center));
  return {center + squash(cols(out, 0, 5), kLogRange), squash(cols(out, 5, 5), kLogVarRange),
          1.0 + 10.0 * sigmoid(col(out, 10)), 1.0 + 10.0 * sigmoid(col(out, 11))};
}

namespace {

void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) throw InferenceError(std::string(what) + ": non-finite network output");
}

Vector sigmoid_of(const Vector& v) { return (1.0 / (1.0 + (-v.array()).exp())).matrix(); }

}  // namespace

PosteriorBatch posterior_forward(const LpsModel& model, const Matrix& x) {
  const Matrix out = model.posterior_net.forward(x, model.theta_q);
  require_finite(out, "posterior_forward");
  PosteriorBatch p;
  p.mu = squash(out.leftCols(5), kLogRange).rowwise() + model.latent_center;
  p.var = squash(out.middleCols(5, 5), kLogVarRange).array().exp().matrix();
  p.a = (1.0 + 10.0 * sigmoid_of(out.col(10)).array()).matrix();
  p.b = (1.0 + 10.0 * sigmoid_of(out.col(11)).array()).matrix();
  return p;
}

MapVars map_forward(const LpsModel& model, const Var& x, const Var& theta_n) {
  Tape& t = *x.tape();
  const Var out = model.map_net.forward(x, theta_n);
  const Var center = t.constant(Matrix(model.latent_center));
  return {risk_from_logit(col(out, 0)), center + squash(cols(out, 1, 5), kLogRange)};
}

MapBatch map_forward(const LpsModel& model, const Matrix& x) {
  const Matrix out = model.map_net.forward(x, model.theta_n);
  require_finite(out, "map_forward");
  MapBatch r;
  r.pi = sigmoid_of(out.col(0));
  const Matrix log_z = squash(out.rightCols(5), kLogRange).rowwise() + model.latent_center;
  r.z = log_z.array().exp().matrix();
  return r;
}

// Log joint -----------------------------------------------------------------------

Var log_likelihood(const LpsModel& model, const Var& log_z, const Var& x, const Var& psi) {
  Tape& t = *x.tape();
  const FeatureScaler& s = model.scaler;
  const Var z = exp(log_z);
  const Concepts<Var> c{col(z, 0), col(z, 1), col(z, 2), col(z, 3), col(z, 4)};
  const Vitals<Var> g = simulate_vitals(c, model.windkessel);
  auto vital = [&](const Var& predicted, int j) {
    const Var scaled = (predicted - s.mean(j)) / s.sd(j);
    return normal_logpdf(col(x, j), scaled, model.noise.vitals);
  };
  const Var vitals = vital(g.hr, FeatureLayout::kHr) + vital(g.bp_sys, FeatureLayout::kBpSys) +
                     vital(g.bp_dias, FeatureLayout::kBpDias);

  const int rest = model.layout.rest();
  if (rest == 0) return vitals;
  const Var u = (log_z - t.constant(Matrix(model.latent_center))) / t.constant(Matrix(model.latent_scale));
  const Var f = model.forward_net.forward(u, psi);
  RowVector sigma(rest);
  sigma.head(model.layout.tabular_dim).setConstant(model.noise.tabular);
  sigma.tail(model.layout.waveform_dim).setConstant(model.noise.waveform);
  return vitals + gaussian_logpdf_rows(cols(x, FeatureLayout::kVitals, rest), f, sigma);
}

JointVars log_joint_terms(const LpsModel& model, const RiskVar& risk, const Var& log_z, const Var& x, const Var& y,
                          const Var& phi, const Var& psi) {
  // Flat Beta(1, 1) prior on π.
  constexpr double a = 1.0;
  constexpr double b = 1.0;
  JointVars j;
  j.log_p_pi = (a - 1.0) * risk.log_pi + (b - 1.0) * risk.log1m_pi - log_beta(a, b);
  j.log_p_y = y * risk.log_pi + (1.0 - y) * risk.log1m_pi;

  const ConceptPriors& p = model.priors;
  for (int m = 0; m < 5; ++m) {
    const Var lz = col(log_z, m);
    const Var high = risk.log_pi + lognormal_logpdf_of_log(lz, reshape(phi, 2 * m + 1, 1, 1), p.variance(m, 1));
    const Var low = risk.log1m_pi + lognormal_logpdf_of_log(lz, reshape(phi, 2 * m, 1, 1), p.variance(m, 0));
    const Var term = logaddexp(high, low);
    j.log_p_z = m == 0 ? term : j.log_p_z + term;
  }
  j.log_p_x = log_likelihood(model, log_z, x, psi);
  return j;
}

namespace {

Vector hyperprior_centers(const LpsModel& model) {
  Vector c(10);
  for (int m = 0; m < 5; ++m)
    for (int i = 0; i < 2; ++i) c(2 * m + i) = model.priors.center(m, i);
  return c;
}

}  // namespace

Var log_hyperprior(const LpsModel& model, const Var& phi) {
  Tape& t = *phi.tape();
  return sum(normal_logpdf(phi, t.constant(Matrix(hyperprior_centers(model))), ConceptPriors::kHyperSigma));
}

double log_hyperprior(const LpsModel& model, const Vector& phi) {
  const Vector c = hyperprior_centers(model);
  double total = 0.0;
  for (Eigen::Index k = 0; k < phi.size(); ++k) total += normal_logpdf(phi(k), c(k), ConceptPriors::kHyperSigma);
  return total;
}

namespace {

struct ConstantInputs {
  Var phi;
  Var psi;
};

ConstantInputs model_constants(Tape& t, const LpsModel& model) {
  return {t.constant(Matrix(model.priors.means)), t.constant(Matrix(model.psi))};
}

Matrix log_of(const Matrix& z) {
  if (!(z.minCoeff() > 0.0)) throw DomainError("log_joint: concepts must be positive");
  return z.array().log().matrix();
}

}  // namespace

JointBreakdown log_joint(const LpsModel& model, double pi, const ConceptVector& z, const RowVector& x, int y) {
  Tape t;
  const ConstantInputs k = model_constants(t, model);
  Matrix zm(1, 5);
  for (int m = 0; m < 5; ++m) zm(0, m) = z[m];
  const JointVars j = log_joint_terms(model, risk_from_probability(t.constant(pi)), t.constant(log_of(zm)),
                                      t.constant(Matrix(x)), t.constant(double(y)), k.phi, k.psi);
  return {j.log_p_pi.scalar(), j.log_p_y.scalar(), j.log_p_z.scalar(), j.log_p_x.scalar()};
}

Vector log_joint_batch(const LpsModel& model, const Vector& pi, const Matrix& z, const Matrix& x, const Vector& y) {
  Tape t;
  const ConstantInputs k = model_constants(t, model);
  const JointVars j = log_joint_terms(model, risk_from_probability(t.constant(Matrix(pi))), t.constant(log_of(z)),
                                      t.constant(x), t.constant(Matrix(y)), k.phi, k.psi);
  return j.total().value().col(0);
}

Prediction predict(const LpsModel& model, const RowVector& x) {
  const MapBatch m = map_forward(model, Matrix(x));
  Prediction p;
  p.pi = m.pi(0);
  for (int c = 0; c < 5; ++c) p.z[c] = m.z(0, c);
  p.eta = model.threshold;
  p.y = classify(p.pi, p.eta);
  const double clamped = std::clamp(p.pi, 1e-12, 1.0 - 1e-12);
  p.terms = log_joint(model, clamped, p.z, x, p.y);
  return p;
}

// Baseline ------------------------------------------------------------------------

BaselineModel BaselineModel::create(const FeatureLayout& layout, const FeatureScaler& scaler, const Architecture& arch,
                                    double prevalence, std::uint64_t seed) {
  BaselineModel b;
  b.layout = layout;
  b.scaler = scaler;
  b.arch = arch;
  b.net = Mlp(widths_for(layout.total(), arch.hidden, 1), Activation::relu);
  std::mt19937_64 rng(seed);
  b.params = b.net.init(rng, 0.1);
  b.params(b.net.output_bias_offset()) = logit(std::clamp(prevalence, 1e-3, 1.0 - 1e-3));
  return b;
}

Vector BaselineModel::logits(const Matrix& x) const {
  const Matrix out = net.forward(x, params);
  require_finite(out, "baseline");
  return out.col(0);
}

Vector BaselineModel::predict_proba(const Matrix& x) const { return sigmoid_of(logits(x)); }

// Serialization -------------------------------------------------------------------

namespace {

template <typename Derived>
json array_json(const Eigen::MatrixBase<Derived>& v) {
  return std::vector<double>(v.derived().data(), v.derived().data() + v.size());
}

Vector vector_from(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(values.data(), Eigen::Index(values.size()));
}

RowVector row_from(const json& j) { return vector_from(j).transpose(); }

json layout_json(const FeatureLayout& l) { return {{"tabular_dim", l.tabular_dim}, {"waveform_dim", l.waveform_dim}}; }

FeatureLayout layout_from(const json& j) { return {j.at("tabular_dim").get<int>(), j.at("waveform_dim").get<int>()}; }

json scaler_json(const FeatureScaler& s) { return {{"mean", array_json(s.mean)}, {"sd", array_json(s.sd)}}; }

FeatureScaler scaler_from(const json& j) { return {row_from(j.at("mean")), row_from(j.at("sd"))}; }

json arch_json(const Architecture& a) { return {{"hidden", a.hidden}, {"forward_hidden", a.forward_hidden}}; }

Architecture arch_from(const json& j) {
  return {j.at("hidden").get<std::vector<int>>(), j.at("forward_hidden").get<std::vector<int>>()};
}

void check_format(const json& j, const char* expected) {
  const std::string tag = j.value("format", "");
  if (tag != expected) throw DataError("unsupported model format '" + tag + "', expected '" + expected + "'");
}

void check_size(const Vector& v, const Mlp& net, const char* what) {
  if (v.size() != net.param_count()) throw DataError(std::string("model file: wrong parameter count for ") + what);
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open model file " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError("model file " + path.string() + ": " + e.what());
  }
}

void write_json(const json& j, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write model file " + path.string());
  out << j.dump(1) << '\n';
}

}  // namespace

void to_json(json& j, const LpsModel& m) {
  json priors = json::array();
  for (int c = 0; c < 5; ++c)
    for (int i = 0; i < 2; ++i)
      priors.push_back({{"concept", kConceptNames[c]},
                        {"class", i},
                        {"center", m.priors.center(c, i)},
                        {"var", m.priors.variance(c, i)},
                        {"mean", m.priors.means(2 * c + i)}});
  j = json{{"format", kModelFormat},
           {"layout", layout_json(m.layout)},
           {"architecture", arch_json(m.arch)},
           {"scaler", scaler_json(m.scaler)},
           {"noise", {{"vitals", m.noise.vitals}, {"tabular", m.noise.tabular}, {"waveform", m.noise.waveform}}},
           {"windkessel",
            {{"settle_cycles", m.windkessel.settle_cycles},
             {"average_cycles", m.windkessel.average_cycles},
             {"initial_pressure", m.windkessel.initial_pressure}}},
           {"latent_center", array_json(m.latent_center)},
           {"latent_scale", array_json(m.latent_scale)},
           {"threshold", m.threshold},
           {"priors", priors},
           {"theta_q", array_json(m.theta_q)},
           {"theta_n", array_json(m.theta_n)},
           {"psi", array_json(m.psi)}};
}

void from_json(const json& j, LpsModel& m) {
  check_format(j, kModelFormat);
  m.layout = layout_from(j.at("layout"));
  m.arch = arch_from(j.at("architecture"));
  m.scaler = scaler_from(j.at("scaler"));
  const json& n = j.at("noise");
  m.noise = {n.at("vitals").get<double>(), n.at("tabular").get<double>(), n.at("waveform").get<double>()};
  const json& w = j.at("windkessel");
  m.windkessel = {w.at("settle_cycles").get<int>(), w.at("average_cycles").get<int>(),
                  w.at("initial_pressure").get<double>()};
  m.latent_center = row_from(j.at("latent_center"));
  m.latent_scale = row_from(j.at("latent_scale"));
  m.threshold = j.at("threshold").get<double>();
  const json& p = j.at("priors");
  if (p.size() != 10) throw DataError("model file: expected 10 prior entries");
  m.priors.means.resize(10);
  for (int c = 0; c < 5; ++c)
    for (int i = 0; i < 2; ++i) {
      const json& e = p.at(2 * c + i);
      m.priors.centers[c][i] = {e.at("center").get<double>(), e.at("var").get<double>()};
      m.priors.means(2 * c + i) = e.at("mean").get<double>();
    }
  m.posterior_net = Mlp(widths_for(m.layout.total(), m.arch.hidden, 12), Activation::relu);
  m.map_net = Mlp(widths_for(m.layout.total(), m.arch.hidden, 6), Activation::relu);
  m.forward_net = Mlp(widths_for(5, m.arch.forward_hidden, m.layout.rest()), Activation::tanh);
  m.theta_q = vector_from(j.at("theta_q"));
  m.theta_n = vector_from(j.at("theta_n"));
  m.psi = vector_from(j.at("psi"));
  check_size(m.theta_q, m.posterior_net, "theta_q");
  check_size(m.theta_n, m.map_net, "theta_n");
  check_size(m.psi, m.forward_net, "psi");
}

void to_json(json& j, const BaselineModel& m) {
  j = json{{"format", kBaselineFormat},
           {"layout", layout_json(m.layout)},
           {"architecture", arch_json(m.arch)},
           {"scaler", scaler_json(m.scaler)},
           {"params", array_json(m.params)}};
}

void from_json(const json& j, BaselineModel& m) {
  check_format(j, kBaselineFormat);
  m.layout = layout_from(j.at("layout"));
  m.arch = arch_from(j.at("architecture"));
  m.scaler = scaler_from(j.at("scaler"));
  m.net = Mlp(widths_for(m.layout.total(), m.arch.hidden, 1), Activation::relu);
  m.params = vector_from(j.at("params"));
  check_size(m.params, m.net, "params");
}

void write_model(const LpsModel& model, const std::filesystem::path& path) { write_json(json(model), path); }

LpsModel read_model(const std::filesystem::path& path) {
  try {
    return read_json(path).get<LpsModel>();
  } catch (const json::exception& e) {
    throw DataError("model file " + path.string() + ": " + e.what());
  }
}

void write_baseline(const BaselineModel& model, const std::filesystem::path& path) { write_json(json(model), path); }

BaselineModel read_baseline(const std::filesystem::path& path) {
  try {
    return read_json(path).get<BaselineModel>();
  } catch (const json::exception& e) {
    throw DataError("model file " + path.string() + ": " + e.what());
  }
}

}  // namespace lps
