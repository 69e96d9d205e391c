#include "lps/cohort.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace lps {

using nlohmann::json;

// Configuration ---------------------------------------------------------------

std::array<RiskMixtureParams, 5> GeneratorConfig::default_mixtures() {
  auto ln = [](double median, double log_sd) { return LogNormalParams{std::log(median), log_sd * log_sd}; };
  return {{
      {ln(1400.0, 0.12), ln(1000.0, 0.12)},    // R
      {ln(0.0010, 0.15), ln(0.0015, 0.15)},    // C
      {ln(0.25, 0.08), ln(0.27, 0.08)},        // Ts
      {ln(0.45, 0.12), ln(0.53, 0.12)},        // Td
      {ln(3.8, 0.20), ln(5.5, 0.15)},          // CO
  }};
}

void GeneratorConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("generator config: " + msg); };
  if (!(alpha > 0.0) || !(beta > 0.0)) fail("alpha and beta must be positive");
  for (std::size_t m = 0; m < mixtures.size(); ++m)
    if (!(mixtures[m].high.var > 0.0) || !(mixtures[m].low.var > 0.0))
      fail(std::string("mixture variances for ") + kConceptNames[m] + " must be positive");
  if (bp_noise < 0.0 || hr_noise < 0.0 || tabular_noise < 0.0 || waveform_noise < 0.0)
    fail("noise levels must be non-negative");
  if (tabular_dim < 0 || waveform_dim < 0) fail("feature dimensions must be non-negative");
  if (co_observed_rate < 0.0 || co_observed_rate > 1.0 || r_observed_rate < 0.0 || r_observed_rate > 1.0)
    fail("observability rates must lie in [0, 1]");
  if (size < 0) fail("size must be non-negative");
  if (windkessel.settle_cycles < 1 || windkessel.average_cycles < 1) fail("Windkessel cycle counts must be >= 1");
}

namespace {

json lognormal_json(const LogNormalParams& p) { return {{"mu", p.mu}, {"var", p.var}}; }

LogNormalParams lognormal_from(const json& j) { return {j.at("mu").get<double>(), j.at("var").get<double>()}; }

template <typename T>
void read_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

void to_json(json& j, const GeneratorConfig& c) {
  json mixtures = json::object();
  for (std::size_t m = 0; m < c.mixtures.size(); ++m)
    mixtures[kConceptNames[m]] = {{"high", lognormal_json(c.mixtures[m].high)}, {"low", lognormal_json(c.mixtures[m].low)}};
  j = json{{"alpha", c.alpha},
           {"beta", c.beta},
           {"mixtures", mixtures},
           {"bp_noise", c.bp_noise},
           {"hr_noise", c.hr_noise},
           {"tabular_noise", c.tabular_noise},
           {"waveform_noise", c.waveform_noise},
           {"tabular_dim", c.tabular_dim},
           {"waveform_dim", c.waveform_dim},
           {"teacher_seed", c.teacher_seed},
           {"co_observed_rate", c.co_observed_rate},
           {"r_observed_rate", c.r_observed_rate},
           {"size", c.size},
           {"seed", c.seed},
           {"windkessel",
            {{"settle_cycles", c.windkessel.settle_cycles},
             {"average_cycles", c.windkessel.average_cycles},
             {"initial_pressure", c.windkessel.initial_pressure}}}};
}

void from_json(const json& j, GeneratorConfig& c) {
  read_if(j, "alpha", c.alpha);
  read_if(j, "beta", c.beta);
  if (j.contains("mixtures")) {
    const json& mix = j.at("mixtures");
    for (std::size_t m = 0; m < c.mixtures.size(); ++m) {
      if (!mix.contains(kConceptNames[m])) continue;
      const json& e = mix.at(kConceptNames[m]);
      if (e.contains("high")) c.mixtures[m].high = lognormal_from(e.at("high"));
      if (e.contains("low")) c.mixtures[m].low = lognormal_from(e.at("low"));
    }
  }
  read_if(j, "bp_noise", c.bp_noise);
  read_if(j, "hr_noise", c.hr_noise);
  read_if(j, "tabular_noise", c.tabular_noise);
  read_if(j, "waveform_noise", c.waveform_noise);
  read_if(j, "tabular_dim", c.tabular_dim);
  read_if(j, "waveform_dim", c.waveform_dim);
  read_if(j, "teacher_seed", c.teacher_seed);
  read_if(j, "co_observed_rate", c.co_observed_rate);
  read_if(j, "r_observed_rate", c.r_observed_rate);
  read_if(j, "size", c.size);
  read_if(j, "seed", c.seed);
  if (j.contains("windkessel")) {
    const json& w = j.at("windkessel");
    read_if(w, "settle_cycles", c.windkessel.settle_cycles);
    read_if(w, "average_cycles", c.windkessel.average_cycles);
    read_if(w, "initial_pressure", c.windkessel.initial_pressure);
  }
}

GeneratorConfig read_generator_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open generator config " + path.string());
  GeneratorConfig cfg;
  try {
    cfg = json::parse(in).get<GeneratorConfig>();
  } catch (const json::exception& e) {
    throw DataError("generator config " + path.string() + ": " + e.what());
  }
  cfg.validate();
  return cfg;
}

void write_generator_config(const GeneratorConfig& cfg, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write generator config " + path.string());
  out << json(cfg).dump(2) << '\n';
}

// Teacher map -----------------------------------------------------------------

namespace {

// Log-concept reference point and scale used to normalise the teacher input.
constexpr std::array<double, 5> kTeacherCenter = {6.907755278982137, -6.502290170873972, -1.3093333199837622,
                                                  -0.6348782724359695, 1.7047480922384253};
constexpr double kTeacherScale = 0.2;

Matrix gaussian_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double sd) {
  std::normal_distribution<double> normal(0.0, sd);
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
  return m;
}

}  // namespace

TeacherMap::TeacherMap(std::uint64_t seed, int tabular_dim, int waveform_dim)
    : tabular_dim_(tabular_dim), waveform_dim_(waveform_dim) {
  std::mt19937_64 rng(seed);
  w1_ = gaussian_matrix(rng, kHidden, 5, 1.0 / std::sqrt(5.0) * 1.5);
  b1_ = gaussian_matrix(rng, kHidden, 1, 0.1).col(0);
  w_tab_ = gaussian_matrix(rng, tabular_dim, kHidden, 2.0 / std::sqrt(static_cast<double>(kHidden)));
  w_wave_ = gaussian_matrix(rng, waveform_dim, kHidden, 0.5 / std::sqrt(static_cast<double>(kHidden)));
  w_amp_ = gaussian_matrix(rng, 1, kHidden, 1.0 / std::sqrt(static_cast<double>(kHidden))).row(0);
}

Vector TeacherMap::operator()(const ConceptVector& z) const {
  Vector u(5);
  for (std::size_t m = 0; m < 5; ++m) u(m) = (std::log(z[m]) - kTeacherCenter[m]) / kTeacherScale;
  const Vector hidden = (w1_ * u + b1_).array().tanh();
  Vector out(tabular_dim_ + waveform_dim_);
  out.head(tabular_dim_) = w_tab_ * hidden;

  const double beat = z.systole_time + z.diastole_time;
  const double width = 0.25 * z.systole_time;
  const double amplitude = 2.0 * (1.0 + 0.3 * std::tanh(w_amp_.dot(hidden)));
  const Vector mixed = w_wave_ * hidden;
  for (int k = 0; k < waveform_dim_; ++k) {
    const double t = kWindow * k / std::max(waveform_dim_, 1);
    const double phase = std::fmod(t, beat) - 0.5 * z.systole_time;
    out(tabular_dim_ + k) = amplitude * std::exp(-0.5 * phase * phase / (width * width)) + mixed(k);
  }
  return out;
}

// Sampling --------------------------------------------------------------------

PatientRecord sample_patient(std::mt19937_64& rng, const GeneratorConfig& cfg, const TeacherMap& teacher) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::gamma_distribution<double> ga(cfg.alpha, 1.0);
  std::gamma_distribution<double> gb(cfg.beta, 1.0);

  PatientRecord r;
  const double x = ga(rng);
  const double y = gb(rng);
  r.true_pi = x / (x + y);
  r.outcome = unif(rng) < r.true_pi ? 1 : 0;
  for (std::size_t m = 0; m < 5; ++m) {
    const LogNormalParams& c = unif(rng) < r.true_pi ? cfg.mixtures[m].high : cfg.mixtures[m].low;
    r.true_z[m] = std::exp(c.mu + std::sqrt(c.var) * normal(rng));
  }

  const VitalsEstimate clean = simulate_vitals(r.true_z, cfg.windkessel);
  r.vitals.bp_sys = clean.bp_sys + cfg.bp_noise * normal(rng);
  r.vitals.bp_dias = clean.bp_dias + cfg.bp_noise * normal(rng);
  r.vitals.hr = clean.hr + cfg.hr_noise * normal(rng);

  const Vector features = teacher(r.true_z);
  r.tabular = features.head(cfg.tabular_dim);
  r.waveform = features.tail(cfg.waveform_dim);
  for (Eigen::Index i = 0; i < r.tabular.size(); ++i) r.tabular(i) += cfg.tabular_noise * normal(rng);
  for (Eigen::Index i = 0; i < r.waveform.size(); ++i) r.waveform(i) += cfg.waveform_noise * normal(rng);

  if (unif(rng) < cfg.co_observed_rate) r.cardiac_output = r.true_z.cardiac_output;
  if (unif(rng) < cfg.r_observed_rate) r.resistance = r.true_z.resistance;
  return r;
}

Cohort generate_cohort(const GeneratorConfig& cfg) {
  cfg.validate();
  const TeacherMap teacher(cfg.teacher_seed, cfg.tabular_dim, cfg.waveform_dim);
  Cohort cohort;
  cohort.reserve(static_cast<std::size_t>(cfg.size));
  for (std::int64_t i = 0; i < cfg.size; ++i) {
    std::seed_seq seq{static_cast<std::uint64_t>(cfg.seed), static_cast<std::uint64_t>(i)};
    std::mt19937_64 rng(seq);
    PatientRecord r = sample_patient(rng, cfg, teacher);
    r.id = i;
    cohort.push_back(std::move(r));
  }
  return cohort;
}

CohortSplits split_cohort(const Cohort& cohort, const SplitSpec& spec) {
  if (spec.train < 0.0 || spec.val < 0.0 || spec.test < 0.0 ||
      std::abs(spec.train + spec.val + spec.test - 1.0) > 1e-9)
    throw ConfigError("split fractions must be non-negative and sum to 1");
  std::vector<std::size_t> order(cohort.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(spec.seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n = static_cast<double>(cohort.size());
  const auto n_train = static_cast<std::size_t>(std::floor(spec.train * n + 1e-9));
  const auto n_val = static_cast<std::size_t>(std::floor(spec.val * n + 1e-9));
  CohortSplits out;
  for (std::size_t k = 0; k < order.size(); ++k) {
    Cohort& target = k < n_train ? out.train : (k < n_train + n_val ? out.val : out.test);
    target.push_back(cohort[order[k]]);
  }
  return out;
}

// Prior fitting ---------------------------------------------------------------

PriorTable fit_concept_priors(const Cohort& train) {
  std::array<std::array<std::vector<double>, 2>, 5> samples;
  for (const PatientRecord& r : train) {
    const int cls = r.outcome;
    const double beat = 60.0 / r.vitals.hr;
    samples[2][cls].push_back(beat / 3.0);
    samples[3][cls].push_back(2.0 * beat / 3.0);
    if (r.cardiac_output) samples[4][cls].push_back(*r.cardiac_output);
    if (r.resistance) {
      samples[0][cls].push_back(*r.resistance);
      // Noisy pressures can invert the decay direction; such patients carry no
      // usable time-constant estimate.
      if (r.vitals.bp_sys > r.vitals.bp_dias && r.vitals.bp_dias > 0.0) {
        const double tau = estimate_tau(r.vitals.bp_sys, r.vitals.bp_dias, 2.0 * beat / 3.0);
        samples[1][cls].push_back(tau / *r.resistance);
      }
    }
  }
  PriorTable table{};
  for (std::size_t m = 0; m < 5; ++m) {
    for (int cls = 0; cls < 2; ++cls) {
      if (samples[m][cls].size() < 2) {
        std::ostringstream os;
        os << "fit_concept_priors: fewer than 2 values for concept " << kConceptNames[m] << " in class "
           << (cls == 1 ? "died" : "lived");
        throw ConfigError(os.str());
      }
      table[m][cls] = lognormal_fit(samples[m][cls]);
    }
  }
  return table;
}

PriorTable class_conditional_log_moments(const GeneratorConfig& cfg) {
  // E[π | y = 1] and E[π | y = 0] under π ~ Beta(α, β).
  const double total = cfg.alpha + cfg.beta + 1.0;
  const std::array<double, 2> weight = {cfg.alpha / total, (cfg.alpha + 1.0) / total};
  PriorTable table{};
  for (std::size_t m = 0; m < 5; ++m) {
    const auto& [high, low] = cfg.mixtures[m];
    for (int cls = 0; cls < 2; ++cls) {
      const double w = weight[cls];
      const double mean = w * high.mu + (1.0 - w) * low.mu;
      const double var = w * high.var + (1.0 - w) * low.var + w * (1.0 - w) * square(high.mu - low.mu);
      table[m][cls] = {mean, var};
    }
  }
  return table;
}

// Serialization ---------------------------------------------------------------

namespace {

json vector_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector vector_from(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

void to_json(json& j, const PatientRecord& r) {
  j = json{{"id", r.id},
           {"vitals", {{"hr", r.vitals.hr}, {"bp_sys", r.vitals.bp_sys}, {"bp_dias", r.vitals.bp_dias}}},
           {"tabular", vector_json(r.tabular)},
           {"waveform", vector_json(r.waveform)},
           {"y", r.outcome},
           {"co", optional_json(r.cardiac_output)},
           {"r", optional_json(r.resistance)},
           {"true_z",
            {{"R", r.true_z.resistance},
             {"C", r.true_z.compliance},
             {"Ts", r.true_z.systole_time},
             {"Td", r.true_z.diastole_time},
             {"CO", r.true_z.cardiac_output}}},
           {"true_pi", r.true_pi}};
}

void from_json(const json& j, PatientRecord& r) {
  r.id = j.at("id").get<std::int64_t>();
  const json& v = j.at("vitals");
  r.vitals.hr = v.at("hr").get<double>();
  r.vitals.bp_sys = v.at("bp_sys").get<double>();
  r.vitals.bp_dias = v.at("bp_dias").get<double>();
  r.tabular = vector_from(j.at("tabular"));
  r.waveform = vector_from(j.at("waveform"));
  r.outcome = j.at("y").get<int>();
  if (r.outcome != 0 && r.outcome != 1) throw DataError("outcome must be 0 or 1");
  r.cardiac_output.reset();
  r.resistance.reset();
  if (!j.at("co").is_null()) r.cardiac_output = j.at("co").get<double>();
  if (!j.at("r").is_null()) r.resistance = j.at("r").get<double>();
  if (j.contains("true_z")) {
    const json& z = j.at("true_z");
    for (std::size_t m = 0; m < 5; ++m) r.true_z[m] = z.at(kConceptNames[m]).get<double>();
  }
  r.true_pi = j.value("true_pi", 0.0);
}

void write_cohort(const Cohort& cohort, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write dataset " + path.string());
  for (const PatientRecord& r : cohort) out << json(r).dump() << '\n';
  if (!out) throw DataError("write failed for dataset " + path.string());
}

Cohort read_cohort(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dataset " + path.string());
  Cohort cohort;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      cohort.push_back(json::parse(line).get<PatientRecord>());
    } catch (const std::exception& e) {
      std::ostringstream os;
      os << path.string() << ":" << line_no << ": malformed record: " << e.what();
      throw DataError(os.str());
    }
  }
  return cohort;
}

}  // namespace lps
