#ifndef LPS_COHORT_HPP
#define LPS_COHORT_HPP

// Synthetic patient cohorts sampled from the generative model, their on-disk
// format, train/validation/test splits and the empirical prior fits.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <vector>

#include "json.hpp"

#include "lps/distributions.hpp"
#include "lps/windkessel.hpp"

namespace lps {

struct PatientRecord {
  std::int64_t id = 0;
  VitalsEstimate vitals{};  // observed (noisy) bp_sys, bp_dias, hr
  Vector tabular;
  Vector waveform;
  int outcome = 0;
  std::optional<double> cardiac_output;  // revealed CO [L/min]
  std::optional<double> resistance;      // revealed R [mmHg·s/L]
  // Generator ground truth, for evaluation only.
  ConceptVector true_z{};
  double true_pi = 0.0;
};

using Cohort = std::vector<PatientRecord>;

struct GeneratorConfig {
  double alpha = 1.2;
  double beta = 11.2;
  // Indexed like Concepts: R, C, Ts, Td, CO.
  std::array<RiskMixtureParams, 5> mixtures = default_mixtures();
  double bp_noise = 2.0;
  double hr_noise = 1.5;
  double tabular_noise = 0.25;
  double waveform_noise = 0.5;
  int tabular_dim = 4;
  int waveform_dim = 64;
  std::uint64_t teacher_seed = 1234;
  double co_observed_rate = 0.8;
  double r_observed_rate = 0.2;
  std::int64_t size = 4000;
  std::uint64_t seed = 0;
  WindkesselConfig windkessel{};

  static std::array<RiskMixtureParams, 5> default_mixtures();
  // Throws ConfigError on invalid fields.
  void validate() const;
};

void to_json(nlohmann::json& j, const GeneratorConfig& c);
// Missing keys keep their defaults.
void from_json(const nlohmann::json& j, GeneratorConfig& c);

GeneratorConfig read_generator_config(const std::filesystem::path& path);
void write_generator_config(const GeneratorConfig& cfg, const std::filesystem::path& path);

// Fixed random two-layer map from log-concepts to the remaining features:
// tabular block followed by a waveform block whose pulse train repeats every
// Ts + Td with a Ts-wide pulse.
class TeacherMap {
 public:
  TeacherMap(std::uint64_t seed, int tabular_dim, int waveform_dim);

  Vector operator()(const ConceptVector& z) const;
  int tabular_dim() const { return tabular_dim_; }
  int waveform_dim() const { return waveform_dim_; }

  static constexpr int kHidden = 16;
  static constexpr double kWindow = 2.5;  // seconds covered by the waveform

 private:
  int tabular_dim_;
  int waveform_dim_;
  Matrix w1_;
  Vector b1_;
  Matrix w_tab_;
  Matrix w_wave_;
  RowVector w_amp_;
};

PatientRecord sample_patient(std::mt19937_64& rng, const GeneratorConfig& cfg, const TeacherMap& teacher);

// Patient i draws from its own stream seeded by (cfg.seed, i).
Cohort generate_cohort(const GeneratorConfig& cfg);

struct SplitSpec {
  double train = 0.6;
  double val = 0.2;
  double test = 0.2;
  std::uint64_t seed = 0;
};

struct CohortSplits {
  Cohort train;
  Cohort val;
  Cohort test;
};

// Shuffled disjoint partition with sizes floor(train N), floor(val N), rest.
CohortSplits split_cohort(const Cohort& cohort, const SplitSpec& spec);

// Per concept m and class i (0 = lived, 1 = died) the fitted log-normal.
using PriorTable = std::array<std::array<LogNormalParams, 2>, 5>;

PriorTable fit_concept_priors(const Cohort& train);

// E[log z_m | y = i] under the generating model, and the matching variance
// of log z_m given y (mixture of the two components, integrated over π).
PriorTable class_conditional_log_moments(const GeneratorConfig& cfg);

void to_json(nlohmann::json& j, const PatientRecord& r);
void from_json(const nlohmann::json& j, PatientRecord& r);

// One JSON object per line.
void write_cohort(const Cohort& cohort, const std::filesystem::path& path);
Cohort read_cohort(const std::filesystem::path& path);

}  // namespace lps

#endif
