#ifndef LPS_MODEL_HPP
#define LPS_MODEL_HPP

// The probabilistic model: concept priors, the mixture p(z | π, φ), the
// composite likelihood p(x | z, ψ) built from the Windkessel model g and a
// learned network f, and the posterior / MAP networks.
//
// Features are laid out as [hr, bp_sys, bp_dias, tabular..., waveform...]
// and every network sees them standardized by a FeatureScaler fitted on the
// training split.

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"

#include "lps/cohort.hpp"
#include "lps/diff.hpp"
#include "lps/windkessel.hpp"

namespace lps {

enum class Activation { relu, tanh };

// Dense network with all weights in one flat vector: per layer the
// in x out weight matrix (column-major) followed by the 1 x out bias.
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::vector<int> widths, Activation hidden);

  Eigen::Index param_count() const;
  // Scaled-normal weights (fan-in), zero biases; the last layer's weights are
  // multiplied by `output_scale`.
  Vector init(std::mt19937_64& rng, double output_scale = 1.0) const;
  // Offset of the last layer's bias in the flat vector.
  Eigen::Index output_bias_offset() const;

  Matrix forward(const Matrix& x, const Vector& params) const;
  Var forward(const Var& x, const Var& params) const;

  const std::vector<int>& widths() const { return widths_; }
  Activation activation() const { return activation_; }
  int inputs() const { return widths_.front(); }
  int outputs() const { return widths_.back(); }

 private:
  std::vector<int> widths_;
  Activation activation_ = Activation::relu;
};

struct FeatureLayout {
  int tabular_dim = 4;
  int waveform_dim = 64;

  static constexpr int kHr = 0;
  static constexpr int kBpSys = 1;
  static constexpr int kBpDias = 2;
  static constexpr int kVitals = 3;

  int total() const { return kVitals + tabular_dim + waveform_dim; }
  int rest() const { return tabular_dim + waveform_dim; }
};

// Raw feature rows in natural units. Throws DataError on inconsistent
// tabular or waveform lengths.
Matrix feature_matrix(const Cohort& cohort, const FeatureLayout& layout);
Vector outcome_vector(const Cohort& cohort);

struct FeatureScaler {
  RowVector mean;
  RowVector sd;  // floored at kFloor

  static constexpr double kFloor = 1e-6;

  static FeatureScaler fit(const Matrix& raw);
  Matrix apply(const Matrix& raw) const;
  Matrix invert(const Matrix& standardized) const;
};

struct ConceptPriors {
  PriorTable centers;  // μ̃ and the fixed σ̃² for each (m, class)
  Vector means;        // trainable φ: μ_{m,i} at index 2m + i

  static constexpr double kHyperSigma = 0.01;

  // Means start at the hyperprior centers.
  static ConceptPriors from_table(const PriorTable& table);
  double center(int m, int cls) const { return centers[m][cls].mu; }
  double variance(int m, int cls) const { return centers[m][cls].var; }
};

// Fixed observation standard deviations, not trained.
struct ObservationNoise {
  double vitals = 0.1;  // on the standardized scale
  double tabular = 0.5;
  double waveform = 5.0;
};

struct Architecture {
  std::vector<int> hidden = {128, 64};         // posterior, MAP and baseline backbone
  std::vector<int> forward_hidden = {64, 64};  // f(z; ψ)
};

// Log-scale network outputs are squashed to center ± kLogRange before the
// exponential, which keeps concepts and variances finite for any input.
inline constexpr double kLogRange = 5.0;
inline constexpr double kLogVarRange = 20.0;

struct LpsModel {
  FeatureLayout layout;
  FeatureScaler scaler;
  ConceptPriors priors;
  ObservationNoise noise;
  WindkesselConfig windkessel;
  Architecture arch;
  // Center and scale of log z; the input normalization of f and the offsets
  // of the log-concept heads.
  RowVector latent_center;
  RowVector latent_scale;

  Mlp posterior_net;  // 12 outputs: μ (5), log σ² (5), raw a, raw b
  Mlp map_net;        // 6 outputs: logit π, log z (5)
  Mlp forward_net;    // f: 5 -> rest()

  Vector theta_q;
  Vector theta_n;
  Vector psi;
  double threshold = 0.5;  // η

  static LpsModel create(const FeatureLayout& layout, const FeatureScaler& scaler, const PriorTable& priors,
                         const Architecture& arch, const WindkesselConfig& windkessel, std::uint64_t seed);
};

// Copies the trained posterior network into the MAP network: hidden layers
// unchanged, the log-concept head from the posterior means. The risk head
// keeps its own initialization. Requires equal hidden widths.
void init_map_from_posterior(LpsModel& model);

// π together with log π and log(1 - π), so saturated logits stay finite.
struct RiskVar {
  Var pi;
  Var log_pi;
  Var log1m_pi;
};

RiskVar risk_from_logit(const Var& logit);
RiskVar risk_from_probability(const Var& pi);

// Network outputs on a tape. Shapes: mu, log_var B x 5; a, b B x 1.
struct PosteriorVars {
  Var mu;
  Var log_var;
  Var a;
  Var b;
};

PosteriorVars posterior_forward(const LpsModel& model, const Var& x, const Var& theta_q);

struct PosteriorBatch {
  Matrix mu;   // B x 5
  Matrix var;  // B x 5
  Vector a;
  Vector b;
};

// Throws InferenceError on non-finite outputs.
PosteriorBatch posterior_forward(const LpsModel& model, const Matrix& x);

struct MapVars {
  RiskVar risk;
  Var log_z;  // B x 5
};

MapVars map_forward(const LpsModel& model, const Var& x, const Var& theta_n);

struct MapBatch {
  Vector pi;
  Matrix z;  // B x 5, natural units
};

MapBatch map_forward(const LpsModel& model, const Matrix& x);

// Per-patient summands of the log joint, each B x 1.
struct JointVars {
  Var log_p_pi;
  Var log_p_y;
  Var log_p_z;
  Var log_p_x;

  Var total() const { return log_p_pi + log_p_y + log_p_z + log_p_x; }
};

// log p(π) + log p(y | π) + Σ_m log p(z_m | π, φ) + log p(x | z, ψ) with
// log z given directly. `phi` holds the ten mixture means, `psi` the weights
// of f. `x` is standardized, `y` a 0/1 column.
JointVars log_joint_terms(const LpsModel& model, const RiskVar& risk, const Var& log_z, const Var& x, const Var& y,
                          const Var& phi, const Var& psi);

// log p(x | z, ψ) alone: vitals through g on the standardized scale plus the
// remaining features through f.
Var log_likelihood(const LpsModel& model, const Var& log_z, const Var& x, const Var& psi);

// Σ_{m,i} log N(μ_{m,i}; μ̃_{m,i}, 0.01²), 1 x 1.
Var log_hyperprior(const LpsModel& model, const Var& phi);
double log_hyperprior(const LpsModel& model, const Vector& phi);

struct JointBreakdown {
  double log_p_pi = 0.0;
  double log_p_y = 0.0;
  double log_p_z = 0.0;
  double log_p_x = 0.0;

  double total() const { return log_p_pi + log_p_y + log_p_z + log_p_x; }
};

// Single patient, at the model's current φ and ψ.
JointBreakdown log_joint(const LpsModel& model, double pi, const ConceptVector& z, const RowVector& x, int y);

// Per-patient log joint totals for a batch of point estimates.
Vector log_joint_batch(const LpsModel& model, const Vector& pi, const Matrix& z, const Matrix& x, const Vector& y);

// 1[π̂ ≥ η]
inline int classify(double pi_hat, double eta) { return pi_hat >= eta ? 1 : 0; }

struct Prediction {
  double pi = 0.0;
  ConceptVector z{};
  int y = 0;
  double eta = 0.5;
  JointBreakdown terms;
};

// MAP-network prediction for one standardized feature row.
Prediction predict(const LpsModel& model, const RowVector& x);

// Simple dense classifier on the same features.
struct BaselineModel {
  FeatureLayout layout;
  FeatureScaler scaler;
  Architecture arch;
  Mlp net;
  Vector params;

  static BaselineModel create(const FeatureLayout& layout, const FeatureScaler& scaler, const Architecture& arch,
                              double prevalence, std::uint64_t seed);
  Vector logits(const Matrix& x) const;
  Vector predict_proba(const Matrix& x) const;
};

inline constexpr const char* kModelFormat = "lps-model/1";
inline constexpr const char* kBaselineFormat = "lps-baseline/1";

void to_json(nlohmann::json& j, const LpsModel& m);
void from_json(const nlohmann::json& j, LpsModel& m);
void to_json(nlohmann::json& j, const BaselineModel& m);
void from_json(const nlohmann::json& j, BaselineModel& m);

void write_model(const LpsModel& model, const std::filesystem::path& path);
LpsModel read_model(const std::filesystem::path& path);
void write_baseline(const BaselineModel& model, const std::filesystem::path& path);
BaselineModel read_baseline(const std::filesystem::path& path);

}  // namespace lps

#endif
