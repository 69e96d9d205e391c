#ifndef LPS_TRAINING_HPP
#define LPS_TRAINING_HPP

// Stage one (variational EM over φ, ψ and the posterior network), stage two
// (the MAP network), the baseline classifier, posterior-mode inference and
// Integrated Gradients.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <vector>

#include "json.hpp"

#include "lps/model.hpp"

namespace lps {

struct TrainConfig {
  double lr_vem = 1e-4;
  double lr_map = 1e-3;
  double lr_baseline = 1e-3;
  int epochs = 200;
  int batch = 32;
  int warmup_epochs = 10;
  std::uint64_t seed = 0;
  double clip_norm = 10.0;  // global gradient norm; <= 0 disables clipping
  bool map_warm_start = true;  // start the MAP network from the trained posterior network
  Architecture arch;

  // Throws ConfigError.
  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);
TrainConfig read_train_config(const std::filesystem::path& path);

// Standardized features with their labels.
struct Dataset {
  Matrix x;
  Vector y;
  std::vector<std::int64_t> ids;

  static Dataset from_cohort(const Cohort& cohort, const FeatureScaler& scaler, const FeatureLayout& layout);
  Eigen::Index size() const { return x.rows(); }
};

// Values of one minibatch bound, each summed over the batch.
struct ElboTerms {
  double log_p_pi = 0.0;
  double log_p_y = 0.0;
  double log_p_z = 0.0;
  double log_p_x = 0.0;  // reported in warmup too, but then left out of total
  double neg_log_q_z = 0.0;
  double neg_log_q_pi = 0.0;
  double log_p_phi = 0.0;
  double total = 0.0;
  bool warmup = false;

  // Sum of the parts that enter total.
  double sum_of_parts() const;
};

struct ElboVars {
  JointVars joint;    // per patient, B x 1
  Var neg_log_q_z;    // B x 1
  Var neg_log_q_pi;   // B x 1
  Var log_p_phi;      // 1 x 1
  Var per_patient;    // B x 1, the patient part of total
  Var total;          // 1 x 1
  bool warmup = false;

  ElboTerms values() const;
};

// Reparameterization noise: ε ~ N(0, 1) for the concepts and u ~ U(0, 1) for
// the risk, one draw per patient.
struct ElboDraws {
  Matrix eps;  // B x 5
  Vector u;    // B

  static ElboDraws sample(std::mt19937_64& rng, Eigen::Index batch);
};

ElboVars elbo_minibatch(const LpsModel& model, const Var& x, const Vector& y, const Var& theta_q, const Var& phi,
                        const Var& psi, const ElboDraws& draws, bool warmup);

struct EpochRecord {
  int epoch = 0;           // 1-based
  double objective = 0.0;  // mean over batches of the optimized objective
  double elbo = 0.0;       // stage one: mean bound including log p(x | z, ψ)
  ElboTerms terms;         // stage one: batch means of each term
  double val_auc = 0.0;
};

struct RunResult {
  std::vector<EpochRecord> trace;
  int best_epoch = 0;
  double best_val_auc = 0.0;
};

void write_trace_csv(const RunResult& run, const std::filesystem::path& path, bool with_terms);

// Progress hook called after every epoch.
using EpochCallback = std::function<void(const EpochRecord&)>;

// Adam ascent on the bound; updates theta_q, priors.means and psi in place to
// the checkpoint with the best validation AUC of the posterior Beta mode.
RunResult train_variational_em(LpsModel& model, const Dataset& train, const Dataset& val, const TrainConfig& cfg,
                               const EpochCallback& on_epoch = {});

// Mean per-patient log joint of the MAP network's estimates (stage-two
// objective), at the model's φ and ψ.
double map_objective(const LpsModel& model, const Dataset& data);

// Adam ascent on Σ log_joint(map_forward(x)); φ and ψ stay fixed. With
// cfg.map_warm_start the network first copies the posterior network.
RunResult train_map_network(LpsModel& model, const Dataset& train, const Dataset& val, const TrainConfig& cfg,
                            const EpochCallback& on_epoch = {});

// Per-row binary cross-entropy from logits, B x 1.
Var bce_with_logits(const Var& logits, const Var& y);

RunResult train_baseline(BaselineModel& model, const Dataset& train, const Dataset& val, const TrainConfig& cfg,
                         const EpochCallback& on_epoch = {});

struct PointEstimates {
  Vector pi;
  Matrix z;  // n x 5, natural units
};

// Modes of the variational posterior.
PointEstimates lps_q_inference(const LpsModel& model, const Matrix& x);
PointEstimates lps_inference(const LpsModel& model, const Matrix& x);

// Mean log joint of arbitrary point estimates; π is clamped into
// [1e-12, 1 - 1e-12].
double mean_log_joint(const LpsModel& model, const PointEstimates& est, const Dataset& data);

// Maps a batch of inputs (rows) to one output per row.
using Classifier = std::function<Var(const Var& x)>;

// (x - x') ⊙ mean over k of ∇F(x' + (k - 1/2)/steps (x - x')), all path
// points evaluated as one batch.
RowVector integrated_gradients(const Classifier& f, const RowVector& x, const RowVector& baseline, int steps = 256);

// Probability output of the baseline as a differentiable classifier.
Classifier baseline_classifier(const BaselineModel& model);

}  // namespace lps

#endif
