#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>
#include <random>

#include "doctest.h"
#include "lps/distributions.hpp"
#include "lps/metrics.hpp"
#include "lps/training.hpp"

using namespace lps;

namespace {

struct Fixture {
  Cohort cohort;
  Matrix x;
  Vector y;
  LpsModel model;
};

const Fixture& fixture() {
  static const Fixture f = [] {
    GeneratorConfig cfg;
    cfg.size = 300;
    cfg.seed = 21;
    Fixture f;
    f.cohort = generate_cohort(cfg);
    const FeatureLayout layout;
    const Matrix raw = feature_matrix(f.cohort, layout);
    const FeatureScaler scaler = FeatureScaler::fit(raw);
    f.x = scaler.apply(raw);
    f.y = outcome_vector(f.cohort);
    f.model = LpsModel::create(layout, scaler, fit_concept_priors(f.cohort), Architecture{}, cfg.windkessel, 4);
    std::mt19937_64 rng(8);
    std::normal_distribution<double> n(0.0, 0.02);
    for (auto& v : f.model.theta_q) v += n(rng);
    for (auto& v : f.model.psi) v += n(rng);
    for (auto& v : f.model.priors.means) v += n(rng) * 0.1;
    return f;
  }();
  return f;
}

ElboVars bound(Tape& t, const LpsModel& m, const Matrix& x, const Vector& y, const ElboDraws& d, bool warmup) {
  return elbo_minibatch(m, t.constant(x), y, t.constant(Matrix(m.theta_q)), t.constant(Matrix(m.priors.means)),
                        t.constant(Matrix(m.psi)), d, warmup);
}

// Small cohort split for short training runs.
struct Small {
  Dataset train, val;
  LpsModel model;
  TrainConfig cfg;
};

Small small_setup() {
  GeneratorConfig g;
  g.size = 300;
  g.seed = 5;
  const CohortSplits sp = split_cohort(generate_cohort(g), SplitSpec{0.6, 0.2, 0.2, 3});
  const FeatureLayout layout;
  const FeatureScaler scaler = FeatureScaler::fit(feature_matrix(sp.train, layout));
  Small s;
  s.train = Dataset::from_cohort(sp.train, scaler, layout);
  s.val = Dataset::from_cohort(sp.val, scaler, layout);
  s.cfg.epochs = 3;
  s.cfg.warmup_epochs = 1;
  s.cfg.seed = 9;
  s.cfg.arch = {{16}, {8}};
  s.model = LpsModel::create(layout, scaler, fit_concept_priors(sp.train), s.cfg.arch, g.windkessel, 2);
  return s;
}

}  // namespace

TEST_CASE("bound total equals the sum of its parts") {
  const Fixture& f = fixture();
  std::mt19937_64 rng(1);
  const Matrix x = f.x.topRows(32);
  const Vector y = f.y.head(32);
  const ElboDraws d = ElboDraws::sample(rng, 32);
  for (bool warmup : {false, true}) {
    Tape t;
    const ElboTerms e = bound(t, f.model, x, y, d, warmup).values();
    CHECK(e.warmup == warmup);
    CHECK(std::abs(e.total - e.sum_of_parts()) < 1e-10 * std::max(1.0, std::abs(e.total)));
    CHECK(std::isfinite(e.log_p_x));
    CHECK(e.log_p_pi == 0.0);  // flat Beta(1, 1) prior
  }
}

TEST_CASE("warmup leaves psi without gradient") {
  const Fixture& f = fixture();
  std::mt19937_64 rng(2);
  const ElboDraws d = ElboDraws::sample(rng, 16);
  for (bool warmup : {true, false}) {
    Tape t;
    const Var psi = t.leaf(Matrix(f.model.psi));
    const ElboVars e = elbo_minibatch(f.model, t.constant(Matrix(f.x.topRows(16))), f.y.head(16),
                                      t.constant(Matrix(f.model.theta_q)), t.constant(Matrix(f.model.priors.means)),
                                      psi, d, warmup);
    const double g = t.backward(e.total)[psi].cwiseAbs().maxCoeff();
    if (warmup)
      CHECK(g == 0.0);
    else
      CHECK(g > 0.0);
  }
}

TEST_CASE("uniform posterior head gives zero -log q(pi)") {
  LpsModel m = fixture().model;
  const int hidden = m.posterior_net.widths()[m.posterior_net.widths().size() - 2];
  const Eigen::Index bias = m.posterior_net.output_bias_offset();
  const Eigen::Index w = bias - Eigen::Index(hidden) * 12;
  for (int c : {10, 11}) {
    m.theta_q.segment(w + Eigen::Index(c) * hidden, hidden).setZero();
    m.theta_q(bias + c) = -1e3;  // 1 + 10 sigmoid(-1000) = 1 exactly
  }
  const PosteriorBatch p = posterior_forward(m, fixture().x.topRows(8));
  CHECK(p.a.maxCoeff() == 1.0);
  CHECK(p.b.minCoeff() == 1.0);
  std::mt19937_64 rng(3);
  const ElboDraws d = ElboDraws::sample(rng, 8);
  Tape t;
  const ElboVars e = bound(t, m, fixture().x.topRows(8), fixture().y.head(8), d, false);
  CHECK(e.neg_log_q_pi.value().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("bound with fixed draws matches an independent recomputation") {
  const Fixture& f = fixture();
  const int n = 12;
  std::mt19937_64 rng(4);
  const ElboDraws d = ElboDraws::sample(rng, n);
  const Matrix x = f.x.topRows(n);
  const Vector y = f.y.head(n);
  Tape t;
  const ElboVars e = bound(t, f.model, x, y, d, false);

  const PosteriorBatch p = posterior_forward(f.model, x);
  double total = log_hyperprior(f.model, f.model.priors.means);
  for (int i = 0; i < n; ++i) {
    ConceptVector z;
    double neg_log_q_z = 0.0;
    for (int m = 0; m < 5; ++m) {
      z[std::size_t(m)] = std::exp(p.mu(i, m) + std::sqrt(p.var(i, m)) * d.eps(i, m));
      neg_log_q_z -= lognormal_logpdf(z[std::size_t(m)], p.mu(i, m), p.var(i, m));
    }
    const double pi = std::pow(1.0 - std::pow(1.0 - d.u(i), 1.0 / p.b(i)), 1.0 / p.a(i));
    const JointBreakdown j = log_joint(f.model, pi, z, x.row(i), int(y(i)));
    const double neg_log_q_pi = -kumaraswamy_logpdf(pi, p.a(i), p.b(i));
    const double per_patient = j.total() + neg_log_q_z + neg_log_q_pi;
    CHECK(e.per_patient.value()(i, 0) == doctest::Approx(per_patient).epsilon(1e-9));
    CHECK(e.neg_log_q_pi.value()(i, 0) == doctest::Approx(neg_log_q_pi).epsilon(1e-9));
    total += per_patient;
  }
  CHECK(e.total.scalar() == doctest::Approx(total).epsilon(1e-10));
}

TEST_CASE("single-draw bound averages to its quadrature value") {
  // One patient, warmup form: E_q[log p(y|π) + Σ_m log p(z_m|π) - log q(z) - log q(π)].
  // Each mixture term is a 2-D integral over (u, ε_m); -log q(z) uses the
  // log-normal entropy in closed form.
  const Fixture& f = fixture();
  const LpsModel& model = f.model;
  const int patient = 7;
  const RowVector xi = f.x.row(patient);
  const int yi = int(f.y(patient));
  const PosteriorBatch p = posterior_forward(model, Matrix(xi));
  const double a = p.a(0), b = p.b(0);
  auto pi_of = [&](double u) { return std::pow(-std::expm1(std::log1p(-u) / b), 1.0 / a); };

  boost::math::quadrature::tanh_sinh<double> outer;
  double expected = outer.integrate([&](double u) {
    const double pi = pi_of(u);
    return (yi == 1 ? std::log(pi) : std::log1p(-pi)) - kumaraswamy_logpdf(pi, a, b);
  }, 0.0, 1.0);
  for (int m = 0; m < 5; ++m) {
    const double mu = p.mu(0, m), sd = std::sqrt(p.var(0, m));
    const double mh = model.priors.means(2 * m + 1), vh = model.priors.variance(m, 1);
    const double ml = model.priors.means(2 * m), vl = model.priors.variance(m, 0);
    expected += outer.integrate([&](double u) {
      const double pi = pi_of(u);
      auto inner = [&](double eps) {
        const double z = std::exp(mu + sd * eps);
        return mixture_logpdf(z, pi, mh, vh, ml, vl) * std::exp(-0.5 * eps * eps) / std::sqrt(2.0 * M_PI);
      };
      return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(inner, -12.0, 12.0, 8, 1e-12);
    }, 0.0, 1.0);
    expected += mu + 0.5 * std::log(2.0 * M_PI * M_E * p.var(0, m));
  }

  const int draws = 100000, chunk = 10000;
  std::mt19937_64 rng(12);
  double s = 0.0, s2 = 0.0;
  for (int done = 0; done < draws; done += chunk) {
    const ElboDraws d = ElboDraws::sample(rng, chunk);
    Tape t;
    const ElboVars e = bound(t, model, xi.replicate(chunk, 1), Vector::Constant(chunk, yi), d, true);
    const Matrix v = e.per_patient.value();
    s += v.sum();
    s2 += v.squaredNorm();
  }
  const double mean = s / draws;
  const double se = std::sqrt((s2 / draws - mean * mean) / (draws - 1));
  INFO("quadrature " << expected << " mc " << mean << " se " << se);
  CHECK(std::abs(mean - expected) < 3.0 * se);
}

TEST_CASE("binary cross-entropy on constant outputs") {
  Tape t;
  const double l = 0.7, p = 1.0 / (1.0 + std::exp(-l));
  const Var logits = t.constant(Matrix::Constant(4, 1, l));
  const Matrix ones = bce_with_logits(logits, t.constant(Matrix::Ones(4, 1))).value();
  const Matrix zeros = bce_with_logits(logits, t.constant(Matrix::Zero(4, 1))).value();
  CHECK((ones.array() - (-std::log(p))).abs().maxCoeff() < 1e-14);
  CHECK((zeros.array() - (-std::log(1.0 - p))).abs().maxCoeff() < 1e-14);
  // Saturated logits stay finite.
  const Matrix big = bce_with_logits(t.constant(Matrix::Constant(1, 1, -800.0)), t.constant(Matrix::Ones(1, 1))).value();
  CHECK(big(0, 0) == doctest::Approx(800.0));
}

TEST_CASE("posterior modes") {
  CHECK(beta_mode({3.0, 2.0}) == doctest::Approx(2.0 / 3.0));
  CHECK(beta_mode({4.5, 4.5}) == doctest::Approx(0.5));
  CHECK(lognormal_mode({0.0, 1.0}) == doctest::Approx(std::exp(-1.0)));
  const LpsModel& m = fixture().model;
  const Matrix x = fixture().x.topRows(5);
  const PosteriorBatch p = posterior_forward(m, x);
  const PointEstimates e = lps_q_inference(m, x);
  for (int i = 0; i < 5; ++i) {
    CHECK(e.pi(i) == doctest::Approx(beta_mode({p.a(i), p.b(i)})));
    for (int c = 0; c < 5; ++c) CHECK(e.z(i, c) == doctest::Approx(lognormal_mode({p.mu(i, c), p.var(i, c)})));
  }
}

TEST_CASE("warm start copies the posterior concept head") {
  LpsModel m = fixture().model;
  init_map_from_posterior(m);
  const Matrix x = fixture().x.topRows(6);
  const PosteriorBatch p = posterior_forward(m, x);
  const MapBatch n = map_forward(m, x);
  CHECK((n.z.array().log() - p.mu.array()).abs().maxCoeff() < 1e-12);
  LpsModel other = m;
  other.map_net = Mlp({m.layout.total(), 32, 6}, Activation::relu);
  other.theta_n = Vector::Zero(other.map_net.param_count());
  CHECK_THROWS_AS(init_map_from_posterior(other), UsageError);
}

TEST_CASE("integrated gradients") {
  const RowVector w = (RowVector(3) << 0.5, -2.0, 1.25).finished();
  Classifier linear = [&](const Var& x) {
    Tape& t = *x.tape();
    return affine(x, t.constant(Matrix(w.transpose())), t.constant(Matrix::Zero(1, 1)));
  };
  const RowVector x = (RowVector(3) << 1.0, 2.0, -3.0).finished();
  const RowVector ref = (RowVector(3) << 0.5, 0.0, 1.0).finished();
  const RowVector a = integrated_gradients(linear, x, ref, 7);
  CHECK((a - w.cwiseProduct(x - ref)).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(integrated_gradients(linear, x, x).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(integrated_gradients(linear, x, ref, 0), UsageError);

  // Completeness on a nonlinear network.
  GeneratorConfig g;
  const FeatureLayout layout;
  FeatureScaler scaler;
  scaler.mean = RowVector::Zero(layout.total());
  scaler.sd = RowVector::Ones(layout.total());
  const BaselineModel b = BaselineModel::create(layout, scaler, Architecture{}, 0.1, 6);
  BaselineModel shaken = b;
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 0.3);
  for (auto& v : shaken.params) v += n(rng) * 0.1;
  const RowVector xi = fixture().x.row(0);
  const RowVector zero = RowVector::Zero(xi.size());
  const RowVector attr = integrated_gradients(baseline_classifier(shaken), xi, zero, 256);
  const double gap = shaken.predict_proba(Matrix(xi))(0) - shaken.predict_proba(Matrix(zero))(0);
  CHECK(std::abs(attr.sum() - gap) <= 0.01 * std::abs(gap));
}

TEST_CASE("short training runs are deterministic and checkpoint at the best epoch") {
  auto run_all = [] {
    Small s = small_setup();
    const RunResult a = train_variational_em(s.model, s.train, s.val, s.cfg);
    const RunResult b = train_map_network(s.model, s.train, s.val, s.cfg);
    BaselineModel base = BaselineModel::create(s.model.layout, s.model.scaler, s.cfg.arch, s.train.y.mean(), 1);
    const RunResult c = train_baseline(base, s.train, s.val, s.cfg);
    return std::tuple{s.model, base, std::array{a, b, c}};
  };
  const auto [m1, b1, r1] = run_all();
  const auto [m2, b2, r2] = run_all();
  CHECK(m1.theta_q == m2.theta_q);
  CHECK(m1.theta_n == m2.theta_n);
  CHECK(m1.psi == m2.psi);
  CHECK(m1.priors.means == m2.priors.means);
  CHECK(b1.params == b2.params);
  for (std::size_t k = 0; k < 3; ++k) {
    REQUIRE(r1[k].trace.size() == 3);
    int argmax = 0;
    for (std::size_t e = 0; e < 3; ++e) {
      CHECK(r1[k].trace[e].objective == r2[k].trace[e].objective);
      CHECK(r1[k].trace[e].val_auc == r2[k].trace[e].val_auc);
      if (r1[k].trace[e].val_auc > r1[k].trace[std::size_t(argmax)].val_auc) argmax = int(e);
    }
    CHECK(r1[k].best_epoch == argmax + 1);
  }
  // Stage one: warmup epoch reports its total without log p(x | z, ψ).
  const EpochRecord& first = r1[0].trace[0];
  CHECK(first.terms.warmup);
  CHECK(!r1[0].trace[1].terms.warmup);
  CHECK(first.terms.total == doctest::Approx(first.terms.sum_of_parts()).epsilon(1e-10));
  CHECK(first.elbo == doctest::Approx(first.terms.total + first.terms.log_p_x).epsilon(1e-10));
}

TEST_CASE("non-finite inputs stop training with a training error") {
  Small s = small_setup();
  s.train.x(4, 0) = std::nan("");
  CHECK_THROWS_AS(train_variational_em(s.model, s.train, s.val, s.cfg), TrainingError);
  BaselineModel base = BaselineModel::create(s.model.layout, s.model.scaler, s.cfg.arch, 0.1, 1);
  CHECK_THROWS_AS(train_baseline(base, s.train, s.val, s.cfg), TrainingError);
}

TEST_CASE("training config round trip and validation") {
  TrainConfig c;
  c.lr_map = 5e-4;
  c.epochs = 17;
  c.seed = 99;
  c.map_warm_start = false;
  c.arch = {{32, 16}, {8}};
  const TrainConfig back = nlohmann::json(c).get<TrainConfig>();
  CHECK(back.lr_map == c.lr_map);
  CHECK(back.epochs == 17);
  CHECK(back.seed == 99);
  CHECK(!back.map_warm_start);
  CHECK(back.arch.hidden == std::vector<int>{32, 16});
  CHECK(back.arch.forward_hidden == std::vector<int>{8});
  TrainConfig bad;
  bad.warmup_epochs = 300;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = TrainConfig{};
  bad.lr_vem = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}
