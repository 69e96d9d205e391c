#include "lps/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lps/special.hpp"

namespace lps {

namespace {

void require_same_size(std::size_t a, std::size_t b, const char* what) {
  if (a != b) throw MetricError(std::string(what) + ": inputs differ in length");
}

// Average ranks, 1-based.
std::vector<double> ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return v[i] < v[j]; });
  std::vector<double> r(v.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i + 1;
    while (j < order.size() && v[order[j]] == v[order[i]]) ++j;
    const double avg = 0.5 * double(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) r[order[k]] = avg;
    i = j;
  }
  return r;
}

double mean_of(std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0) / double(v.size()); }

double sample_variance(std::span<const double> v) {
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return ss / double(v.size() - 1);
}

}  // namespace

double auc(std::span<const double> scores, std::span<const double> labels) {
  require_same_size(scores.size(), labels.size(), "auc");
  const std::vector<double> r = ranks(scores);
  double pos = 0.0, rank_sum = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0.0 && labels[i] != 1.0) throw MetricError("auc: labels must be 0 or 1");
    if (labels[i] == 1.0) pos += 1.0, rank_sum += r[i];
  }
  const double neg = double(labels.size()) - pos;
  if (pos == 0.0 || neg == 0.0) throw MetricError("auc: both classes must be present");
  return (rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg);
}

F1Result f1_thresholded_co(std::span<const double> predicted, std::span<const double> truth, double cutoff) {
  require_same_size(predicted.size(), truth.size(), "f1_thresholded_co");
  double tp = 0.0, fp = 0.0, fn = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const bool p = predicted[i] < cutoff;
    const bool t = truth[i] < cutoff;
    tp += p && t;
    fp += p && !t;
    fn += !p && t;
  }
  if (tp + fp == 0.0 || tp + fn == 0.0) return {0.0, true};
  return {2.0 * tp / (2.0 * tp + fp + fn), false};
}

double f1_all_positive(std::span<const double> truth, double cutoff) {
  std::vector<double> all(truth.size(), -INFINITY);
  return f1_thresholded_co(all, truth, cutoff).f1;
}

double r_squared(std::span<const double> truth, std::span<const double> predicted) {
  require_same_size(truth.size(), predicted.size(), "r_squared");
  if (truth.size() < 2) throw MetricError("r_squared: need at least two values");
  const double m = mean_of(truth);
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ss_res += (truth[i] - predicted[i]) * (truth[i] - predicted[i]);
    ss_tot += (truth[i] - m) * (truth[i] - m);
  }
  if (ss_tot == 0.0) throw MetricError("r_squared: truth is constant");
  return 1.0 - ss_res / ss_tot;
}

double median(std::vector<double> values) {
  if (values.empty()) throw MetricError("median: empty input");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

Spread median_half_iqr(std::vector<double> values) {
  if (values.empty()) throw MetricError("median_half_iqr: empty input");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  const std::size_t half = (n + 1) / 2;  // includes the median when n is odd
  const std::vector<double> lower(values.begin(), values.begin() + half);
  const std::vector<double> upper(values.end() - half, values.end());
  return {median(values), 0.5 * (median(upper) - median(lower))};
}

WelchResult welch_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw MetricError("welch_t_test: each sample needs at least two values");
  const double va = sample_variance(a) / double(a.size());
  const double vb = sample_variance(b) / double(b.size());
  const double se2 = va + vb;
  if (!(se2 > 0.0)) throw MetricError("welch_t_test: both samples have zero variance");
  WelchResult r;
  r.t = (mean_of(a) - mean_of(b)) / std::sqrt(se2);
  r.dof = se2 * se2 / (va * va / double(a.size() - 1) + vb * vb / double(b.size() - 1));
  r.p = std::min(1.0, 2.0 * student_t_cdf(-std::abs(r.t), r.dof));
  return r;
}

double spearman(std::span<const double> a, std::span<const double> b) {
  require_same_size(a.size(), b.size(), "spearman");
  if (a.size() < 2) throw MetricError("spearman: need at least two values");
  const std::vector<double> ra = ranks(a);
  const std::vector<double> rb = ranks(b);
  const double ma = mean_of(ra), mb = mean_of(rb);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) throw MetricError("spearman: constant input");
  return sab / std::sqrt(saa * sbb);
}

double median_abs_error(std::span<const double> truth, std::span<const double> predicted) {
  require_same_size(truth.size(), predicted.size(), "median_abs_error");
  std::vector<double> err(truth.size());
  for (std::size_t i = 0; i < truth.size(); ++i) err[i] = std::abs(truth[i] - predicted[i]);
  return median(std::move(err));
}

VitalsColumns reconstruct_vitals(const Matrix& z, const WindkesselConfig& cfg) {
  if (z.cols() != 5) throw UsageError("reconstruct_vitals: expected five concept columns");
  VitalsColumns out;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const ConceptVector c{z(i, 0), z(i, 1), z(i, 2), z(i, 3), z(i, 4)};
    const VitalsEstimate v = simulate_vitals(c, cfg);
    out.hr.push_back(v.hr);
    out.bp_sys.push_back(v.bp_sys);
    out.bp_dias.push_back(v.bp_dias);
  }
  return out;
}

}  // namespace lps
