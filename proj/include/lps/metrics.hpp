#ifndef LPS_METRICS_HPP
#define LPS_METRICS_HPP

// Evaluation metrics and significance tests.

#include <span>
#include <vector>

#include "lps/diff.hpp"
#include "lps/windkessel.hpp"

namespace lps {

// Probability that a random positive outranks a random negative, ties
// counting one half. Labels are 0/1. Throws MetricError unless both classes
// are present.
double auc(std::span<const double> scores, std::span<const double> labels);

struct F1Result {
  double f1 = 0.0;
  bool undefined = false;  // no positives in truth or prediction
};

// Binarizes both lists at the cutoff with CO below it as the positive class.
F1Result f1_thresholded_co(std::span<const double> predicted, std::span<const double> truth, double cutoff = 4.0);

// F1 of predicting every patient positive (low CO).
double f1_all_positive(std::span<const double> truth, double cutoff = 4.0);

// 1 - SS_res / SS_tot about the mean of the truth.
double r_squared(std::span<const double> truth, std::span<const double> predicted);

double median(std::vector<double> values);

struct Spread {
  double median = 0.0;
  double half_iqr = 0.0;
};

// Median and (Q3 - Q1) / 2 with Tukey hinges: the lower and upper halves
// include the median when the count is odd.
Spread median_half_iqr(std::vector<double> values);

struct WelchResult {
  double t = 0.0;
  double dof = 0.0;
  double p = 1.0;  // two-sided
};

WelchResult welch_t_test(std::span<const double> a, std::span<const double> b);

// Pearson correlation of average ranks.
double spearman(std::span<const double> a, std::span<const double> b);

double median_abs_error(std::span<const double> truth, std::span<const double> predicted);

struct VitalsColumns {
  std::vector<double> hr;
  std::vector<double> bp_sys;
  std::vector<double> bp_dias;
};

// Runs the Windkessel model on each row of z (n x 5, natural units).
VitalsColumns reconstruct_vitals(const Matrix& z, const WindkesselConfig& cfg = {});

}  // namespace lps

#endif
