#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "lps/metrics.hpp"

using namespace lps;

TEST_CASE("auc") {
  CHECK(auc(std::vector{0.1, 0.4, 0.35, 0.8}, std::vector{0.0, 0.0, 1.0, 1.0}) == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(auc(std::vector{0.1, 0.2, 0.8, 0.9}, std::vector{0.0, 0.0, 1.0, 1.0}) == 1.0);
  CHECK(auc(std::vector{0.9, 0.8, 0.2, 0.1}, std::vector{0.0, 0.0, 1.0, 1.0}) == 0.0);
  CHECK(auc(std::vector(6, 0.3), std::vector{0.0, 1.0, 0.0, 1.0, 1.0, 0.0}) == 0.5);
  CHECK_THROWS_AS(auc(std::vector{0.1, 0.2}, std::vector{1.0, 1.0}), MetricError);
  CHECK_THROWS_AS(auc(std::vector{0.1, 0.2}, std::vector{1.0, 2.0}), MetricError);

  // Brute-force pair count and invariance under increasing transforms.
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> level(0, 9);
  std::bernoulli_distribution coin(0.3);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> s(200), y(200);
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = level(rng), y[i] = coin(rng);
    double pairs = 0.0, wins = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i)
      for (std::size_t j = 0; j < s.size(); ++j)
        if (y[i] == 1.0 && y[j] == 0.0) pairs += 1.0, wins += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
    const double a = auc(s, y);
    CHECK(a == doctest::Approx(wins / pairs).epsilon(1e-13));
    std::vector<double> t(s.size());
    std::transform(s.begin(), s.end(), t.begin(), [](double v) { return std::exp(v) - 40.0; });
    CHECK(auc(t, y) == a);
  }
}

TEST_CASE("thresholded CO F1") {
  const std::vector truth{3.0, 3.5, 5.0, 3.9, 6.0};
  CHECK(f1_thresholded_co(truth, truth).f1 == 1.0);
  // TP = 2, FP = 1, FN = 1.
  const std::vector pred{3.0, 3.5, 3.0, 4.5, 6.0};
  CHECK(f1_thresholded_co(pred, truth).f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  const std::vector wrong{5.0, 5.0, 3.0, 5.0, 2.0};
  CHECK(f1_thresholded_co(wrong, truth).f1 == 0.0);
  const F1Result none = f1_thresholded_co(std::vector{5.0, 6.0}, std::vector{7.0, 8.0});
  CHECK(none.undefined);
  CHECK(none.f1 == 0.0);
  // Exactly at the cutoff counts as normal.
  CHECK(f1_thresholded_co(std::vector{4.0, 3.0}, std::vector{3.0, 3.0}).f1 == doctest::Approx(2.0 / 3.0));
  CHECK(f1_all_positive(truth) == doctest::Approx(2.0 * 3.0 / (3.0 + 5.0)).epsilon(1e-15));
  // Paired permutations leave the score unchanged.
  std::vector<std::size_t> idx{4, 2, 0, 3, 1};
  std::vector<double> p2, t2;
  for (auto i : idx) p2.push_back(pred[i]), t2.push_back(truth[i]);
  CHECK(f1_thresholded_co(p2, t2).f1 == f1_thresholded_co(pred, truth).f1);
}

TEST_CASE("r squared") {
  const std::vector t{1.0, 2.0, 3.0};
  CHECK(r_squared(t, t) == 1.0);
  CHECK(r_squared(t, std::vector{2.0, 2.0, 2.0}) == 0.0);
  CHECK(r_squared(t, std::vector{1.0, 2.0, 4.0}) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(r_squared(std::vector{3.0, 1.0, 2.0}, std::vector{4.0, 1.0, 2.0}) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK_THROWS_AS(r_squared(std::vector{2.0, 2.0}, std::vector{1.0, 2.0}), MetricError);
  CHECK_THROWS_AS(r_squared(std::vector{2.0}, std::vector{1.0}), MetricError);
}

TEST_CASE("median and half IQR") {
  Spread s = median_half_iqr({1, 2, 3, 4, 5});
  CHECK(s.median == 3.0);
  CHECK(s.half_iqr == 1.0);
  s = median_half_iqr({5, 1, 4, 2, 3});
  CHECK(s.median == 3.0);
  CHECK(s.half_iqr == 1.0);
  // Even count: halves {1,2,3} and {4,5,6}.
  s = median_half_iqr({1, 2, 3, 4, 5, 6});
  CHECK(s.median == 3.5);
  CHECK(s.half_iqr == 1.5);
  s = median_half_iqr({7, 7, 7});
  CHECK(s.median == 7.0);
  CHECK(s.half_iqr == 0.0);
  s = median_half_iqr({2.5});
  CHECK(s.median == 2.5);
  CHECK(s.half_iqr == 0.0);
  CHECK_THROWS_AS(median_half_iqr({}), MetricError);
}

TEST_CASE("welch t test") {
  const std::vector a{1.0, 2.0, 3.0};
  const std::vector b{2.0, 3.0, 4.0};
  const WelchResult r = welch_t_test(a, b);
  CHECK(r.t == doctest::Approx(-std::sqrt(1.5)).epsilon(1e-14));
  CHECK(r.dof == doctest::Approx(4.0).epsilon(1e-14));
  CHECK(r.p == doctest::Approx(0.2878641347266908).epsilon(1e-10));
  const WelchResult s = welch_t_test(b, a);
  CHECK(s.t == -r.t);
  CHECK(s.p == r.p);
  const WelchResult same = welch_t_test(a, a);
  CHECK(same.t == 0.0);
  CHECK(same.p == 1.0);
  // Unequal sizes and variances.
  CHECK(welch_t_test(std::vector{1.5, 2.25, 3.1, 8.0}, b).p == doctest::Approx(0.6753500868827804).epsilon(1e-9));
  CHECK_THROWS_AS(welch_t_test(std::vector{1.0, 1.0}, std::vector{2.0, 2.0}), MetricError);
  CHECK_THROWS_AS(welch_t_test(std::vector{1.0}, b), MetricError);
}

TEST_CASE("spearman and median absolute error") {
  CHECK(spearman(std::vector{1.0, 2.0, 2.0, 5.0, 3.0}, std::vector{3.0, 1.0, 4.0, 4.0, 9.0}) ==
        doctest::Approx(0.605263157894737).epsilon(1e-13));
  CHECK(spearman(std::vector{1.0, 2.0, 3.0}, std::vector{10.0, 100.0, 1000.0}) == doctest::Approx(1.0));
  CHECK(spearman(std::vector{1.0, 2.0, 3.0}, std::vector{3.0, 2.0, 1.0}) == doctest::Approx(-1.0));
  CHECK(median_abs_error(std::vector{120.0, 110.0, 130.0}, std::vector{118.0, 115.0, 129.0}) == 2.0);
}

TEST_CASE("reconstruct vitals") {
  Matrix z(3, 5);
  z << 1000, 0.0015, 0.3, 0.6, 6.0,  //
      1400, 0.0010, 0.25, 0.45, 3.8,  //
      800, 0.0015, 0.3, 0.6, 5.0;
  const VitalsColumns v = reconstruct_vitals(z);
  for (int i = 0; i < 3; ++i) {
    const VitalsEstimate e = simulate_vitals(ConceptVector{z(i, 0), z(i, 1), z(i, 2), z(i, 3), z(i, 4)});
    CHECK(v.hr[i] == e.hr);
    CHECK(v.bp_sys[i] == e.bp_sys);
    CHECK(v.bp_dias[i] == e.bp_dias);
  }
  // Heart rate follows Ts + Td only.
  CHECK(v.hr[0] == v.hr[2]);
  CHECK(v.hr[0] == doctest::Approx(60.0 / 0.9));
  // Hand case for the median absolute error of reconstructed HR.
  const std::vector observed{66.0, 85.0, 70.0};
  const double expected = median({std::abs(66.0 - 60.0 / 0.9), std::abs(85.0 - 60.0 / 0.7), std::abs(70.0 - 60.0 / 0.9)});
  CHECK(median_abs_error(observed, v.hr) == doctest::Approx(expected));
  CHECK(median_abs_error(observed, v.hr) == doctest::Approx(60.0 / 0.7 - 85.0));
}
