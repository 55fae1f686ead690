#include <cmath>

#include "doctest.h"
#include "trajtensor/metrics.hpp"
#include "trajtensor/rng.hpp"

using namespace trajtensor;
using namespace trajtensor::metrics;

namespace {

// Brute-force oracle: enumerate every distinct threshold in descending
// order and sum delta-recall times precision directly.
double ap_oracle(const std::vector<double>& scores, const std::vector<char>& labels) {
  std::vector<double> thresholds = scores;
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  size_t total_pos = 0;
  for (char l : labels) total_pos += (l != 0);
  double ap = 0.0, prev_recall = 0.0;
  for (double th : thresholds) {
    size_t tp = 0, fp = 0;
    for (size_t i = 0; i < scores.size(); ++i) {
      if (scores[i] >= th) {
        if (labels[i]) ++tp; else ++fp;
      }
    }
    double precision = double(tp) / double(tp + fp);
    double recall = double(tp) / double(total_pos);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
  }
  return ap;
}

}  // namespace

TEST_CASE("average_precision spec examples") {
  CHECK(average_precision({0.9, 0.2}, {1, 0}) == 1.0);
  CHECK(average_precision({0.9, 0.8, 0.1}, {1, 0, 1}) ==
        doctest::Approx(5.0 / 6.0).epsilon(1e-12));
  CHECK(average_precision({0.5, 0.5}, {1, 0}) == 0.5);
}

TEST_CASE("average_precision errors") {
  CHECK_THROWS_AS(average_precision({0.5, 0.4}, {0, 0}), NoPositivesError);
  CHECK_THROWS_AS(average_precision({}, {}), InvalidInputError);
  CHECK_THROWS_AS(average_precision({0.5}, {1, 0}), ShapeError);
}

TEST_CASE("average_precision equals the brute-force oracle on random pools") {
  Rng rng(17);
  for (int trial = 0; trial < 300; ++trial) {
    size_t n = 1 + rng.below(32);
    std::vector<double> scores(n);
    std::vector<char> labels(n);
    bool any_pos = false;
    for (size_t i = 0; i < n; ++i) {
      // quantized scores force plenty of ties
      scores[i] = double(rng.below(8)) / 8.0;
      labels[i] = rng.uniform() < 0.4 ? 1 : 0;
      any_pos |= labels[i] != 0;
    }
    if (!any_pos) labels[rng.below(n)] = 1;
    double got = average_precision(scores, labels);
    double want = ap_oracle(scores, labels);
    CHECK(std::fabs(got - want) < 1e-12);
  }
}

TEST_CASE("average_precision is invariant under rank-preserving transforms") {
  Rng rng(29);
  for (int trial = 0; trial < 50; ++trial) {
    size_t n = 2 + rng.below(24);
    std::vector<double> scores(n);
    std::vector<char> labels(n);
    for (size_t i = 0; i < n; ++i) {
      scores[i] = double(rng.below(10)) / 10.0;
      labels[i] = rng.uniform() < 0.5 ? 1 : 0;
    }
    labels[0] = 1;
    std::vector<double> cubed(n);
    for (size_t i = 0; i < n; ++i) cubed[i] = scores[i] * scores[i] * scores[i];
    CHECK(average_precision(scores, labels) == average_precision(cubed, labels));
  }
}

TEST_CASE("pr_curve examples") {
  PrCurve c = pr_curve({0.9, 0.1}, {1, 0});
  REQUIRE(c.points.size() == 2);
  CHECK(c.points[0].threshold == 0.9);
  CHECK(c.points[0].precision == 1.0);
  CHECK(c.points[0].recall == 1.0);
  CHECK(c.points[1].threshold == 0.1);
  CHECK(c.points[1].precision == 0.5);
  CHECK(c.points[1].recall == 1.0);

  PrCurve all_pos = pr_curve({0.7, 0.5, 0.2}, {1, 1, 1});
  for (const auto& p : all_pos.points) CHECK(p.precision == 1.0);

  CHECK_THROWS_AS(pr_curve({}, {}), InvalidInputError);
}

TEST_CASE("pr_curve recall is non-decreasing as thresholds fall") {
  Rng rng(41);
  std::vector<double> scores(40);
  std::vector<char> labels(40);
  for (size_t i = 0; i < scores.size(); ++i) {
    scores[i] = double(rng.below(12)) / 12.0;
    labels[i] = rng.uniform() < 0.3 ? 1 : 0;
  }
  labels[3] = 1;
  PrCurve c = pr_curve(scores, labels);
  for (size_t i = 1; i < c.points.size(); ++i) {
    CHECK(c.points[i].recall >= c.points[i - 1].recall);
    CHECK(c.points[i].threshold < c.points[i - 1].threshold);
  }
}

TEST_CASE("siou_when spec examples") {
  // perfect binary prediction
  DenseTensor gt({2, 4});
  gt.at(0, 2) = 1.0;
  gt.at(0, 3) = 1.0;
  CHECK(siou_when(gt, gt) == 1.0);

  // uniform prediction forces |T+|/m; 0.5 keeps every sum exact
  DenseTensor gt2({1, 60});
  for (size_t t = 0; t < 15; ++t) gt2.at(0, t) = 1.0;
  DenseTensor uniform({1, 60}, 0.5);
  CHECK(siou_when(uniform, gt2) == 0.25);

  // hand-evaluated mixed case
  DenseTensor pred({2, 4});
  pred.at(0, 0) = 0.2;
  pred.at(0, 1) = 0.2;
  pred.at(0, 2) = 0.8;
  pred.at(0, 3) = 0.8;
  DenseTensor gt3({2, 4});
  gt3.at(0, 2) = 1.0;
  gt3.at(0, 3) = 1.0;
  CHECK(siou_when(pred, gt3) == doctest::Approx(0.8).epsilon(1e-12));

  DenseTensor none({2, 4});
  CHECK_THROWS_AS(siou_when(pred, none), NoPositivesError);
}

TEST_CASE("siou_when zero-mass camera contributes zero") {
  DenseTensor pred({2, 3});  // all-zero prediction
  DenseTensor gt({2, 3});
  gt.at(0, 1) = 1.0;
  CHECK(siou_when(pred, gt) == 0.0);
}

TEST_CASE("siou_where spec examples") {
  DenseTensor gt({1, 2, 3, 4});
  gt.at(0, 1, 1, 2) = 1.0;
  CHECK(siou_where(gt, gt) == 1.0);

  // uniform prediction over 144 cells with 6 ground-truth cells
  DenseTensor gt2({1, 1, 9, 16});
  for (size_t i = 0; i < 6; ++i) gt2.at(0, 0, 3, 4 + i) = 1.0;
  DenseTensor uniform({1, 1, 9, 16}, 0.5);
  CHECK(siou_where(uniform, gt2) == 6.0 / 144.0);

  // hand-evaluated: on-cells take 0.5 + 0.25 of total 1.0
  DenseTensor gt3({1, 1, 2, 2});
  gt3.at(0, 0, 0, 0) = 1.0;
  gt3.at(0, 0, 0, 1) = 1.0;
  DenseTensor pred({1, 1, 2, 2});
  pred.at(0, 0, 0, 0) = 0.5;
  pred.at(0, 0, 0, 1) = 0.25;
  pred.at(0, 0, 1, 0) = 0.25;
  CHECK(siou_where(pred, gt3) == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("siou values are scale invariant for positive rescaling") {
  Rng rng(53);
  DenseTensor pred({2, 5}), gt({2, 5});
  for (size_t i = 0; i < pred.size(); ++i) pred[i] = rng.uniform(0.0, 1.0);
  gt.at(0, 1) = 1.0;
  gt.at(1, 3) = 1.0;
  double base = siou_when(pred, gt);
  DenseTensor doubled = pred;
  for (size_t i = 0; i < doubled.size(); ++i) doubled[i] *= 0.5;  // exact
  CHECK(siou_when(doubled, gt) == base);
  for (size_t i = 0; i < doubled.size(); ++i) doubled[i] = pred[i] * 1.7;
  CHECK(siou_when(doubled, gt) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("displacement_errors spec examples") {
  DenseTensor gt({1, 1, 9, 16});
  gt.at(0, 0, 4, 7) = 1.0;
  auto [ade0, fde0] = displacement_errors(gt, gt, 1920, 1080);
  CHECK(ade0 == 0.0);
  CHECK(fde0 == 0.0);

  DenseTensor pred({1, 1, 9, 16});
  pred.at(0, 0, 4, 8) = 1.0;  // one cell to the right
  auto [ade1, fde1] = displacement_errors(pred, gt, 1920, 1080);
  CHECK(ade1 == 120.0);
  CHECK(fde1 == 120.0);

  DenseTensor empty({1, 1, 9, 16});
  auto [ade2, fde2] = displacement_errors(empty, gt, 1920, 1080);
  double diagonal = std::sqrt(1920.0 * 1920.0 + 1080.0 * 1080.0);
  CHECK(ade2 == diagonal);
  CHECK(fde2 == diagonal);
}

TEST_CASE("displacement_errors is symmetric with positive mass on both sides") {
  Rng rng(61);
  DenseTensor a({1, 2, 4, 6}), b({1, 2, 4, 6});
  for (size_t i = 0; i < a.size(); ++i) {
    a[i] = rng.uniform() < 0.3 ? 1.0 : 0.0;
    b[i] = rng.uniform() < 0.3 ? 1.0 : 0.0;
  }
  a.at(0, 0, 1, 1) = 1.0;
  a.at(0, 1, 2, 2) = 1.0;
  b.at(0, 0, 2, 3) = 1.0;
  b.at(0, 1, 0, 5) = 1.0;
  auto [ade_ab, fde_ab] = displacement_errors(a, b, 1920, 1080);
  auto [ade_ba, fde_ba] = displacement_errors(b, a, 1920, 1080);
  CHECK(ade_ab == doctest::Approx(ade_ba).epsilon(1e-12));
  CHECK(fde_ab == doctest::Approx(fde_ba).epsilon(1e-12));
}

TEST_CASE("fde uses the last ground-truth-present timestep") {
  DenseTensor gt({1, 3, 1, 4});
  gt.at(0, 0, 0, 0) = 1.0;
  gt.at(0, 2, 0, 0) = 1.0;  // last present step is t=2
  DenseTensor pred({1, 3, 1, 4});
  pred.at(0, 0, 0, 0) = 1.0;  // exact at t=0
  pred.at(0, 2, 0, 1) = 1.0;  // one cell off at t=2
  auto [ade, fde] = displacement_errors(pred, gt, 1920, 1080);
  CHECK(fde == doctest::Approx(480.0).epsilon(1e-12));  // 1920/4
  CHECK(ade == doctest::Approx(240.0).epsilon(1e-12));
}

TEST_CASE("report mean averages non-skipped folds exactly") {
  MetricsReport report;
  report.task = Task::when;
  for (int f = 0; f < 5; ++f) {
    FoldMetrics fm;
    fm.fold = f;
    fm.sample_count = 10;
    fm.ap = 0.1 * double(f + 1);
    fm.siou_when = 0.2 * double(f + 1);
    report.folds.push_back(fm);
  }
  FoldMetrics mean = report.mean();
  double expect_ap = (0.1 + 0.2 + 0.3 + 0.4 + 0.5) / 5.0;
  CHECK(std::fabs(mean.ap - expect_ap) < 1e-12);
  CHECK(std::fabs(*mean.siou_when - 2.0 * expect_ap) < 1e-12);
}
