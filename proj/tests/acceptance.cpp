// Acceptance suite: runs every criterion end to end and prints one
// PASS/FAIL line per criterion. Exit code is the number of failures.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "test_util.hpp"
#include "trajtensor/datagen.hpp"
#include "trajtensor/harness.hpp"
#include "trajtensor/heatmap.hpp"
#include "trajtensor/kernels.hpp"
#include "trajtensor/metrics.hpp"
#include "trajtensor/models.hpp"
#include "trajtensor/nn.hpp"

using namespace trajtensor;
using Clock = std::chrono::steady_clock;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

double elapsed(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void report(int id, const char* name, bool pass, const std::string& detail) {
  std::printf("criterion %2d %-4s %s (%s)\n", id, pass ? "PASS" : "FAIL", name, detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, pattern, a, b, c);
  return buf;
}

// --- criterion 1: AP matches a brute-force threshold sweep exactly ---------

double ap_brute_force(const std::vector<double>& scores, const std::vector<char>& labels) {
  std::vector<double> thresholds = scores;
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  size_t total_pos = 0;
  for (char l : labels) total_pos += (l != 0);
  double ap = 0.0, prev_recall = 0.0;
  for (double th : thresholds) {
    size_t tp = 0, fp = 0;
    for (size_t i = 0; i < scores.size(); ++i)
      if (scores[i] >= th) (labels[i] ? tp : fp) += 1;
    double precision = double(tp) / double(tp + fp);
    double recall = double(tp) / double(total_pos);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
  }
  return ap;
}

void criterion_1() {
  auto start = Clock::now();
  Rng rng(1001);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    size_t n = 1 + rng.below(32);
    std::vector<double> scores(n);
    std::vector<char> labels(n);
    bool any = false;
    for (size_t i = 0; i < n; ++i) {
      scores[i] = rng.uniform() < 0.5 ? double(rng.below(6)) / 6.0 : rng.uniform();
      labels[i] = rng.uniform() < 0.4 ? 1 : 0;
      any |= labels[i] != 0;
    }
    if (!any) labels[rng.below(n)] = 1;
    worst = std::max(worst, std::fabs(metrics::average_precision(scores, labels) -
                                      ap_brute_force(scores, labels)));
  }
  double t = elapsed(start);
  report(1, "AP equals the brute-force threshold sweep", worst < 1e-12 && t < 5.0,
         fmt("max diff %.3g over 1000 pools, %.2f s", worst, t));
}

// --- criterion 2: closed-form SIOU cases ------------------------------------

void criterion_2() {
  bool pass = true;

  DenseTensor gt_when({1, 60});
  for (size_t t = 0; t < 15; ++t) gt_when.at(0, t) = 1.0;
  DenseTensor uniform_when({1, 60}, 0.5);
  double sw = metrics::siou_when(uniform_when, gt_when);
  pass &= (sw == 15.0 / 60.0);

  DenseTensor gt_where({1, 1, 9, 16});
  for (size_t i = 0; i < 6; ++i) gt_where.at(0, 0, 2, 3 + i) = 1.0;
  DenseTensor uniform_where({1, 1, 9, 16}, 0.5);
  double swh = metrics::siou_where(uniform_where, gt_where);
  pass &= (swh == 6.0 / 144.0);

  // perfect binary predictions score 1.0 / 0.0 everywhere
  Rng rng(1002);
  DenseTensor gt4({2, 6, 4, 5});
  for (size_t i = 0; i < gt4.size(); ++i) gt4[i] = rng.uniform() < 0.25 ? 1.0 : 0.0;
  gt4.at(0, 0, 0, 0) = 1.0;
  DenseTensor gt2({2, 6});
  for (size_t c = 0; c < 2; ++c)
    for (size_t t = 0; t < 6; ++t) {
      double any = 0.0;
      for (size_t r = 0; r < 4; ++r)
        for (size_t q = 0; q < 5; ++q) any = std::max(any, gt4.at(c, t, r, q));
      gt2.at(c, t) = any;
    }
  std::vector<double> flat(gt4.data(), gt4.data() + gt4.size());
  std::vector<char> labels(gt4.size());
  for (size_t i = 0; i < gt4.size(); ++i) labels[i] = gt4[i] != 0.0;
  pass &= (metrics::average_precision(flat, labels) == 1.0);
  pass &= (metrics::siou_when(gt2, gt2) == 1.0);
  pass &= (metrics::siou_where(gt4, gt4) == 1.0);
  auto [ade, fde] = metrics::displacement_errors(gt4, gt4, 1920, 1080);
  pass &= (ade == 0.0 && fde == 0.0);

  report(2, "closed-form SIOU and perfect-prediction cases", pass,
         fmt("uniform when %.6g, uniform where %.6g", sw, swh));
}

// --- criterion 3: Eq.-3 centroids ------------------------------------------

void criterion_3() {
  bool pass = true;

  Heatmap uniform(16, 9, 0.5);
  auto [ux, uy] = center_of_mass(uniform, 1920, 1080);
  pass &= std::fabs(ux - 960.0) < 1e-9 && std::fabs(uy - 540.0) < 1e-9;

  Heatmap corner(16, 9);
  corner.value(0, 0) = 1.0;
  auto [cx, cy] = center_of_mass(corner, 1920, 1080);
  pass &= (cx == 60.0 && cy == 60.0);

  Heatmap two(16, 9);
  two.value(0, 0) = 1.0;
  two.value(4, 0) = 3.0;
  auto [tx, ty] = center_of_mass(two, 1920, 1080);
  pass &= (tx == 420.0 && ty == 60.0);

  DenseTensor gt({1, 1, 9, 16}), pred({1, 1, 9, 16});
  gt.at(0, 0, 4, 7) = 1.0;
  pred.at(0, 0, 4, 8) = 1.0;
  auto [ade, fde] = metrics::displacement_errors(pred, gt, 1920, 1080);
  pass &= (ade == 120.0 && fde == 120.0);

  report(3, "Eq.-3 centroid examples and one-cell 120 px shift", pass,
         fmt("shift ade %.17g px", ade));
}

// --- criterion 4: gradient suite --------------------------------------------

void criterion_4() {
  auto start = Clock::now();
  bool pass = true;
  std::string worst_name = "-";
  double worst = 0.0;

  // dense + sigmoid alone at 1e-6
  {
    nn::ParamStore store;
    Rng rng(1004);
    nn::Dense d = nn::Dense::create(store, "d", 6, 4, rng);
    DenseTensor x({6}), target({4});
    for (size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform(-1.0, 1.0);
    for (size_t i = 0; i < target.size(); ++i) target[i] = rng.uniform() < 0.5 ? 1.0 : 0.0;
    nn::Cache cache;
    DenseTensor sig;
    auto eval = [&](bool with_grad) {
      sig = nn::sigmoid(d.forward(store, x, cache));
      if (!with_grad) return nn::bce_loss(sig, target, nullptr);
      DenseTensor dl;
      double loss = nn::bce_loss(sig, target, &dl);
      d.backward(store, cache, nn::sigmoid_backward(sig, dl));
      return loss;
    };
    double err = nn::grad_check(store, eval, 1e-4, 0).max_rel_err();
    if (err >= 1e-6) pass = false;
    if (err > worst) { worst = err; worst_name = "dense+sigmoid"; }
  }

  // conv -> pool -> tconv chains for every spatial rank at 1e-4
  for (int spatial = 1; spatial <= 3; ++spatial) {
    nn::ParamStore store;
    Rng rng(1010 + spatial);
    nn::Conv conv = nn::Conv::create(store, "c", spatial, 2, 3, 3, rng);
    nn::TConv tconv = nn::TConv::create(store, "t", spatial, 3, 2, 4, 2, 1, rng);
    nn::MaxPool pool = nn::MaxPool::create(spatial, 2);
    std::vector<size_t> shape{2};
    for (int i = 0; i < spatial; ++i) shape.push_back(4 + size_t(i));
    DenseTensor x(shape);
    for (size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform(-1.0, 1.0);
    nn::Cache cc, tc, pc;
    DenseTensor target, sig;
    auto eval = [&](bool with_grad) {
      DenseTensor y = conv.forward(store, x, cc);
      y = pool.forward(y, pc);
      y = tconv.forward(store, y, tc);
      sig = nn::sigmoid(y);
      if (target.size() == 0) {
        target = DenseTensor(sig.shape());
        Rng trng(77);
        for (size_t i = 0; i < target.size(); ++i) target[i] = trng.uniform() < 0.4 ? 1.0 : 0.0;
      }
      if (!with_grad) return nn::bce_loss(sig, target, nullptr);
      DenseTensor dl;
      double loss = nn::bce_loss(sig, target, &dl);
      DenseTensor d = nn::sigmoid_backward(sig, dl);
      d = tconv.backward(store, tc, d);
      d = pool.backward(pc, d);
      conv.backward(store, cc, d);
      return loss;
    };
    double err = nn::grad_check(store, eval, 1e-4, 0).max_rel_err();
    if (err >= 1e-4) pass = false;
    if (err > worst) {
      worst = err;
      worst_name = "conv+pool+tconv rank " + std::to_string(spatial);
    }
  }

  // recurrent cells unrolled over three steps
  for (bool lstm : {false, true}) {
    nn::ParamStore store;
    Rng rng(1020 + int(lstm));
    size_t in_n = 3, hidden = 4, steps = 3;
    nn::GruCell gcell;
    nn::LstmCell lcell;
    if (lstm)
      lcell = nn::LstmCell::create(store, "cell", in_n, hidden, rng);
    else
      gcell = nn::GruCell::create(store, "cell", in_n, hidden, rng);
    std::vector<DenseTensor> xs;
    for (size_t t = 0; t < steps; ++t) {
      DenseTensor x({in_n});
      for (size_t i = 0; i < in_n; ++i) x[i] = rng.uniform(-1.0, 1.0);
      xs.push_back(x);
    }
    DenseTensor target({hidden});
    for (size_t i = 0; i < hidden; ++i) target[i] = rng.uniform() < 0.5 ? 1.0 : 0.0;
    std::vector<nn::GruCell::Step> gsteps(steps);
    std::vector<nn::LstmCell::Step> lsteps(steps);
    auto eval = [&](bool with_grad) {
      DenseTensor h({hidden}), c({hidden});
      for (size_t t = 0; t < steps; ++t) {
        if (lstm) {
          DenseTensor hn, cn;
          lcell.forward(store, xs[t], h, c, hn, cn, lsteps[t]);
          h = hn;
          c = cn;
        } else {
          h = gcell.forward(store, xs[t], h, gsteps[t]);
        }
      }
      DenseTensor y = nn::sigmoid(h);
      if (!with_grad) return nn::bce_loss(y, target, nullptr);
      DenseTensor dl;
      double loss = nn::bce_loss(y, target, &dl);
      DenseTensor dh = nn::sigmoid_backward(y, dl), dc({hidden});
      for (size_t t = steps; t-- > 0;) {
        if (lstm) {
          DenseTensor dhp, dcp;
          lcell.backward(store, lsteps[t], dh, dc, dhp, dcp, nullptr);
          dh = dhp;
          dc = dcp;
        } else {
          dh = gcell.backward(store, gsteps[t], dh, nullptr);
        }
      }
      return loss;
    };
    double err = nn::grad_check(store, eval, 1e-4, 0).max_rel_err();
    if (err >= 1e-4) pass = false;
    if (err > worst) { worst = err; worst_name = lstm ? "lstm cell" : "gru cell"; }
  }

  // every family x head combination on miniature shapes
  for (const auto& c : testutil::all_model_grad_checks(1004)) {
    if (c.max_rel_err >= 1e-4) pass = false;
    if (c.max_rel_err > worst) { worst = c.max_rel_err; worst_name = c.name; }
  }

  double t = elapsed(start);
  if (t >= 120.0) pass = false;
  report(4, "gradient suite (layers and all 18 family/head combos)", pass,
         "worst " + fmt("%.3g", worst) + " at " + worst_name + fmt(", %.1f s", t));
}

// --- criteria 5, 6, 7 and 9: the synthetic benchmark ------------------------

void criteria_5_to_9() {
  auto start = Clock::now();
  datagen::Dataset ds = datagen::generate(datagen::default_scenario(), 7);

  // criterion 9: encoding consistency on every generated sample
  {
    size_t bad = 0;
    for (const auto& s : ds.samples) {
      DenseTensor where = s.where_target();
      size_t k = ds.meta.cameras, m = ds.meta.horizon;
      bool sample_ok = true;
      for (size_t c = 0; c < k && sample_ok; ++c) {
        bool cam_any = false;
        for (size_t t = 0; t < m; ++t) {
          double cell_any = 0.0;
          for (size_t r = 0; r < 9; ++r)
            for (size_t q = 0; q < 16; ++q) cell_any = std::max(cell_any, where.at(c, t, r, q));
          if (cell_any != s.when.at(c, t)) sample_ok = false;
          cam_any |= s.when.at(c, t) == 1.0;
        }
        if ((cam_any ? 1.0 : 0.0) != s.which[c]) sample_ok = false;
      }
      bad += !sample_ok;
    }
    report(9, "where -> when -> which reductions hold for every sample", bad == 0,
           fmt("%.0f of %.0f samples inconsistent", double(bad), double(ds.samples.size())));
  }

  harness::RunConfig rc;
  rc.task = metrics::Task::which;
  rc.family = models::Family::cnn3d;
  rc.channel_scale = 0.25;
  rc.max_epochs = 24;
  rc.patience = 6;
  rc.seed = 7;

  auto cv = harness::cross_validate(ds, rc, /*keep_models=*/true);
  double model_ap = cv.report.mean().ap;

  harness::RunConfig mean_rc = rc;
  mean_rc.baseline = "mean";
  double mean_ap = harness::cross_validate(ds, mean_rc).report.mean().ap;
  harness::RunConfig dist_rc = rc;
  dist_rc.baseline = "shortest";
  double dist_ap = harness::cross_validate(ds, dist_rc).report.mean().ap;

  double bench_time = elapsed(start);
  bool c5 = model_ap >= mean_ap + 0.05 && model_ap >= dist_ap + 0.05 && bench_time < 1800.0;
  report(5, "trained 3D-CNN beats mean and shortest-distance baselines by 5+ points", c5,
         fmt("cnn3d %.4f vs mean %.4f / shortest %.4f", model_ap, mean_ap, dist_ap) +
             fmt(", %.0f s", bench_time));

  // criterion 6: the same weights on multi-view vs masked single-view inputs
  {
    auto ablation = harness::ablate_single_view(ds, rc, cv);
    double multi = ablation.multi_view.mean().ap;
    double single = ablation.single_view.mean().ap;
    report(6, "multi-view AP_which >= single-view AP_which (3D-CNN)", multi >= single - 0.01,
           fmt("multi %.4f vs single %.4f", multi, single));
  }

  // criterion 7: batch-stacked prediction is bitwise the sequential one
  {
    const auto& fold0 = cv.fold_models[0];
    Rng rng(1007);
    bool all_equal = true;
    for (int g = 0; g < 100 && all_equal; ++g) {
      datagen::MultiTargetGroup group;
      group.day = 0;
      group.bin = g;
      size_t b = 1 + rng.below(4);
      for (size_t i = 0; i < b; ++i)
        group.sample_indices.push_back(size_t(rng.below(ds.samples.size())));
      auto pred = harness::predict_multi_target(ds, rc, fold0, group);
      size_t per = pred.stacked_scores.size() / b;
      for (size_t i = 0; i < b && all_equal; ++i) {
        DenseTensor single = fold0.model_per_camera[0]->forward(
            harness::make_tensor_input(ds.samples[group.sample_indices[i]], ds, rc));
        all_equal = std::memcmp(single.data(), pred.stacked_scores.data() + i * per,
                                per * sizeof(double)) == 0;
      }
    }
    report(7, "batch-stacked multi-target prediction equals sequential, bitwise", all_equal,
           "100 random groups, b <= 4");
  }
}

// --- criterion 8: byte-identical datagen / train / report -------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void criterion_8() {
  kernels::set_max_threads(1);  // single-threaded mode
  fs::path work = fs::temp_directory_path() / "trajtensor_acceptance";
  fs::remove_all(work);
  fs::create_directories(work);
  bool pass = true;

  datagen::ScenarioConfig sc = datagen::default_scenario();
  sc.agents = 4;
  sc.days = 2;
  sc.day_steps = 120;
  for (int run = 0; run < 2; ++run) {
    datagen::Dataset ds = datagen::generate(sc, 5);
    datagen::save_dataset((work / ("ds" + std::to_string(run))).string(), ds);
  }
  for (const char* f : {"meta", "samples.ndrec", "distances.txt"})
    pass &= slurp(work / "ds0" / f) == slurp(work / "ds1" / f);

  datagen::Dataset ds = datagen::load_dataset((work / "ds0").string());
  harness::RunConfig rc;
  rc.task = metrics::Task::which;
  rc.family = models::Family::cnn3d;
  rc.channel_scale = 0.125;
  rc.max_epochs = 3;
  rc.seed = 5;
  rc.threads = 1;
  std::vector<size_t> all;
  for (size_t i = 0; i < ds.samples.size(); ++i) all.push_back(i);
  for (int run = 0; run < 2; ++run) {
    auto trained = harness::train_fold(ds, rc, all, 0);
    trained.save((work / ("w" + std::to_string(run))).string(), "det", 0);
  }
  pass &= slurp(work / "w0" / "weights-det-fold0.ttwt") ==
          slurp(work / "w1" / "weights-det-fold0.ttwt");

  auto trained = harness::train_fold(ds, rc, all, 0);
  auto fm = harness::evaluate_fold(
      ds, rc, all, [&](const datagen::MctfSample& s) { return trained.predict(s, ds); }, 0);
  metrics::MetricsReport rep;
  rep.task = rc.task;
  rep.folds.push_back(fm);
  for (int run = 0; run < 2; ++run)
    harness::write_reports((work / ("r" + std::to_string(run))).string(), "det", rep,
                           rc.to_config());
  for (const char* f : {"report-det.txt", "report-det.json", "prcurve-det-fold0.csv"})
    pass &= slurp(work / "r0" / f) == slurp(work / "r1" / f);

  fs::remove_all(work);
  kernels::set_max_threads(0);
  report(8, "datagen, train and report are byte-identical across reruns", pass,
         "single-threaded, fixed config and seed");
}

// --- criterion 10: toy overfit for every family and head --------------------

void criterion_10() {
  auto start = Clock::now();
  datagen::ScenarioConfig sc = datagen::default_scenario();
  sc.agents = 3;
  sc.days = 1;
  sc.day_steps = 160;
  datagen::Dataset ds = datagen::generate(sc, 41);
  std::vector<size_t> toy;
  for (size_t i = 0; i < ds.samples.size() && toy.size() < 8; ++i) toy.push_back(i);

  bool pass = toy.size() == 8;
  std::string worst = "-";
  double worst_bce = 0.0;
  using models::Family;
  using metrics::Task;
  for (Family family : {Family::gru, Family::lstm, Family::cnn1d, Family::cnn2d1d, Family::cnn3d,
                        Family::cnn_gru}) {
    for (Task task : {Task::which, Task::when, Task::where}) {
      harness::RunConfig rc;
      rc.family = family;
      rc.task = task;
      rc.channel_scale = models::is_coordinate(family) ? 1.0 : 0.5;
      rc.max_epochs = 200;
      rc.validation_fraction = 0.0;
      rc.batch_size = 1;
      rc.train_bce_stop = 0.045;
      rc.learning_rate = 5e-3;
      rc.seed = 19;
      auto trained = harness::train_fold(ds, rc, toy, 0);
      double bce = trained.log.train_bce.empty() ? 1e9 : trained.log.train_bce.back();
      if (bce >= 0.05) pass = false;
      if (bce > worst_bce) {
        worst_bce = bce;
        worst = std::string(models::family_name(family)) + "/" + metrics::task_name(task);
      }
    }
  }
  report(10, "every family/head overfits an 8-sample set to BCE < 0.05", pass,
         "worst " + fmt("%.4f", worst_bce) + " at " + worst + fmt(", %.0f s", elapsed(start)));
}

}  // namespace

int main() {
  auto start = Clock::now();
  criterion_1();
  criterion_2();
  criterion_3();
  criterion_4();
  criteria_5_to_9();
  criterion_8();
  criterion_10();
  std::printf("acceptance: %d of 10 criteria failed, %.0f s total\n", g_failures, elapsed(start));
  return g_failures;
}
