#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "doctest.h"
#include "test_util.hpp"
#include "trajtensor/harness.hpp"

using namespace trajtensor;
using namespace trajtensor::harness;
using metrics::Task;

namespace fs = std::filesystem;

TEST_CASE("fold plan partitions days evenly and deterministically") {
  FoldPlan plan = FoldPlan::build(10, 5, 42);
  std::vector<int> counts(5, 0);
  for (int f : plan.day_fold) ++counts[size_t(f)];
  for (int c : counts) CHECK(c == 2);

  FoldPlan again = FoldPlan::build(10, 5, 42);
  CHECK(plan.day_fold == again.day_fold);

  // train/test day sets are disjoint by construction
  for (size_t f = 0; f < 5; ++f) {
    auto test = plan.test_days(f);
    for (int d : test) CHECK(plan.in_test(f, d));
  }

  CHECK_THROWS_AS(FoldPlan::build(4, 5, 1), ConfigError);
}

TEST_CASE("run config validation and hashing") {
  RunConfig rc = testutil::base_run_config(Task::which, models::Family::cnn3d);
  CHECK_NOTHROW(rc.validate());

  RunConfig bad_grid = rc;
  bad_grid.grid_w = 20;
  CHECK_THROWS_AS(bad_grid.validate(), ConfigError);

  RunConfig bad_sigma = rc;
  bad_sigma.sigma = 5.0;
  CHECK_THROWS_AS(bad_sigma.validate(), ConfigError);

  RunConfig shortest = rc;
  shortest.baseline = "shortest";
  shortest.task = Task::when;
  CHECK_THROWS_AS(shortest.validate(), ConfigError);

  std::string h0 = rc.to_config().hash_hex8();
  RunConfig sigma1 = rc;
  sigma1.sigma = 1.0;
  CHECK(sigma1.to_config().hash_hex8() != h0);
  RunConfig copy = rc;
  CHECK(copy.to_config().hash_hex8() == h0);
}

TEST_CASE("config file parsing maps into a run config") {
  Config cfg = Config::parse_string(
      "[run]\n"
      "model = gru\n"
      "task = when\n"
      "sigma = 2  # inline comment\n"
      "epochs = 42\n");
  RunConfig rc = RunConfig::from_config(cfg);
  CHECK(rc.family == models::Family::gru);
  CHECK(rc.task == Task::when);
  CHECK(rc.sigma == 2.0);
  CHECK(rc.max_epochs == 42);
  CHECK(rc.effective_lr() == 1e-3);  // coordinate default

  CHECK_THROWS_AS(RunConfig::from_config(Config::parse_string("[run]\nmodel = resnet\n")),
                  ConfigError);
}

TEST_CASE("oracle predictor scores perfectly on every metric") {
  datagen::Dataset ds = testutil::tiny_default_dataset(2, 3, 150, 11);
  REQUIRE(ds.samples.size() >= 4);
  std::vector<size_t> test_idx;
  for (size_t i = 0; i < ds.samples.size() && i < 12; ++i) test_idx.push_back(i);

  for (Task task : {Task::which, Task::when, Task::where}) {
    RunConfig rc = testutil::base_run_config(task, models::Family::cnn3d);
    auto oracle = [&](const datagen::MctfSample& s) { return make_target(s, task); };
    auto fm = evaluate_fold(ds, rc, test_idx, oracle, 0);
    CHECK(!fm.ap_skipped);
    CHECK(fm.ap == 1.0);
    if (task == Task::when) CHECK(*fm.siou_when == 1.0);
    if (task == Task::where) {
      CHECK(*fm.siou_where == 1.0);
      CHECK(*fm.ade == 0.0);
      CHECK(*fm.fde == 0.0);
    }
  }
}

TEST_CASE("constant-half predictor scores the pooled prevalence") {
  datagen::Dataset ds = testutil::tiny_default_dataset(2, 3, 150, 13);
  std::vector<size_t> test_idx;
  for (size_t i = 0; i < ds.samples.size() && i < 10; ++i) test_idx.push_back(i);
  RunConfig rc = testutil::base_run_config(Task::which, models::Family::cnn3d);

  size_t pos = 0, total = 0;
  for (size_t i : test_idx) {
    for (double v : ds.samples[i].which) {
      pos += v == 1.0;
      ++total;
    }
  }
  auto constant = [&](const datagen::MctfSample& s) {
    return DenseTensor({s.which.size()}, 0.5);
  };
  auto fm = evaluate_fold(ds, rc, test_idx, constant, 0);
  CHECK(fm.ap == doctest::Approx(double(pos) / double(total)).epsilon(1e-12));
}

TEST_CASE("learning rate zero leaves weights unchanged for any epoch count") {
  datagen::Dataset ds = testutil::tiny_default_dataset(2, 2, 140, 17);
  REQUIRE(!ds.samples.empty());
  std::vector<size_t> all;
  for (size_t i = 0; i < ds.samples.size(); ++i) all.push_back(i);

  RunConfig rc = testutil::base_run_config(Task::which, models::Family::cnn3d);
  rc.learning_rate = 0.0;
  rc.validation_fraction = 0.0;

  rc.max_epochs = 1;
  TrainedFold one = train_fold(ds, rc, all, 0);
  rc.max_epochs = 5;
  TrainedFold five = train_fold(ds, rc, all, 0);

  auto& pa = one.model_per_camera[0]->params();
  auto& pb = five.model_per_camera[0]->params();
  REQUIRE(pa.count() == pb.count());
  for (size_t p = 0; p < pa.count(); ++p)
    for (size_t i = 0; i < pa.param(p).value.size(); ++i)
      CHECK(pa.param(p).value[i] == pb.param(p).value[i]);
}

TEST_CASE("training is bitwise deterministic given the seed") {
  datagen::Dataset ds = testutil::tiny_default_dataset(2, 2, 140, 19);
  std::vector<size_t> all;
  for (size_t i = 0; i < ds.samples.size(); ++i) all.push_back(i);
  RunConfig rc = testutil::base_run_config(Task::which, models::Family::cnn3d);
  rc.max_epochs = 3;

  TrainedFold a = train_fold(ds, rc, all, 0);
  TrainedFold b = train_fold(ds, rc, all, 0);
  auto& pa = a.model_per_camera[0]->params();
  auto& pb = b.model_per_camera[0]->params();
  for (size_t p = 0; p < pa.count(); ++p)
    CHECK(std::memcmp(pa.param(p).value.data(), pb.param(p).value.data(),
                      pa.param(p).value.size() * sizeof(double)) == 0);
}

TEST_CASE("multi-target stacked prediction equals the sequential path bitwise") {
  datagen::Dataset ds = testutil::tiny_default_dataset(2, 4, 160, 23);
  auto groups = datagen::group_multi_target(ds);
  RunConfig rc = testutil::base_run_config(Task::which, models::Family::cnn3d);

  // untrained weights are fine: the contract is about the forward pass
  TrainedFold fold;
  fold.cfg = rc;
  fold.model_per_camera.push_back(models::MctfModel::build(rc.model_spec(ds), 77));
  fold.camera_available.assign(1, 1);

  datagen::MultiTargetGroup group;
  if (!groups.empty()) {
    group = groups[0];
  } else {
    group.day = ds.samples[0].day;
    group.bin = 0;
    group.sample_indices = {0, 1 % ds.samples.size()};
  }

  auto pred = predict_multi_target(ds, rc, fold, group);
  size_t b = group.sample_indices.size();
  REQUIRE(pred.stacked_scores.dim(0) == b);
  size_t per = pred.stacked_scores.size() / b;
  for (size_t i = 0; i < b; ++i) {
    DenseTensor single =
        fold.model_per_camera[0]->forward(make_tensor_input(ds.samples[group.sample_indices[i]], ds, rc));
    CHECK(std::memcmp(single.data(), pred.stacked_scores.data() + i * per,
                      per * sizeof(double)) == 0);
  }

  // b = 1 equals the single-sample path
  datagen::MultiTargetGroup one;
  one.sample_indices = {0};
  auto pred1 = predict_multi_target(ds, rc, fold, one);
  DenseTensor single = fold.model_per_camera[0]->forward(make_tensor_input(ds.samples[0], ds, rc));
  CHECK(std::memcmp(single.data(), pred1.stacked_scores.data(), single.size() * sizeof(double)) ==
        0);

  // empty group: empty output, no error
  datagen::MultiTargetGroup empty;
  auto pred0 = predict_multi_target(ds, rc, fold, empty);
  CHECK(pred0.stacked_scores.size() == 0);
}

TEST_CASE("coordinate folds hold one weight set per camera with mean fallback") {
  datagen::Dataset ds = testutil::tiny_default_dataset(2, 3, 150, 43);
  // restrict training to departures from cameras 0 and 2 to force fallbacks
  std::vector<size_t> train_idx;
  for (size_t i = 0; i < ds.samples.size(); ++i)
    if (ds.samples[i].departure_camera == 0 || ds.samples[i].departure_camera == 2)
      train_idx.push_back(i);
  REQUIRE(!train_idx.empty());

  RunConfig rc = testutil::base_run_config(Task::which, models::Family::gru);
  rc.channel_scale = 0.125;
  rc.max_epochs = 2;
  TrainedFold trained = train_fold(ds, rc, train_idx, 0);
  CHECK(trained.model_per_camera.size() == ds.meta.cameras);
  CHECK(trained.camera_available[0]);
  CHECK(!trained.camera_available[1]);
  CHECK(trained.fallback_used);

  // a departure from an uncovered camera gets the mean prediction
  size_t missing = 0;
  for (size_t i = 0; i < ds.samples.size(); ++i)
    if (ds.samples[i].departure_camera == 1) missing = i;
  DenseTensor pred = trained.predict(ds.samples[missing], ds);
  CHECK(pred.size() == ds.meta.cameras);

  RunConfig tensor_rc = testutil::base_run_config(Task::which, models::Family::cnn3d);
  tensor_rc.channel_scale = 0.125;
  tensor_rc.max_epochs = 1;
  TrainedFold unified = train_fold(ds, tensor_rc, train_idx, 0);
  CHECK(unified.model_per_camera.size() == 1);  // single unified model
}

TEST_CASE("cnn_gru pretraining reaches reconstruction BCE < 0.1") {
  datagen::Dataset ds = testutil::tiny_default_dataset(2, 10, 220, 47);
  std::vector<size_t> train_idx;
  for (size_t i = 0; i < ds.samples.size() && train_idx.size() < 100; ++i) train_idx.push_back(i);
  REQUIRE(train_idx.size() >= 80);

  RunConfig rc = testutil::base_run_config(Task::which, models::Family::cnn_gru);
  rc.channel_scale = 0.25;
  rc.max_epochs = 1;  // the autoencoder stage runs before the single epoch
  TrainedFold trained = train_fold(ds, rc, train_idx, 0);

  auto& model = *trained.model_per_camera[0];
  double total = 0.0;
  size_t count = 0;
  for (size_t idx : train_idx) {
    DenseTensor z = make_tensor_input(ds.samples[idx], ds, rc);
    for (size_t t = 0; t < ds.meta.observed; ++t) {
      DenseTensor slice({ds.meta.cameras, rc.grid_h, rc.grid_w});
      size_t cells = rc.grid_h * rc.grid_w;
      for (size_t c = 0; c < ds.meta.cameras; ++c)
        std::copy(z.data() + (c * ds.meta.observed + t) * cells,
                  z.data() + (c * ds.meta.observed + t + 1) * cells, slice.data() + c * cells);
      DenseTensor recon = model.autoencode_forward(slice);
      total += nn::bce_loss_soft(recon, slice, nullptr);
      ++count;
    }
  }
  CHECK(total / double(count) < 0.1);
}

TEST_CASE("masking is a no-op on a dataset without overlapping visibility") {
  datagen::Dataset ds = datagen::generate(testutil::two_camera_corridor(), 9);
  REQUIRE(!ds.samples.empty());
  RunConfig rc = testutil::base_run_config(Task::which, models::Family::cnn3d);
  for (const auto& s : ds.samples) {
    DenseTensor multi = make_tensor_input(s, ds, rc);
    DenseTensor masked = make_masked_tensor_input(s, ds, rc);
    CHECK(std::memcmp(multi.data(), masked.data(), multi.size() * sizeof(double)) == 0);
  }
}

TEST_CASE("coordinate families fall back to sequential multi-target prediction") {
  datagen::Dataset ds = testutil::tiny_default_dataset(1, 3, 150, 53);
  RunConfig rc = testutil::base_run_config(Task::which, models::Family::gru);
  rc.channel_scale = 0.25;
  rc.max_epochs = 1;
  std::vector<size_t> all;
  for (size_t i = 0; i < ds.samples.size(); ++i) all.push_back(i);
  TrainedFold trained = train_fold(ds, rc, all, 0);

  datagen::MultiTargetGroup group;
  group.sample_indices = {0, 1};
  std::vector<std::string> notes;
  auto pred = predict_multi_target(ds, rc, trained, group, &notes);
  CHECK(!notes.empty());
  for (size_t i = 0; i < 2; ++i) {
    DenseTensor single = trained.predict(ds.samples[group.sample_indices[i]], ds);
    CHECK(std::memcmp(single.data(), pred.stacked_scores.data() + i * single.size(),
                      single.size() * sizeof(double)) == 0);
  }
}

TEST_CASE("report files are byte-identical across reruns") {
  metrics::MetricsReport report;
  report.task = Task::which;
  metrics::FoldMetrics fm;
  fm.fold = 0;
  fm.sample_count = 3;
  fm.ap = 0.75;
  fm.curve.points = {{0.9, 1.0, 0.5}, {0.3, 0.75, 1.0}};
  report.folds.push_back(fm);

  RunConfig rc = testutil::base_run_config(Task::which, models::Family::cnn3d);
  Config echo = rc.to_config();

  fs::path dir = fs::temp_directory_path() / "tt_reports";
  fs::remove_all(dir);
  write_reports(dir.string(), "stem", report, echo);
  auto read = [&](const char* name) {
    std::ifstream in(dir / name, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  std::string txt1 = read("report-stem.txt");
  std::string json1 = read("report-stem.json");
  std::string csv1 = read("prcurve-stem-fold0.csv");
  CHECK(!txt1.empty());
  CHECK(!json1.empty());
  CHECK(!csv1.empty());

  write_reports(dir.string(), "stem", report, echo);
  CHECK(read("report-stem.txt") == txt1);
  CHECK(read("report-stem.json") == json1);
  CHECK(read("prcurve-stem-fold0.csv") == csv1);
  fs::remove_all(dir);
}

TEST_CASE("cross validation wiring: 5 folds, disjoint test days, mean of folds") {
  datagen::Dataset ds = testutil::tiny_default_dataset(5, 3, 150, 29);
  RunConfig rc = testutil::base_run_config(Task::which, models::Family::cnn3d);
  rc.baseline = "mean";

  auto cv = cross_validate(ds, rc);
  CHECK(cv.report.folds.size() == 5);
  std::set<int> seen;
  for (size_t f = 0; f < 5; ++f)
    for (int d : cv.plan.test_days(f)) {
      CHECK(!seen.count(d));
      seen.insert(d);
    }
  CHECK(seen.size() == 5);

  double mean = 0.0;
  size_t n = 0;
  for (const auto& fm : cv.report.folds)
    if (!fm.ap_skipped) {
      mean += fm.ap;
      ++n;
    }
  REQUIRE(n > 0);
  CHECK(cv.report.mean().ap == doctest::Approx(mean / double(n)).epsilon(1e-12));
}

TEST_CASE("sweep of one cell equals a single cross validation") {
  datagen::Dataset ds = testutil::tiny_default_dataset(5, 2, 140, 31);
  RunConfig rc = testutil::base_run_config(Task::which, models::Family::cnn3d);
  rc.baseline = "mean";
  auto rows = sweep(ds, rc, {{16, 9}}, {0.0});
  REQUIRE(rows.size() == 1);
  RunConfig same = rc;
  same.grid_w = 16;
  same.grid_h = 9;
  same.sigma = 0.0;
  auto cv = cross_validate(ds, same);
  CHECK(rows[0].mean_ap == cv.report.mean().ap);

  auto grid = sweep(ds, rc, {{16, 9}}, {0.0, 1.0});
  CHECK(grid.size() == 2);
}

TEST_CASE("ablation rejects coordinate families and needs kept models") {
  datagen::Dataset ds = testutil::tiny_default_dataset(5, 2, 140, 37);
  RunConfig rc = testutil::base_run_config(Task::which, models::Family::gru);
  CrossValResult dummy;
  CHECK_THROWS_AS(ablate_single_view(ds, rc, dummy), ConfigError);

  RunConfig tensor_rc = testutil::base_run_config(Task::which, models::Family::cnn3d);
  CHECK_THROWS_AS(ablate_single_view(ds, tensor_rc, dummy), StateError);
}
