#include "trajtensor/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "trajtensor/errors.hpp"
#include "trajtensor/kernels.hpp"

namespace trajtensor::harness {

namespace fs = std::filesystem;
using datagen::Dataset;
using datagen::MctfSample;
using metrics::Task;

// ---------------------------------------------------------------------------
// RunConfig
// ---------------------------------------------------------------------------

RunConfig RunConfig::from_config(const Config& cfg) {
  RunConfig rc;
  try {
    rc.baseline = cfg.get_string("run", "baseline", "");
    if (rc.baseline.empty())
      rc.family = models::family_from_name(cfg.get_string("run", "model", "cnn3d"));
    rc.task = metrics::task_from_name(cfg.get_string("run", "task", "which"));
  } catch (const InvalidInputError& e) {
    throw ConfigError(e.what());
  }
  rc.dataset_dir = cfg.get_string("run", "dataset", "");
  rc.out_dir = cfg.get_string("run", "out", ".");
  rc.learning_rate = cfg.get_double("run", "learning_rate", -1.0);
  rc.batch_size = size_t(cfg.get_int("run", "batch_size", 64));
  rc.grid_w = size_t(cfg.get_int("run", "grid_w", 16));
  rc.grid_h = size_t(cfg.get_int("run", "grid_h", 9));
  rc.sigma = cfg.get_double("run", "sigma", 0.0);
  rc.max_epochs = size_t(cfg.get_int("run", "epochs", 200));
  rc.patience = size_t(cfg.get_int("run", "patience", 10));
  rc.validation_fraction = cfg.get_double("run", "validation_fraction", 0.1);
  rc.train_bce_stop = cfg.get_double("run", "train_bce_stop", 0.0);
  rc.channel_scale = cfg.get_double("run", "channel_scale", 1.0);
  rc.seed = uint64_t(cfg.get_int("run", "seed", 1));
  rc.folds = size_t(cfg.get_int("run", "folds", 5));
  rc.threads = int(cfg.get_int("run", "threads", 0));
  rc.fold_index = int(cfg.get_int("run", "fold", 0));
  return rc;
}

Config RunConfig::to_config() const {
  Config cfg;
  if (is_baseline())
    cfg.set("run", "baseline", baseline);
  else
    cfg.set("run", "model", models::family_name(family));
  cfg.set("run", "task", metrics::task_name(task));
  cfg.set("run", "dataset", dataset_dir);
  cfg.set_double("run", "learning_rate", effective_lr());
  cfg.set_int("run", "batch_size", int64_t(batch_size));
  cfg.set_int("run", "grid_w", int64_t(grid_w));
  cfg.set_int("run", "grid_h", int64_t(grid_h));
  cfg.set_double("run", "sigma", sigma);
  cfg.set_int("run", "epochs", int64_t(max_epochs));
  cfg.set_int("run", "patience", int64_t(patience));
  cfg.set_double("run", "validation_fraction", validation_fraction);
  cfg.set_double("run", "channel_scale", channel_scale);
  cfg.set_int("run", "seed", int64_t(seed));
  cfg.set_int("run", "folds", int64_t(folds));
  return cfg;
}

void RunConfig::validate() const {
  bool grid_ok = (grid_w == 16 && grid_h == 9) || (grid_w == 32 && grid_h == 18) ||
                 (grid_w == 48 && grid_h == 27);
  if (!grid_ok) throw ConfigError("heatmap size must be 16x9, 32x18 or 48x27");
  if (sigma < 0.0 || sigma > 4.0) throw ConfigError("sigma must lie in [0, 4]");
  if (batch_size == 0) throw ConfigError("batch size must be >= 1");
  if (max_epochs == 0) throw ConfigError("epochs must be >= 1");
  if (folds != 5) throw ConfigError("cross-validation uses 5 folds");
  if (validation_fraction < 0.0 || validation_fraction > 0.5)
    throw ConfigError("validation fraction must lie in [0, 0.5]");
  if (is_baseline()) {
    if (baseline != "mean" && baseline != "shortest" && baseline != "similar" &&
        baseline != "handcrafted")
      throw ConfigError("unknown baseline: " + baseline);
    if (baseline == "shortest" && task != Task::which)
      throw ConfigError("the shortest-distance baseline applies to the which task only");
  }
}

double RunConfig::effective_lr() const {
  if (learning_rate >= 0.0) return learning_rate;
  if (is_baseline()) return 1e-3;
  return models::is_coordinate(family) ? 1e-3 : 1e-4;
}

models::ModelSpec RunConfig::model_spec(const Dataset& ds, int bound_camera) const {
  models::ModelSpec spec;
  spec.family = family;
  spec.task = task;
  spec.cameras = ds.meta.cameras;
  spec.horizon = ds.meta.horizon;
  spec.observed = ds.meta.observed;
  spec.grid_w = grid_w;
  spec.grid_h = grid_h;
  spec.channel_scale = channel_scale;
  spec.bound_camera = models::is_coordinate(family) ? bound_camera : -1;
  return spec;
}

// ---------------------------------------------------------------------------
// FoldPlan
// ---------------------------------------------------------------------------

FoldPlan FoldPlan::build(int days, size_t folds, uint64_t seed) {
  if (days < int(folds))
    throw ConfigError("cross-validation needs at least " + std::to_string(folds) +
                      " distinct days, dataset has " + std::to_string(days));
  std::vector<int> order(static_cast<size_t>(days), 0);
  for (int d = 0; d < days; ++d) order[size_t(d)] = d;
  Rng rng = Rng::derive(seed, 0xf01dull);
  rng.shuffle(order);
  FoldPlan plan;
  plan.folds = folds;
  plan.day_fold.assign(size_t(days), 0);
  for (size_t i = 0; i < order.size(); ++i) plan.day_fold[size_t(order[i])] = int(i % folds);
  return plan;
}

std::vector<int> FoldPlan::test_days(size_t fold) const {
  std::vector<int> days;
  for (size_t d = 0; d < day_fold.size(); ++d)
    if (day_fold[d] == int(fold)) days.push_back(int(d));
  return days;
}

// ---------------------------------------------------------------------------
// Input and target encoding
// ---------------------------------------------------------------------------

DenseTensor make_tensor_input(const MctfSample& s, const Dataset& ds, const RunConfig& cfg) {
  return build_trajectory_tensor(s.input_tracks, ds.meta.cameras, ds.meta.observed, cfg.grid_w,
                                 cfg.grid_h, cfg.sigma)
      .tensor();
}

DenseTensor make_masked_tensor_input(const MctfSample& s, const Dataset& ds,
                                     const RunConfig& cfg) {
  TrajectoryTensor z = build_trajectory_tensor(s.input_tracks, ds.meta.cameras, ds.meta.observed,
                                               cfg.grid_w, cfg.grid_h, cfg.sigma);
  return models::single_view_mask(z, size_t(s.departure_camera)).tensor();
}

DenseTensor make_coord_input(const MctfSample& s, const Dataset& ds) {
  size_t n = ds.meta.observed;
  DenseTensor track({n, 4});
  const auto& boxes = s.input_tracks[size_t(s.departure_camera)];
  for (size_t t = 0; t < n; ++t) {
    if (!boxes[t]) continue;  // absent steps stay zero
    track.at(t, 0) = boxes[t]->x1;
    track.at(t, 1) = boxes[t]->y1;
    track.at(t, 2) = boxes[t]->x2;
    track.at(t, 3) = boxes[t]->y2;
  }
  return track;
}

DenseTensor make_target(const MctfSample& s, Task task) {
  switch (task) {
    case Task::which: {
      DenseTensor t({s.which.size()});
      for (size_t c = 0; c < s.which.size(); ++c) t[c] = s.which[c];
      return t;
    }
    case Task::when:
      return s.when;
    case Task::where:
      return s.where_target();
  }
  throw InvalidInputError("bad task");
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

namespace {

void scale_grads(nn::ParamStore& store, double factor) {
  for (size_t p = 0; p < store.count(); ++p) {
    auto& g = store.param(p).grad;
    for (size_t i = 0; i < g.size(); ++i) g[i] *= factor;
  }
}

std::vector<DenseTensor> snapshot_params(const nn::ParamStore& store) {
  std::vector<DenseTensor> values;
  values.reserve(store.count());
  for (size_t p = 0; p < store.count(); ++p) values.push_back(store.param(p).value);
  return values;
}

void restore_params(nn::ParamStore& store, const std::vector<DenseTensor>& values) {
  for (size_t p = 0; p < store.count(); ++p) store.param(p).value = values[p];
}

// Slice (k,h,w) at timestep t from a cached (k,n,h,w) input.
DenseTensor input_slice(const DenseTensor& z, size_t t) {
  size_t k = z.dim(0), n = z.dim(1), cells = z.dim(2) * z.dim(3);
  DenseTensor out({k, z.dim(2), z.dim(3)});
  for (size_t c = 0; c < k; ++c)
    std::copy(z.data() + (c * n + t) * cells, z.data() + (c * n + t + 1) * cells,
              out.data() + c * cells);
  return out;
}

// One model, its sample subset, and the training state around it.
struct TrainUnit {
  models::MctfModel* model = nullptr;
  std::vector<size_t> train_idx;  // indices into ds.samples
  std::vector<size_t> val_idx;
  std::vector<DenseTensor> train_inputs;  // aligned with train_idx
  std::vector<DenseTensor> val_inputs;
  nn::AdamState adam;
  std::vector<DenseTensor> best_params;
  double best_val_ap = -1.0;
  size_t best_epoch = 0;
  size_t since_best = 0;
  bool done = false;
  double last_train_bce = 0.0;
};

DenseTensor unit_input(const Dataset& ds, const RunConfig& cfg, const MctfSample& s,
                       bool coordinate) {
  return coordinate ? make_coord_input(s, ds) : make_tensor_input(s, ds, cfg);
}

double validation_ap(TrainUnit& unit, const Dataset& ds, const RunConfig& cfg) {
  std::vector<double> scores;
  std::vector<char> labels;
  for (size_t i = 0; i < unit.val_idx.size(); ++i) {
    const MctfSample& s = ds.samples[unit.val_idx[i]];
    DenseTensor pred = unit.model->forward(unit.val_inputs[i]);
    DenseTensor target = make_target(s, cfg.task);
    for (size_t j = 0; j < pred.size(); ++j) {
      scores.push_back(pred[j]);
      labels.push_back(target[j] != 0.0 ? 1 : 0);
    }
  }
  try {
    return metrics::average_precision(scores, labels);
  } catch (const NoPositivesError&) {
    return 0.0;
  }
}

// Autoencoder pretraining over all training timestep slices until the
// reconstruction loss plateaus (no improvement for 5 epochs, capped).
void pretrain_autoencoder(TrainUnit& unit, const Dataset& ds, const RunConfig& cfg,
                          TrainLog& log) {
  constexpr size_t kPlateauPatience = 5;
  constexpr size_t kMaxEpochs = 60;
  size_t n = ds.meta.observed;
  std::vector<std::pair<size_t, size_t>> slices;  // (position in train_inputs, timestep)
  for (size_t i = 0; i < unit.train_inputs.size(); ++i)
    for (size_t t = 0; t < n; ++t) slices.emplace_back(i, t);
  if (slices.empty()) return;

  nn::AdamState adam;
  adam.lr = 1e-3;
  Rng rng = Rng::derive(cfg.seed, 0xae00ull);
  double best = std::numeric_limits<double>::infinity();
  size_t flat = 0, epochs = 0;
  for (size_t epoch = 0; epoch < kMaxEpochs; ++epoch) {
    rng.shuffle(slices);
    double total = 0.0;
    for (size_t start = 0; start < slices.size(); start += cfg.batch_size) {
      size_t stop = std::min(slices.size(), start + cfg.batch_size);
      unit.model->params().zero_grads();
      for (size_t i = start; i < stop; ++i) {
        DenseTensor slice = input_slice(unit.train_inputs[slices[i].first], slices[i].second);
        DenseTensor recon = unit.model->autoencode_forward(slice);
        DenseTensor d;
        total += nn::bce_loss_soft(recon, slice, &d);
        unit.model->autoencode_backward(d);
      }
      scale_grads(unit.model->params(), 1.0 / double(stop - start));
      nn::adam_step(adam, unit.model->params());
    }
    double mean = total / double((slices.size() + cfg.batch_size - 1) / cfg.batch_size);
    ++epochs;
    if (mean < best - 1e-4) {
      best = mean;
      flat = 0;
    } else if (++flat >= kPlateauPatience) {
      break;
    }
  }
  char note[96];
  std::snprintf(note, sizeof note, "autoencoder pretrained %zu epochs, recon bce %.6g", epochs,
                best);
  log.notes.emplace_back(note);
}

}  // namespace

TrainedFold train_fold(const Dataset& ds, const RunConfig& cfg,
                       const std::vector<size_t>& train_indices, int fold) {
  cfg.validate();
  kernels::set_max_threads(cfg.threads);
  bool coordinate = models::is_coordinate(cfg.family);
  size_t k = ds.meta.cameras;

  TrainedFold out;
  out.cfg = cfg;
  out.camera_available.assign(coordinate ? k : 1, 0);
  out.model_per_camera.resize(coordinate ? k : 1);

  // Partition samples per model.
  std::vector<TrainUnit> units;
  if (coordinate) {
    std::vector<std::vector<size_t>> per_cam(k);
    for (size_t idx : train_indices)
      per_cam[size_t(ds.samples[idx].departure_camera)].push_back(idx);
    for (size_t c = 0; c < k; ++c) {
      if (per_cam[c].empty()) continue;
      auto spec = cfg.model_spec(ds, int(c));
      out.model_per_camera[c] =
          models::MctfModel::build(spec, Rng::derive(cfg.seed, 0x100 + c).next_u64());
      out.camera_available[c] = 1;
      TrainUnit unit;
      unit.model = out.model_per_camera[c].get();
      unit.train_idx = per_cam[c];
      units.push_back(std::move(unit));
    }
    if (units.size() < k) {
      out.fallback_used = true;
      out.log.notes.push_back("some cameras had no training departures; mean fallback in use");
    }
  } else {
    auto spec = cfg.model_spec(ds);
    out.model_per_camera[0] = models::MctfModel::build(spec, Rng::derive(cfg.seed, 0x100).next_u64());
    out.camera_available[0] = 1;
    TrainUnit unit;
    unit.model = out.model_per_camera[0].get();
    unit.train_idx = train_indices;
    units.push_back(std::move(unit));
  }
  if (units.empty()) throw DataError("fold has no training samples");

  // Mean fallback for departure cameras without a model.
  if (out.fallback_used || coordinate) {
    out.fallback.fit_stream(
        train_indices.size(),
        [&](size_t i) { return make_target(ds.samples[train_indices[i]], cfg.task); },
        [&](size_t i) { return ds.samples[train_indices[i]].departure_camera; }, k);
  }

  // Validation split and input caches.
  for (auto& unit : units) {
    Rng rng = Rng::derive(cfg.seed, 0x5a11 + uint64_t(fold) * 131 +
                                        uint64_t(ds.samples[unit.train_idx[0]].departure_camera));
    rng.shuffle(unit.train_idx);
    size_t val_n = size_t(double(unit.train_idx.size()) * cfg.validation_fraction);
    unit.val_idx.assign(unit.train_idx.begin(), unit.train_idx.begin() + val_n);
    unit.train_idx.erase(unit.train_idx.begin(), unit.train_idx.begin() + val_n);
    for (size_t idx : unit.train_idx)
      unit.train_inputs.push_back(unit_input(ds, cfg, ds.samples[idx], coordinate));
    for (size_t idx : unit.val_idx)
      unit.val_inputs.push_back(unit_input(ds, cfg, ds.samples[idx], coordinate));
    unit.adam.lr = cfg.effective_lr();
    unit.best_params = snapshot_params(unit.model->params());
  }

  if (cfg.family == models::Family::cnn_gru)
    for (auto& unit : units) pretrain_autoencoder(unit, ds, cfg, out.log);

  for (size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    bool all_done = true;
    double epoch_bce = 0.0;
    size_t active = 0;
    for (auto& unit : units) {
      if (unit.done) continue;
      all_done = false;
      ++active;

      Rng rng = Rng::derive(cfg.seed, 0xe90c + uint64_t(fold) * 977 + epoch * 131 +
                                          uint64_t(ds.samples.size() > 0
                                                       ? ds.samples[unit.train_idx[0]].departure_camera
                                                       : 0));
      std::vector<size_t> order(unit.train_idx.size());
      for (size_t i = 0; i < order.size(); ++i) order[i] = i;
      rng.shuffle(order);

      double total = 0.0;
      size_t batches = 0;
      for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
        size_t stop = std::min(order.size(), start + cfg.batch_size);
        unit.model->params().zero_grads();
        for (size_t i = start; i < stop; ++i) {
          size_t pos = order[i];
          DenseTensor pred = unit.model->forward(unit.train_inputs[pos]);
          DenseTensor target = make_target(ds.samples[unit.train_idx[pos]], cfg.task);
          DenseTensor d;
          double loss = nn::bce_loss(pred, target, &d);
          if (!std::isfinite(loss)) throw DataError("training diverged: loss is not finite");
          total += loss;
          unit.model->backward(d);
        }
        scale_grads(unit.model->params(), 1.0 / double(stop - start));
        nn::adam_step(unit.adam, unit.model->params());
        ++batches;
      }
      unit.last_train_bce = total / double(std::max<size_t>(1, order.size()));
      epoch_bce += unit.last_train_bce;

      if (cfg.train_bce_stop > 0.0 && unit.last_train_bce < cfg.train_bce_stop) {
        unit.best_params = snapshot_params(unit.model->params());
        unit.best_epoch = epoch;
        unit.done = true;
      } else if (!unit.val_idx.empty()) {
        double ap = validation_ap(unit, ds, cfg);
        if (ap > unit.best_val_ap) {
          unit.best_val_ap = ap;
          unit.best_epoch = epoch;
          unit.since_best = 0;
          unit.best_params = snapshot_params(unit.model->params());
        } else if (++unit.since_best > cfg.patience) {
          unit.done = true;
        }
      } else {
        unit.best_params = snapshot_params(unit.model->params());
        unit.best_epoch = epoch;
      }
    }
    if (all_done) break;
    out.log.train_bce.push_back(active ? epoch_bce / double(active) : 0.0);
    double mean_val = 0.0;
    size_t with_val = 0;
    for (const auto& unit : units)
      if (!unit.val_idx.empty()) {
        mean_val += std::max(0.0, unit.best_val_ap);
        ++with_val;
      }
    out.log.val_ap.push_back(with_val ? mean_val / double(with_val) : 0.0);
  }

  for (auto& unit : units) {
    restore_params(unit.model->params(), unit.best_params);
    out.log.best_epoch = std::max(out.log.best_epoch, unit.best_epoch);
  }
  return out;
}

DenseTensor TrainedFold::predict(const MctfSample& s, const Dataset& ds) const {
  bool coordinate = models::is_coordinate(cfg.family);
  if (!coordinate) return model_per_camera[0]->forward(make_tensor_input(s, ds, cfg));
  size_t cam = size_t(s.departure_camera);
  if (!camera_available[cam]) return fallback.predict(cam);
  return model_per_camera[cam]->forward(make_coord_input(s, ds));
}

void TrainedFold::save(const std::string& out_dir, const std::string& stem, int fold) const {
  fs::create_directories(out_dir);
  for (size_t c = 0; c < model_per_camera.size(); ++c) {
    if (!camera_available[c]) continue;
    std::string name = "weights-" + stem + "-fold" + std::to_string(fold);
    if (models::is_coordinate(cfg.family)) name += "-cam" + std::to_string(c);
    nn::save_weights((fs::path(out_dir) / (name + ".ttwt")).string(),
                     model_per_camera[c]->params());
  }
}

TrainedFold TrainedFold::load(const Dataset& ds, const RunConfig& cfg, const std::string& out_dir,
                              const std::string& stem, int fold) {
  bool coordinate = models::is_coordinate(cfg.family);
  size_t k = ds.meta.cameras;
  TrainedFold out;
  out.cfg = cfg;
  out.model_per_camera.resize(coordinate ? k : 1);
  out.camera_available.assign(coordinate ? k : 1, 0);
  bool any_missing = false;
  for (size_t c = 0; c < out.model_per_camera.size(); ++c) {
    std::string name = "weights-" + stem + "-fold" + std::to_string(fold);
    if (coordinate) name += "-cam" + std::to_string(c);
    fs::path path = fs::path(out_dir) / (name + ".ttwt");
    if (!fs::exists(path)) {
      any_missing = true;
      continue;
    }
    auto spec = cfg.model_spec(ds, coordinate ? int(c) : -1);
    out.model_per_camera[c] =
        models::MctfModel::build(spec, Rng::derive(cfg.seed, 0x100 + c).next_u64());
    nn::load_weights(path.string(), out.model_per_camera[c]->params());
    out.camera_available[c] = 1;
  }
  if (std::none_of(out.camera_available.begin(), out.camera_available.end(),
                   [](char v) { return v != 0; }))
    throw DataError("no weight files found under " + out_dir + " for stem " + stem);
  if (any_missing) {
    // Rebuild the mean fallback from this fold's training split.
    FoldPlan plan = FoldPlan::build(ds.meta.days, cfg.folds, cfg.seed);
    std::vector<size_t> train_idx;
    for (size_t i = 0; i < ds.samples.size(); ++i)
      if (!plan.in_test(size_t(fold), ds.samples[i].day)) train_idx.push_back(i);
    out.fallback_used = true;
    out.fallback.fit_stream(
        train_idx.size(), [&](size_t i) { return make_target(ds.samples[train_idx[i]], cfg.task); },
        [&](size_t i) { return ds.samples[train_idx[i]].departure_camera; }, k);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

metrics::FoldMetrics evaluate_fold(const Dataset& ds, const RunConfig& cfg,
                                   const std::vector<size_t>& test_indices,
                                   const PredictFn& predict, int fold) {
  metrics::FoldMetrics fm;
  fm.fold = fold;
  fm.sample_count = test_indices.size();

  std::vector<double> pool_scores;
  std::vector<char> pool_labels;
  double siou_when_sum = 0.0, siou_where_sum = 0.0, ade_sum = 0.0, fde_sum = 0.0;

  for (size_t idx : test_indices) {
    const MctfSample& s = ds.samples[idx];
    DenseTensor scores = predict(s);
    DenseTensor target = make_target(s, cfg.task);
    scores.require_shape(target.shape(), "prediction");
    for (size_t j = 0; j < scores.size(); ++j) {
      pool_scores.push_back(scores[j]);
      pool_labels.push_back(target[j] != 0.0 ? 1 : 0);
    }
    if (cfg.task == Task::when) {
      siou_when_sum += metrics::siou_when(scores, target);
    } else if (cfg.task == Task::where) {
      siou_where_sum += metrics::siou_where(scores, target);
      auto [ade, fde] =
          metrics::displacement_errors(scores, target, RunConfig::kImageW, RunConfig::kImageH);
      ade_sum += ade;
      fde_sum += fde;
    }
  }

  if (pool_scores.empty()) {
    fm.ap_skipped = true;
    return fm;
  }
  try {
    fm.ap = metrics::average_precision(pool_scores, pool_labels);
    fm.curve = metrics::pr_curve(pool_scores, pool_labels);
    // Where-task pools have millions of distinct thresholds; keep the
    // exported curve plottable.
    constexpr size_t kMaxCurvePoints = 4096;
    if (fm.curve.points.size() > kMaxCurvePoints) {
      std::vector<metrics::PrPoint> kept;
      kept.reserve(kMaxCurvePoints);
      size_t n = fm.curve.points.size();
      for (size_t j = 0; j < kMaxCurvePoints - 1; ++j)
        kept.push_back(fm.curve.points[j * n / (kMaxCurvePoints - 1)]);
      kept.push_back(fm.curve.points.back());
      fm.curve.points = std::move(kept);
    }
  } catch (const NoPositivesError&) {
    fm.ap_skipped = true;  // recorded; the fold is skipped for AP purposes
  }
  double n = double(test_indices.size());
  if (cfg.task == Task::when) fm.siou_when = siou_when_sum / n;
  if (cfg.task == Task::where) {
    fm.siou_where = siou_where_sum / n;
    fm.ade = ade_sum / n;
    fm.fde = fde_sum / n;
  }
  return fm;
}

PredictFn make_baseline_predictor(const Dataset& ds, const RunConfig& cfg,
                                  const std::vector<size_t>& train_indices,
                                  std::vector<std::shared_ptr<void>>& keep_alive) {
  size_t k = ds.meta.cameras;
  if (cfg.baseline == "shortest") {
    auto dist = std::make_shared<baselines::CameraDistanceMatrix>(ds.distances);
    keep_alive.push_back(dist);
    return [dist, k](const MctfSample& s) {
      auto scores = baselines::shortest_distance_predict(*dist, size_t(s.departure_camera));
      DenseTensor t({k});
      for (size_t c = 0; c < k; ++c) t[c] = scores[c];
      return t;
    };
  }
  if (train_indices.empty()) throw DataError("baseline fit: fold has no training samples");

  auto mean = std::make_shared<baselines::MeanBaseline>();
  mean->fit_stream(
      train_indices.size(),
      [&](size_t i) { return make_target(ds.samples[train_indices[i]], cfg.task); },
      [&](size_t i) { return ds.samples[train_indices[i]].departure_camera; }, k);
  keep_alive.push_back(mean);

  if (cfg.baseline == "mean") {
    return [mean](const MctfSample& s) { return mean->predict(size_t(s.departure_camera)); };
  }

  if (cfg.baseline == "similar") {
    auto similar = std::make_shared<baselines::MostSimilarBaseline>();
    std::vector<DenseTensor> tracks;
    std::vector<int> cams;
    tracks.reserve(train_indices.size());
    for (size_t idx : train_indices) {
      tracks.push_back(make_coord_input(ds.samples[idx], ds));
      cams.push_back(ds.samples[idx].departure_camera);
    }
    similar->fit(tracks, cams, k);
    auto train_copy = std::make_shared<std::vector<size_t>>(train_indices);
    auto warned = std::make_shared<bool>(false);
    keep_alive.push_back(similar);
    keep_alive.push_back(train_copy);
    Task task = cfg.task;
    const Dataset* dsp = &ds;
    return [similar, mean, train_copy, warned, task, dsp](const MctfSample& s) {
      DenseTensor track = make_coord_input(s, *dsp);
      size_t pos = similar->nearest(size_t(s.departure_camera), track);
      if (pos == baselines::MostSimilarBaseline::npos) {
        if (!*warned) {
          std::fprintf(stderr,
                       "note: most-similar pool empty for camera %d; using the mean baseline\n",
                       s.departure_camera);
          *warned = true;
        }
        return mean->predict(size_t(s.departure_camera));
      }
      return make_target(dsp->samples[(*train_copy)[pos]], task);
    };
  }

  if (cfg.baseline == "handcrafted") {
    auto spec_shape = cfg.model_spec(ds, 0).output_shape();
    auto clf = std::make_shared<baselines::HandcraftedClassifier>(k, spec_shape, cfg.seed);
    keep_alive.push_back(clf);

    // Per-camera feature/target pools; samples with too little history are
    // left to the mean fallback.
    std::vector<std::vector<baselines::HandcraftedFeature>> features(k);
    std::vector<std::vector<DenseTensor>> targets(k);
    for (size_t idx : train_indices) {
      const MctfSample& s = ds.samples[idx];
      try {
        auto f = baselines::handcrafted_extract(s.input_tracks[size_t(s.departure_camera)]);
        features[size_t(s.departure_camera)].push_back(f);
        targets[size_t(s.departure_camera)].push_back(make_target(s, cfg.task));
      } catch (const InvalidInputError&) {
        continue;
      }
    }
    size_t epochs = std::min<size_t>(cfg.max_epochs, 100);
    Rng rng = Rng::derive(cfg.seed, 0x4cafeull);
    for (size_t c = 0; c < k; ++c) {
      if (features[c].empty()) continue;
      std::vector<size_t> order(features[c].size());
      for (size_t i = 0; i < order.size(); ++i) order[i] = i;
      for (size_t epoch = 0; epoch < epochs; ++epoch) {
        rng.shuffle(order);
        for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
          size_t stop = std::min(order.size(), start + cfg.batch_size);
          std::vector<baselines::HandcraftedFeature> batch_f;
          std::vector<const DenseTensor*> batch_t;
          for (size_t i = start; i < stop; ++i) {
            batch_f.push_back(features[c][order[i]]);
            batch_t.push_back(&targets[c][order[i]]);
          }
          clf->train_batch(c, batch_f, batch_t, 1e-3);
        }
      }
    }
    const Dataset* dsp = &ds;
    return [clf, mean, dsp](const MctfSample& s) {
      try {
        auto f = baselines::handcrafted_extract(s.input_tracks[size_t(s.departure_camera)]);
        return clf->predict(size_t(s.departure_camera), f);
      } catch (const InvalidInputError&) {
        return mean->predict(size_t(s.departure_camera));
      }
    };
  }
  throw ConfigError("unknown baseline: " + cfg.baseline);
}

// ---------------------------------------------------------------------------
// Orchestration
// ---------------------------------------------------------------------------

CrossValResult cross_validate(const Dataset& ds, const RunConfig& cfg, bool keep_models) {
  cfg.validate();
  CrossValResult result;
  result.plan = FoldPlan::build(ds.meta.days, cfg.folds, cfg.seed);
  result.report.task = cfg.task;

  for (size_t fold = 0; fold < cfg.folds; ++fold) {
    std::vector<size_t> train_idx, test_idx;
    for (size_t i = 0; i < ds.samples.size(); ++i) {
      if (result.plan.in_test(fold, ds.samples[i].day))
        test_idx.push_back(i);
      else
        train_idx.push_back(i);
    }
    metrics::FoldMetrics fm;
    if (cfg.is_baseline()) {
      std::vector<std::shared_ptr<void>> keep_alive;
      PredictFn predict = make_baseline_predictor(ds, cfg, train_idx, keep_alive);
      fm = evaluate_fold(ds, cfg, test_idx, predict, int(fold));
    } else {
      TrainedFold trained = train_fold(ds, cfg, train_idx, int(fold));
      fm = evaluate_fold(
          ds, cfg, test_idx,
          [&](const MctfSample& s) { return trained.predict(s, ds); }, int(fold));
      if (keep_models) result.fold_models.push_back(std::move(trained));
    }
    result.report.folds.push_back(std::move(fm));
  }
  return result;
}

std::vector<SweepRow> sweep(const Dataset& ds, const RunConfig& base,
                            const std::vector<std::pair<size_t, size_t>>& grid_sizes,
                            const std::vector<double>& sigmas) {
  std::vector<SweepRow> rows;
  for (auto [w, h] : grid_sizes) {
    for (double sigma : sigmas) {
      RunConfig cfg = base;
      cfg.grid_w = w;
      cfg.grid_h = h;
      cfg.sigma = sigma;
      auto cv = cross_validate(ds, cfg);
      SweepRow row;
      row.grid_w = w;
      row.grid_h = h;
      row.sigma = sigma;
      for (const auto& fm : cv.report.folds) row.fold_ap.push_back(fm.ap_skipped ? 0.0 : fm.ap);
      row.mean_ap = cv.report.mean().ap;
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

AblationResult ablate_single_view(const Dataset& ds, const RunConfig& cfg,
                                  CrossValResult& trained) {
  if (models::is_coordinate(cfg.family))
    throw ConfigError("the single-view ablation applies to tensor families only");
  if (trained.fold_models.size() != cfg.folds)
    throw StateError("ablation needs the trained fold models (run cross_validate with keep_models)");

  AblationResult result;
  result.multi_view.task = cfg.task;
  result.single_view.task = cfg.task;
  for (size_t fold = 0; fold < cfg.folds; ++fold) {
    std::vector<size_t> test_idx;
    for (size_t i = 0; i < ds.samples.size(); ++i)
      if (trained.plan.in_test(fold, ds.samples[i].day)) test_idx.push_back(i);
    auto& model = *trained.fold_models[fold].model_per_camera[0];
    result.multi_view.folds.push_back(evaluate_fold(
        ds, cfg, test_idx,
        [&](const MctfSample& s) { return model.forward(make_tensor_input(s, ds, cfg)); },
        int(fold)));
    result.single_view.folds.push_back(evaluate_fold(
        ds, cfg, test_idx,
        [&](const MctfSample& s) { return model.forward(make_masked_tensor_input(s, ds, cfg)); },
        int(fold)));
  }
  return result;
}

MultiTargetPrediction predict_multi_target(const Dataset& ds, const RunConfig& cfg,
                                           const TrainedFold& fold,
                                           const datagen::MultiTargetGroup& group,
                                           std::vector<std::string>* notes) {
  MultiTargetPrediction out;
  out.group = group;
  size_t b = group.sample_indices.size();
  size_t k = ds.meta.cameras, n = ds.meta.observed;
  if (b == 0) {
    out.stacked_input = DenseTensor();
    out.stacked_scores = DenseTensor();
    return out;
  }

  // Stack inputs along a leading batch axis: (b, k, n, h, w).
  out.stacked_input = DenseTensor({b, k, n, cfg.grid_h, cfg.grid_w});
  size_t per = k * n * cfg.grid_h * cfg.grid_w;
  for (size_t i = 0; i < b; ++i) {
    DenseTensor z = make_tensor_input(ds.samples[group.sample_indices[i]], ds, cfg);
    std::copy(z.data(), z.data() + per, out.stacked_input.data() + i * per);
  }

  bool coordinate = models::is_coordinate(cfg.family);
  if (coordinate && notes)
    notes->push_back("coordinate family: processing the group sequentially per target");

  std::vector<size_t> out_shape;
  for (size_t i = 0; i < b; ++i) {
    DenseTensor scores;
    if (coordinate) {
      scores = fold.predict(ds.samples[group.sample_indices[i]], ds);
    } else {
      DenseTensor slice({k, n, cfg.grid_h, cfg.grid_w});
      std::copy(out.stacked_input.data() + i * per, out.stacked_input.data() + (i + 1) * per,
                slice.data());
      scores = fold.model_per_camera[0]->forward(slice);
    }
    if (i == 0) {
      out_shape = scores.shape();
      std::vector<size_t> stacked_shape{b};
      stacked_shape.insert(stacked_shape.end(), out_shape.begin(), out_shape.end());
      out.stacked_scores = DenseTensor(stacked_shape);
    }
    std::copy(scores.data(), scores.data() + scores.size(),
              out.stacked_scores.data() + i * scores.size());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

void write_reports(const std::string& out_dir, const std::string& stem,
                   const metrics::MetricsReport& report, const Config& echo) {
  fs::create_directories(out_dir);
  {
    std::ofstream txt(fs::path(out_dir) / ("report-" + stem + ".txt"));
    if (!txt) throw DataError("cannot write report in " + out_dir);
    metrics::write_report_text(txt, report, echo.flat());
  }
  {
    std::ofstream js(fs::path(out_dir) / ("report-" + stem + ".json"));
    metrics::write_report_json(js, report, echo.flat());
  }
  for (const auto& fm : report.folds) {
    if (fm.curve.points.empty()) continue;
    std::ofstream csv(fs::path(out_dir) /
                      ("prcurve-" + stem + "-fold" + std::to_string(fm.fold) + ".csv"));
    metrics::write_pr_csv(csv, fm.curve);
  }
}

void write_sweep_csv(const std::string& out_dir, const std::string& stem,
                     const std::vector<SweepRow>& rows) {
  fs::create_directories(out_dir);
  std::ofstream csv(fs::path(out_dir) / ("sweep-" + stem + ".csv"));
  if (!csv) throw DataError("cannot write sweep csv in " + out_dir);
  csv << "grid_w,grid_h,sigma";
  size_t folds = rows.empty() ? 0 : rows[0].fold_ap.size();
  for (size_t f = 0; f < folds; ++f) csv << ",ap_fold" << f;
  csv << ",ap_mean\n";
  char buf[64];
  for (const auto& row : rows) {
    csv << row.grid_w << "," << row.grid_h << ",";
    std::snprintf(buf, sizeof buf, "%.10g", row.sigma);
    csv << buf;
    for (double ap : row.fold_ap) {
      std::snprintf(buf, sizeof buf, ",%.10g", ap);
      csv << buf;
    }
    std::snprintf(buf, sizeof buf, ",%.10g\n", row.mean_ap);
    csv << buf;
  }
}

}  // namespace trajtensor::harness
