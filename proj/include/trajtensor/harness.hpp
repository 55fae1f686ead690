#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "trajtensor/baselines.hpp"
#include "trajtensor/config.hpp"
#include "trajtensor/datagen.hpp"
#include "trajtensor/dataset.hpp"
#include "trajtensor/metrics.hpp"
#include "trajtensor/models.hpp"

namespace trajtensor::harness {

/// One experiment: a predictor (model family or baseline), a task, and the
/// training setup. Defaults follow the training recipe: Adam at 1e-3 for
/// coordinate models and 1e-4 for tensor models, batch size 64, input
/// heatmaps from {16x9, 32x18, 48x27}, smoothing sigma in [0,4].
struct RunConfig {
  std::string baseline;  // empty = learned model; mean|shortest|similar|handcrafted
  models::Family family = models::Family::cnn3d;
  metrics::Task task = metrics::Task::which;
  std::string dataset_dir;
  std::string out_dir = ".";
  double learning_rate = -1.0;  // negative = family default; 0 is a valid no-op rate
  size_t batch_size = 64;
  size_t grid_w = 16, grid_h = 9;
  double sigma = 0.0;
  size_t max_epochs = 200;
  size_t patience = 10;
  double validation_fraction = 0.1;
  double train_bce_stop = 0.0;  // >0: stop once training BCE drops below it
  double channel_scale = 1.0;
  uint64_t seed = 1;
  size_t folds = 5;
  int threads = 0;
  int fold_index = 0;  // for the single-fold train/evaluate commands

  // Nominal image size for displacement errors, fixed so pixel magnitudes
  // are comparable across runs.
  static constexpr double kImageW = 1920.0, kImageH = 1080.0;

  static RunConfig from_config(const Config& cfg);
  Config to_config() const;
  void validate() const;
  bool is_baseline() const { return !baseline.empty(); }
  double effective_lr() const;
  models::ModelSpec model_spec(const datagen::Dataset& ds, int bound_camera = -1) const;
};

/// Day-disjoint 5-fold split: days are shuffled once with the run seed and
/// dealt round-robin, so membership depends only on the day count and seed.
struct FoldPlan {
  size_t folds = 5;
  std::vector<int> day_fold;  // day id -> fold

  static FoldPlan build(int days, size_t folds, uint64_t seed);
  std::vector<int> test_days(size_t fold) const;
  bool in_test(size_t fold, int day) const { return day_fold[size_t(day)] == int(fold); }
};

// Input/target encoding shared by training and evaluation.
DenseTensor make_tensor_input(const datagen::MctfSample& s, const datagen::Dataset& ds,
                              const RunConfig& cfg);
DenseTensor make_masked_tensor_input(const datagen::MctfSample& s, const datagen::Dataset& ds,
                                     const RunConfig& cfg);
DenseTensor make_coord_input(const datagen::MctfSample& s, const datagen::Dataset& ds);
DenseTensor make_target(const datagen::MctfSample& s, metrics::Task task);

struct TrainLog {
  std::vector<double> train_bce;  // per epoch, averaged over models in play
  std::vector<double> val_ap;
  size_t best_epoch = 0;
  std::vector<std::string> notes;
};

/// The trained predictor of one fold: one unified model for tensor
/// families, one model per departure camera for coordinate families (with a
/// mean-baseline fallback for cameras that had no training departures).
struct TrainedFold {
  RunConfig cfg;
  std::vector<std::unique_ptr<models::MctfModel>> model_per_camera;
  std::vector<char> camera_available;
  baselines::MeanBaseline fallback;
  bool fallback_used = false;
  TrainLog log;

  DenseTensor predict(const datagen::MctfSample& s, const datagen::Dataset& ds) const;
  bool is_tensor_family() const { return !models::is_coordinate(cfg.family); }

  void save(const std::string& out_dir, const std::string& stem, int fold) const;
  /// Rebuilds models and loads the weights written by save().
  static TrainedFold load(const datagen::Dataset& ds, const RunConfig& cfg,
                          const std::string& out_dir, const std::string& stem, int fold);
};

/// BCE + Adam mini-batch training on the given samples, deterministic per
/// config seed. A validation slice of the training samples picks the best
/// epoch by task AP; with no validation slice (tiny sets) the final weights
/// win. CNN-GRU runs its autoencoder pretraining stage first.
TrainedFold train_fold(const datagen::Dataset& ds, const RunConfig& cfg,
                       const std::vector<size_t>& train_indices, int fold);

using PredictFn = std::function<DenseTensor(const datagen::MctfSample&)>;

/// Micro-pooled AP plus the per-sample metrics the task defines.
metrics::FoldMetrics evaluate_fold(const datagen::Dataset& ds, const RunConfig& cfg,
                                   const std::vector<size_t>& test_indices,
                                   const PredictFn& predict, int fold);

/// Fits the configured baseline on the training split and returns its
/// prediction closure.
PredictFn make_baseline_predictor(const datagen::Dataset& ds, const RunConfig& cfg,
                                  const std::vector<size_t>& train_indices,
                                  std::vector<std::shared_ptr<void>>& keep_alive);

struct CrossValResult {
  metrics::MetricsReport report;
  FoldPlan plan;
  std::vector<TrainedFold> fold_models;  // learned runs only, when requested
};

CrossValResult cross_validate(const datagen::Dataset& ds, const RunConfig& cfg,
                              bool keep_models = false);

struct SweepRow {
  size_t grid_w = 0, grid_h = 0;
  double sigma = 0.0;
  std::vector<double> fold_ap;
  double mean_ap = 0.0;
};

std::vector<SweepRow> sweep(const datagen::Dataset& ds, const RunConfig& base,
                            const std::vector<std::pair<size_t, size_t>>& grid_sizes,
                            const std::vector<double>& sigmas);

struct AblationResult {
  metrics::MetricsReport multi_view;
  metrics::MetricsReport single_view;
};

/// Evaluates the same trained weights on full multi-view inputs and on
/// inputs masked to the departure camera only.
AblationResult ablate_single_view(const datagen::Dataset& ds, const RunConfig& cfg,
                                  CrossValResult& trained);

struct MultiTargetPrediction {
  datagen::MultiTargetGroup group;
  DenseTensor stacked_input;   // (b, k, n, h, w)
  DenseTensor stacked_scores;  // (b, task shape...)
};

/// Batch-stacked prediction for a multi-target group. Coordinate-family
/// folds fall back to sequential per-target prediction with a note.
MultiTargetPrediction predict_multi_target(const datagen::Dataset& ds, const RunConfig& cfg,
                                           const TrainedFold& fold,
                                           const datagen::MultiTargetGroup& group,
                                           std::vector<std::string>* notes = nullptr);

/// report-<stem>.txt / .json plus one PR-curve CSV per fold; file names
/// embed the config hash so identical configs overwrite identically.
void write_reports(const std::string& out_dir, const std::string& stem,
                   const metrics::MetricsReport& report, const Config& echo);
void write_sweep_csv(const std::string& out_dir, const std::string& stem,
                     const std::vector<SweepRow>& rows);

}  // namespace trajtensor::harness
