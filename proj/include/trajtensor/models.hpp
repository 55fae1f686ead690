#pragma once

#include <memory>
#include <string>

#include "trajtensor/metrics.hpp"
#include "trajtensor/nn.hpp"
#include "trajtensor/trajectory_tensor.hpp"

namespace trajtensor::models {

enum class Family { gru, lstm, cnn1d, cnn2d1d, cnn3d, cnn_gru };

const char* family_name(Family f);
Family family_from_name(const std::string& name);

/// Coordinate families read one camera's box track and need a model per
/// departure camera; tensor families read the full trajectory tensor with a
/// single unified model.
bool is_coordinate(Family f);
bool is_recurrent_decoder(Family f);

struct ModelSpec {
  Family family = Family::cnn3d;
  metrics::Task task = metrics::Task::which;
  size_t cameras = 5;        // k
  size_t horizon = 60;       // m
  size_t observed = 10;      // n
  size_t grid_w = 16, grid_h = 9;  // input heatmap size (tensor families)
  // Where-task output grid, fixed regardless of input grid size.
  size_t target_w = 16, target_h = 9;
  // Width multiplier over the default channel counts; 1.0 reproduces the
  // documented defaults, smaller values give proportionally thinner models.
  double channel_scale = 1.0;
  int bound_camera = -1;     // departure camera for coordinate families

  void validate() const;
  size_t feature_size() const;  // 128 coordinate / 512 tensor, scaled
  std::vector<size_t> input_shape() const;
  std::vector<size_t> output_shape() const;
};

/// Zero every camera slice except keep_camera.
TrajectoryTensor single_view_mask(const TrajectoryTensor& z, size_t keep_camera);

/// One architecture instance: an encoder plus the head matching spec.task.
/// forward caches activations in the model, so train steps are
/// forward-then-backward on the same instance; inference with distinct
/// instances is safe concurrently.
class MctfModel {
 public:
  virtual ~MctfModel() = default;

  const ModelSpec& spec() const { return spec_; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }

  /// Coordinate families take (n,4) box tracks; tensor families take the
  /// (k,n,h,w) trajectory tensor. Returns task-shaped scores in (0,1).
  virtual DenseTensor forward(const DenseTensor& input) = 0;
  /// Accumulates parameter gradients; returns gradient w.r.t. the input.
  virtual DenseTensor backward(const DenseTensor& d_scores) = 0;

  // CNN-GRU autoencoder hooks; other families have none.
  virtual bool has_autoencoder() const { return false; }
  virtual DenseTensor autoencode_forward(const DenseTensor& slice);
  virtual void autoencode_backward(const DenseTensor& d_recon);

  static std::unique_ptr<MctfModel> build(const ModelSpec& spec, uint64_t init_seed);

 protected:
  explicit MctfModel(const ModelSpec& spec) : spec_(spec) {}
  ModelSpec spec_;
  nn::ParamStore params_;
};

}  // namespace trajtensor::models
