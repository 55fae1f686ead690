#pragma once

#include <optional>
#include <vector>

#include "trajtensor/heatmap.hpp"
#include "trajtensor/tensor.hpp"

namespace trajtensor {

/// One camera's box sequence with explicit missing entries (null trajectory
/// steps are simply absent boxes).
using CoordinateTrack = std::vector<std::optional<BoundingBox>>;

/// Rank-4 stack of per-camera, per-timestep heatmaps with scores in [0,1].
/// Semantically (cameras, timesteps, grid w, grid h); stored row-major as
/// (camera, timestep, row gy, column gx) so a slice is an image.
class TrajectoryTensor {
 public:
  TrajectoryTensor() = default;
  TrajectoryTensor(size_t cameras, size_t timesteps, size_t w, size_t h);

  size_t cameras() const { return k_; }
  size_t timesteps() const { return t_; }
  size_t grid_w() const { return w_; }
  size_t grid_h() const { return h_; }

  double& at(size_t cam, size_t step, size_t gx, size_t gy) {
    return data_.at(cam, step, gy, gx);
  }
  double at(size_t cam, size_t step, size_t gx, size_t gy) const {
    return data_.at(cam, step, gy, gx);
  }

  void set_slice(size_t cam, size_t step, const Heatmap& hm);
  Heatmap slice(size_t cam, size_t step) const;
  double slice_sum(size_t cam, size_t step) const;

  DenseTensor& tensor() { return data_; }
  const DenseTensor& tensor() const { return data_; }

 private:
  size_t k_ = 0, t_ = 0, w_ = 0, h_ = 0;
  DenseTensor data_;  // shape (k, t, h, w)
};

/// Encode per-camera tracks into a trajectory tensor: each present box is
/// rasterized and smoothed; absent entries become all-zero slices.
/// tracks[cam][step] indexes cameras 0..k-1 and timesteps 0..t-1.
TrajectoryTensor build_trajectory_tensor(const std::vector<CoordinateTrack>& tracks, size_t k,
                                         size_t t, size_t w, size_t h, double sigma);

}  // namespace trajtensor
