#include "trajtensor/trajectory_tensor.hpp"

namespace trajtensor {

TrajectoryTensor::TrajectoryTensor(size_t cameras, size_t timesteps, size_t w, size_t h)
    : k_(cameras), t_(timesteps), w_(w), h_(h), data_({cameras, timesteps, h, w}) {}

void TrajectoryTensor::set_slice(size_t cam, size_t step, const Heatmap& hm) {
  if (hm.width() != w_ || hm.height() != h_)
    throw ShapeError("heatmap slice does not match tensor grid");
  for (size_t gy = 0; gy < h_; ++gy)
    for (size_t gx = 0; gx < w_; ++gx) data_.at(cam, step, gy, gx) = hm.value(gx, gy);
}

Heatmap TrajectoryTensor::slice(size_t cam, size_t step) const {
  Heatmap hm(w_, h_);
  for (size_t gy = 0; gy < h_; ++gy)
    for (size_t gx = 0; gx < w_; ++gx) hm.value(gx, gy) = data_.at(cam, step, gy, gx);
  return hm;
}

double TrajectoryTensor::slice_sum(size_t cam, size_t step) const {
  double s = 0.0;
  for (size_t gy = 0; gy < h_; ++gy)
    for (size_t gx = 0; gx < w_; ++gx) s += data_.at(cam, step, gy, gx);
  return s;
}

TrajectoryTensor build_trajectory_tensor(const std::vector<CoordinateTrack>& tracks, size_t k,
                                         size_t t, size_t w, size_t h, double sigma) {
  if (tracks.size() != k)
    throw InvalidInputError("track list covers " + std::to_string(tracks.size()) +
                            " cameras, expected " + std::to_string(k));
  TrajectoryTensor z(k, t, w, h);
  for (size_t cam = 0; cam < k; ++cam) {
    if (tracks[cam].size() > t)
      throw InvalidInputError("track longer than declared timestep count");
    for (size_t step = 0; step < tracks[cam].size(); ++step) {
      const auto& box = tracks[cam][step];
      if (!box) continue;  // null trajectory entry, slice stays zero
      z.set_slice(cam, step, gaussian_smooth(bbox_to_heatmap(*box, w, h), sigma));
    }
  }
  return z;
}

}  // namespace trajtensor
