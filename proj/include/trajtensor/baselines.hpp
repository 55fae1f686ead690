#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "trajtensor/metrics.hpp"
#include "trajtensor/nn.hpp"
#include "trajtensor/tensor.hpp"
#include "trajtensor/trajectory_tensor.hpp"

namespace trajtensor::baselines {

/// Physical camera distances in meters: symmetric, zero diagonal.
struct CameraDistanceMatrix {
  size_t cameras = 0;
  std::vector<double> values;  // k*k row-major

  double at(size_t i, size_t j) const { return values[i * cameras + j]; }
  double& at(size_t i, size_t j) { return values[i * cameras + j]; }
  void validate() const;

  void save(const std::string& path) const;  // plain-text k x k matrix
  static CameraDistanceMatrix load(const std::string& path);
};

/// Scores every camera by 1/(1+d) from the departure camera, which itself
/// scores 0, so the nearest other camera wins the argmax and the scores
/// remain usable for ranking metrics. Which-task only.
std::vector<double> shortest_distance_predict(const CameraDistanceMatrix& m,
                                              size_t departure_camera);

/// Element-wise mean of training targets per departure camera; cameras with
/// no training samples fall back to the global mean. The streaming fit keeps
/// memory flat even for the large where-task targets.
class MeanBaseline {
 public:
  void fit(const std::vector<DenseTensor>& targets, const std::vector<int>& departure_cameras,
           size_t cameras);
  void fit_stream(size_t count, const std::function<DenseTensor(size_t)>& target_of,
                  const std::function<int(size_t)>& camera_of, size_t cameras);
  const DenseTensor& predict(size_t departure_camera) const;

 private:
  std::vector<DenseTensor> per_camera_;
  std::vector<bool> seen_;
  DenseTensor global_;
};

/// Finds the training track (same departure camera) nearest in flattened L2
/// over the (n,4) coordinates; ties pick the lowest training index. The
/// caller maps the returned training position back to its stored target, so
/// predictions are always exact training targets. npos marks an empty pool.
class MostSimilarBaseline {
 public:
  static constexpr size_t npos = size_t(-1);

  void fit(const std::vector<DenseTensor>& tracks, const std::vector<int>& departure_cameras,
           size_t cameras);
  size_t nearest(size_t departure_camera, const DenseTensor& track) const;

 private:
  struct Entry {
    DenseTensor track;
    size_t train_index;
  };
  std::vector<std::vector<Entry>> pools_;
};

/// velocity x/y, acceleration x/y, last box height, width, x1, y1, x2, y2.
struct HandcraftedFeature {
  static constexpr size_t kSize = 10;
  double values[kSize] = {0};
};

/// Finite-difference motion features over the present boxes of a track.
/// Throws InvalidInputError with fewer than 3 present timesteps.
HandcraftedFeature handcrafted_extract(const CoordinateTrack& track);

/// Two dense layers (10 -> 64 -> output) with sigmoid outputs, one model per
/// departure camera, trained with BCE + Adam.
class HandcraftedClassifier {
 public:
  HandcraftedClassifier(size_t cameras, const std::vector<size_t>& output_shape, uint64_t seed);

  DenseTensor predict(size_t departure_camera, const HandcraftedFeature& f);
  /// One Adam step on a batch for one camera's model; returns mean BCE.
  double train_batch(size_t departure_camera, const std::vector<HandcraftedFeature>& features,
                     const std::vector<const DenseTensor*>& targets, double learning_rate);

 private:
  struct PerCamera {
    nn::ParamStore store;
    nn::Dense l1, l2;
    nn::AdamState adam;
    nn::Cache c1, c2;
    DenseTensor pre1, scores;
  };
  DenseTensor forward(PerCamera& pc, const HandcraftedFeature& f);
  std::vector<size_t> output_shape_;
  std::vector<std::unique_ptr<PerCamera>> models_;
};

}  // namespace trajtensor::baselines
