#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "trajtensor/baselines.hpp"
#include "trajtensor/tensor.hpp"
#include "trajtensor/trajectory_tensor.hpp"

namespace trajtensor::datagen {

/// One departure event: the observed window across all cameras plus the
/// future window the targets are derived from.
struct MctfSample {
  int64_t id = 0;
  int day = 0;
  int departure_camera = 0;
  int64_t depart_step = 0;  // absolute timestep within the day

  std::vector<CoordinateTrack> input_tracks;   // k tracks of n entries
  std::vector<CoordinateTrack> future_tracks;  // k tracks of m entries

  // Derived which/when targets; the (k,m,9,16) where target is built on
  // demand since it is two orders of magnitude larger.
  std::vector<double> which;  // k, binary
  DenseTensor when;           // (k, m), binary

  DenseTensor where_target(size_t target_w = 16, size_t target_h = 9) const;
};

struct DatasetMeta {
  int schema = 1;
  size_t cameras = 0;
  size_t observed = 10;  // n
  size_t horizon = 60;   // m
  int days = 0;
  std::string distance_file = "distances.txt";
  std::vector<std::pair<std::string, std::string>> config_echo;
};

struct Dataset {
  DatasetMeta meta;
  baselines::CameraDistanceMatrix distances;
  std::vector<MctfSample> samples;
};

/// Derive which/when from the future tracks. The where target reduces to
/// these exactly: any box lights at least one cell, so any-reduction over
/// cells gives when and over time gives which. Throws InvalidInputError when
/// no future box exists anywhere (such samples are discarded upstream).
void label_sample(MctfSample& sample, size_t cameras, size_t horizon);

/// Directory layout: meta (text), distances.txt, samples.ndrec (one record
/// per line). Round-trips exactly; coordinates are written with full double
/// precision.
void save_dataset(const std::string& dir, const Dataset& ds);
Dataset load_dataset(const std::string& dir);

}  // namespace trajtensor::datagen
