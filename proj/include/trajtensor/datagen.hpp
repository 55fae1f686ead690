#pragma once

#include <optional>

#include "trajtensor/config.hpp"
#include "trajtensor/dataset.hpp"
#include "trajtensor/rng.hpp"

namespace trajtensor::datagen {

enum class ViewAxis { pos_x, neg_x, pos_y, neg_y };

ViewAxis view_axis_from_name(const std::string& name);
const char* view_axis_name(ViewAxis a);

/// An overhead camera watching a rectangle of the floorplan. The view axis
/// runs from the near edge into the scene; apparent box height interpolates
/// between near_height and far_height with depth.
struct CameraModel {
  int id = 0;
  double pos_x = 0.0, pos_y = 0.0;          // for the distance matrix, meters
  double fov_x0 = 0.0, fov_y0 = 0.0;        // floorplan rectangle
  double fov_x1 = 1.0, fov_y1 = 1.0;
  ViewAxis axis = ViewAxis::pos_y;
  double near_height = 0.5, far_height = 0.12;  // box height as frame fraction

  void validate() const;
};

struct ScenarioConfig {
  std::vector<CameraModel> cameras;
  std::vector<std::pair<double, double>> nodes;  // corridor graph, meters
  std::vector<std::pair<int, int>> edges;
  size_t agents = 40;
  int days = 10;
  size_t day_steps = 210;  // ~2000 departure samples with the default world
  double speed_min = 0.8, speed_max = 1.6;  // m/s
  double sample_hz = 5.0;
  size_t observed = 10;  // n, 2 s at 5 Hz
  size_t horizon = 60;   // m, 12 s
  double jitter = 0.01;  // uniform box-center noise, frame fraction
  uint64_t seed = 7;

  void validate() const;
};

/// The default benchmark world: an H-shaped corridor graph watched by five
/// cameras whose fields of view overlap around the junctions, so a target
/// near a junction is seen from more than one camera at once.
ScenarioConfig default_scenario();

/// Scenario from a config file, starting from the default world. [scenario]
/// overrides the population knobs; [camera.N] sections replace the camera
/// list and [graph] the corridor graph when present.
ScenarioConfig scenario_from_config(const Config& cfg);
Config scenario_to_config(const ScenarioConfig& sc);

/// Map a floor position into a camera's image: absent outside the FOV,
/// otherwise a box whose center follows the lateral/depth axes and whose
/// height shrinks near->far. Jitter adds uniform noise to the box center;
/// boxes are shifted (not clipped) to stay inside the frame.
std::optional<BoundingBox> project(double x, double y, const CameraModel& cam, double jitter,
                                   Rng* rng);

/// Simulate agents walking waypoint paths and emit one sample per departure
/// event that re-appears within the horizon. Deterministic per (config, seed).
Dataset generate(const ScenarioConfig& config, uint64_t seed);

struct MultiTargetGroup {
  int day = 0;
  int64_t bin = 0;
  std::vector<size_t> sample_indices;  // into Dataset::samples
};

/// Group samples whose departures fall in the same bin of the same day;
/// singleton groups are discarded (single-target prediction covers those).
std::vector<MultiTargetGroup> group_multi_target(const Dataset& ds, int64_t bin_steps = 10);

}  // namespace trajtensor::datagen
