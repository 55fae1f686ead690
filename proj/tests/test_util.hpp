#pragma once

// Shared builders for the unit and acceptance suites: miniature model specs,
// tiny synthetic scenarios, and the gradient-check harness over full models.

#include <functional>
#include <string>
#include <vector>

#include "trajtensor/datagen.hpp"
#include "trajtensor/harness.hpp"
#include "trajtensor/models.hpp"
#include "trajtensor/nn.hpp"
#include "trajtensor/rng.hpp"

namespace testutil {

using namespace trajtensor;

inline models::ModelSpec mini_spec(models::Family family, metrics::Task task) {
  models::ModelSpec spec;
  spec.family = family;
  spec.task = task;
  spec.cameras = 2;
  spec.horizon = 8;
  spec.observed = 4;
  spec.grid_w = 16;
  spec.grid_h = 9;
  spec.channel_scale = 0.125;
  spec.bound_camera = models::is_coordinate(family) ? 0 : -1;
  return spec;
}

inline DenseTensor random_input(const models::ModelSpec& spec, Rng& rng) {
  DenseTensor x(spec.input_shape());
  for (size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform(0.05, 0.95);
  return x;
}

inline DenseTensor random_binary(const std::vector<size_t>& shape, Rng& rng, double p = 0.3) {
  DenseTensor t(shape);
  for (size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform() < p ? 1.0 : 0.0;
  return t;
}

// Freshly built models have zero biases, which parks entire activation maps
// exactly on the relu kink where central differences are undefined. Checks
// run at a generic point instead: every parameter gets a small perturbation.
inline void jitter_params(nn::ParamStore& store, Rng& rng, double amplitude = 0.1) {
  for (size_t p = 0; p < store.count(); ++p) {
    auto& v = store.param(p).value;
    for (size_t i = 0; i < v.size(); ++i) v[i] += rng.uniform(-amplitude, amplitude);
  }
}

// Finite-difference check of d(loss)/d(params) through a full model with a
// BCE head against random binary targets.
inline nn::GradCheckReport model_grad_check(models::MctfModel& model, const DenseTensor& input,
                                            const DenseTensor& target, double fd_step = 1e-4,
                                            size_t max_per_block = 10) {
  auto eval = [&](bool with_grad) {
    DenseTensor pred = model.forward(input);
    if (!with_grad) return nn::bce_loss(pred, target, nullptr);
    DenseTensor d;
    double loss = nn::bce_loss(pred, target, &d);
    model.backward(d);
    return loss;
  };
  return nn::grad_check(model.params(), eval, fd_step, max_per_block);
}

// All 18 family x task combinations on miniature shapes.
struct GradCase {
  std::string name;
  double max_rel_err;
};

inline std::vector<GradCase> all_model_grad_checks(uint64_t seed = 11) {
  std::vector<GradCase> cases;
  using models::Family;
  using metrics::Task;
  for (Family family : {Family::gru, Family::lstm, Family::cnn1d, Family::cnn2d1d, Family::cnn3d,
                        Family::cnn_gru}) {
    for (Task task : {Task::which, Task::when, Task::where}) {
      auto spec = mini_spec(family, task);
      auto model = models::MctfModel::build(spec, seed);
      Rng rng(seed + size_t(task) * 31 + size_t(family) * 7);
      jitter_params(model->params(), rng);
      DenseTensor input = random_input(spec, rng);
      DenseTensor target = random_binary(spec.output_shape(), rng);
      auto report = model_grad_check(*model, input, target);
      cases.push_back({std::string(models::family_name(family)) + "/" +
                           metrics::task_name(task),
                       report.max_rel_err()});
    }
  }
  return cases;
}

// Two-camera corridor with a blind gap in the middle; one agent crossing it
// produces exactly one departure sample within a short day.
inline datagen::ScenarioConfig two_camera_corridor() {
  datagen::ScenarioConfig sc;
  sc.nodes = {{0.0, 0.0}, {30.0, 0.0}};
  sc.edges = {{0, 1}};
  datagen::CameraModel a, b;
  a.id = 0;
  a.pos_x = -1;
  a.pos_y = 0;
  a.fov_x0 = -1;
  a.fov_y0 = -2;
  a.fov_x1 = 10;
  a.fov_y1 = 2;
  a.axis = datagen::ViewAxis::pos_x;
  b.id = 1;
  b.pos_x = 31;
  b.pos_y = 0;
  b.fov_x0 = 20;
  b.fov_y0 = -2;
  b.fov_x1 = 31;
  b.fov_y1 = 2;
  b.axis = datagen::ViewAxis::neg_x;
  sc.cameras = {a, b};
  sc.agents = 1;
  sc.days = 1;
  sc.day_steps = 160;
  sc.speed_min = 1.0;
  sc.speed_max = 1.0;
  sc.jitter = 0.0;
  return sc;
}

// Small but nontrivial dataset for training tests: the default world scaled
// down to a handful of agents and days.
inline datagen::Dataset tiny_default_dataset(int days = 5, size_t agents = 4,
                                             size_t day_steps = 180, uint64_t seed = 3) {
  datagen::ScenarioConfig sc = datagen::default_scenario();
  sc.days = days;
  sc.agents = agents;
  sc.day_steps = day_steps;
  sc.seed = seed;
  return datagen::generate(sc, seed);
}

inline harness::RunConfig base_run_config(metrics::Task task, models::Family family) {
  harness::RunConfig rc;
  rc.task = task;
  rc.family = family;
  rc.channel_scale = 0.25;
  rc.max_epochs = 10;
  rc.patience = 5;
  rc.seed = 5;
  return rc;
}

}  // namespace testutil
