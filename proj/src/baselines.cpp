#include "trajtensor/baselines.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "trajtensor/errors.hpp"

namespace trajtensor::baselines {

void CameraDistanceMatrix::validate() const {
  if (values.size() != cameras * cameras)
    throw InvalidInputError("distance matrix size does not match camera count");
  for (size_t i = 0; i < cameras; ++i) {
    if (at(i, i) != 0.0) throw InvalidInputError("distance matrix diagonal must be zero");
    for (size_t j = 0; j < cameras; ++j) {
      if (at(i, j) < 0.0) throw InvalidInputError("negative camera distance");
      if (at(i, j) != at(j, i)) throw InvalidInputError("distance matrix must be symmetric");
    }
  }
}

void CameraDistanceMatrix::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open for writing: " + path);
  out << cameras << "\n";
  char buf[40];
  for (size_t i = 0; i < cameras; ++i) {
    for (size_t j = 0; j < cameras; ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", at(i, j));
      out << (j ? " " : "") << buf;
    }
    out << "\n";
  }
  if (!out) throw DataError("write failed: " + path);
}

CameraDistanceMatrix CameraDistanceMatrix::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open: " + path);
  CameraDistanceMatrix m;
  if (!(in >> m.cameras) || m.cameras == 0) throw DataError("bad camera count in " + path);
  m.values.resize(m.cameras * m.cameras);
  for (double& v : m.values)
    if (!(in >> v)) throw DataError("truncated distance matrix: " + path);
  m.validate();
  return m;
}

std::vector<double> shortest_distance_predict(const CameraDistanceMatrix& m,
                                              size_t departure_camera) {
  if (departure_camera >= m.cameras)
    throw InvalidInputError("departure camera " + std::to_string(departure_camera) +
                            " outside 0.." + std::to_string(m.cameras - 1));
  std::vector<double> scores(m.cameras, 0.0);
  for (size_t i = 0; i < m.cameras; ++i) {
    if (i == departure_camera) continue;  // never predicts the camera just left
    scores[i] = 1.0 / (1.0 + m.at(departure_camera, i));
  }
  return scores;
}

void MeanBaseline::fit(const std::vector<DenseTensor>& targets,
                       const std::vector<int>& departure_cameras, size_t cameras) {
  if (targets.size() != departure_cameras.size())
    throw ShapeError("mean baseline: targets/cameras length mismatch");
  fit_stream(
      targets.size(), [&](size_t i) { return targets[i]; },
      [&](size_t i) { return departure_cameras[i]; }, cameras);
}

void MeanBaseline::fit_stream(size_t count, const std::function<DenseTensor(size_t)>& target_of,
                              const std::function<int(size_t)>& camera_of, size_t cameras) {
  if (count == 0) throw InvalidInputError("mean baseline: empty training set");
  std::vector<size_t> counts(cameras, 0);
  for (size_t s = 0; s < count; ++s) {
    DenseTensor target = target_of(s);
    int c = camera_of(s);
    if (c < 0 || size_t(c) >= cameras) throw InvalidInputError("mean baseline: bad camera index");
    if (s == 0) {
      global_ = DenseTensor(target.shape());
      per_camera_.assign(cameras, DenseTensor(target.shape()));
      seen_.assign(cameras, false);
    }
    if (!target.same_shape(global_)) throw ShapeError("mean baseline: ragged targets");
    for (size_t i = 0; i < global_.size(); ++i) {
      global_[i] += target[i];
      per_camera_[size_t(c)][i] += target[i];
    }
    ++counts[size_t(c)];
  }
  for (size_t i = 0; i < global_.size(); ++i) global_[i] /= double(count);
  for (size_t c = 0; c < cameras; ++c) {
    if (counts[c] == 0) continue;
    seen_[c] = true;
    for (size_t i = 0; i < per_camera_[c].size(); ++i) per_camera_[c][i] /= double(counts[c]);
  }
}

const DenseTensor& MeanBaseline::predict(size_t departure_camera) const {
  if (per_camera_.empty()) throw StateError("mean baseline: predict before fit");
  if (departure_camera >= per_camera_.size())
    throw InvalidInputError("mean baseline: bad camera index");
  return seen_[departure_camera] ? per_camera_[departure_camera] : global_;
}

void MostSimilarBaseline::fit(const std::vector<DenseTensor>& tracks,
                              const std::vector<int>& departure_cameras, size_t cameras) {
  if (tracks.size() != departure_cameras.size())
    throw ShapeError("most similar baseline: input length mismatch");
  pools_.assign(cameras, {});
  for (size_t s = 0; s < tracks.size(); ++s) {
    int c = departure_cameras[s];
    if (c < 0 || size_t(c) >= cameras)
      throw InvalidInputError("most similar baseline: bad camera index");
    pools_[size_t(c)].push_back({tracks[s], s});
  }
}

size_t MostSimilarBaseline::nearest(size_t departure_camera, const DenseTensor& track) const {
  if (pools_.empty()) throw StateError("most similar baseline: predict before fit");
  if (departure_camera >= pools_.size())
    throw InvalidInputError("most similar baseline: bad camera index");
  const auto& pool = pools_[departure_camera];
  if (pool.empty()) return npos;
  size_t best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < pool.size(); ++i) {
    if (!pool[i].track.same_shape(track))
      throw ShapeError("most similar baseline: track shape mismatch");
    double d = 0.0;
    for (size_t j = 0; j < track.size(); ++j) {
      double diff = pool[i].track[j] - track[j];
      d += diff * diff;
    }
    if (d < best_dist) {  // strict: ties keep the earliest index
      best_dist = d;
      best = i;
    }
  }
  return pool[best].train_index;
}

HandcraftedFeature handcrafted_extract(const CoordinateTrack& track) {
  std::vector<const BoundingBox*> present;
  for (const auto& b : track)
    if (b) present.push_back(&*b);
  if (present.size() < 3)
    throw InvalidInputError("handcrafted features need at least 3 present timesteps");

  size_t p = present.size();
  std::vector<double> vx(p - 1), vy(p - 1);
  for (size_t i = 0; i + 1 < p; ++i) {
    vx[i] = present[i + 1]->center_x() - present[i]->center_x();
    vy[i] = present[i + 1]->center_y() - present[i]->center_y();
  }
  double mvx = 0.0, mvy = 0.0;
  for (size_t i = 0; i < vx.size(); ++i) {
    mvx += vx[i];
    mvy += vy[i];
  }
  mvx /= double(vx.size());
  mvy /= double(vy.size());

  double max_ = 0.0, may = 0.0;
  for (size_t i = 0; i + 1 < vx.size(); ++i) {
    max_ += vx[i + 1] - vx[i];
    may += vy[i + 1] - vy[i];
  }
  max_ /= double(vx.size() - 1);
  may /= double(vy.size() - 1);

  const BoundingBox& last = *present.back();
  HandcraftedFeature f;
  f.values[0] = mvx;
  f.values[1] = mvy;
  f.values[2] = max_;
  f.values[3] = may;
  f.values[4] = last.height();
  f.values[5] = last.width();
  f.values[6] = last.x1;
  f.values[7] = last.y1;
  f.values[8] = last.x2;
  f.values[9] = last.y2;
  return f;
}

HandcraftedClassifier::HandcraftedClassifier(size_t cameras,
                                             const std::vector<size_t>& output_shape,
                                             uint64_t seed)
    : output_shape_(output_shape) {
  size_t out_n = 1;
  for (size_t d : output_shape) out_n *= d;
  for (size_t c = 0; c < cameras; ++c) {
    auto pc = std::make_unique<PerCamera>();
    Rng rng = Rng::derive(seed, c);
    pc->l1 = nn::Dense::create(pc->store, "l1", HandcraftedFeature::kSize, 64, rng);
    pc->l2 = nn::Dense::create(pc->store, "l2", 64, out_n, rng);
    models_.push_back(std::move(pc));
  }
}

DenseTensor HandcraftedClassifier::forward(PerCamera& pc, const HandcraftedFeature& f) {
  DenseTensor x({HandcraftedFeature::kSize});
  for (size_t i = 0; i < HandcraftedFeature::kSize; ++i) x[i] = f.values[i];
  pc.pre1 = pc.l1.forward(pc.store, x, pc.c1);
  DenseTensor out = pc.l2.forward(pc.store, nn::relu(pc.pre1), pc.c2);
  DenseTensor shaped(output_shape_);
  std::copy(out.data(), out.data() + out.size(), shaped.data());
  pc.scores = nn::sigmoid(shaped);
  return pc.scores;
}

DenseTensor HandcraftedClassifier::predict(size_t departure_camera, const HandcraftedFeature& f) {
  if (departure_camera >= models_.size())
    throw InvalidInputError("handcrafted classifier: bad camera index");
  return forward(*models_[departure_camera], f);
}

double HandcraftedClassifier::train_batch(size_t departure_camera,
                                          const std::vector<HandcraftedFeature>& features,
                                          const std::vector<const DenseTensor*>& targets,
                                          double learning_rate) {
  if (features.empty() || features.size() != targets.size())
    throw InvalidInputError("handcrafted classifier: bad batch");
  PerCamera& pc = *models_[departure_camera];
  pc.adam.lr = learning_rate;
  pc.store.zero_grads();
  double total = 0.0;
  for (size_t s = 0; s < features.size(); ++s) {
    DenseTensor scores = forward(pc, features[s]);
    DenseTensor d_scores;
    total += nn::bce_loss(scores, *targets[s], &d_scores);
    DenseTensor d = nn::sigmoid_backward(pc.scores, d_scores);
    DenseTensor flat({d.size()});
    std::copy(d.data(), d.data() + d.size(), flat.data());
    DenseTensor dh = pc.l2.backward(pc.store, pc.c2, flat);
    dh = nn::relu_backward(pc.pre1, dh);
    pc.l1.backward(pc.store, pc.c1, dh);
  }
  for (size_t p = 0; p < pc.store.count(); ++p) {
    auto& g = pc.store.param(p).grad;
    for (size_t i = 0; i < g.size(); ++i) g[i] /= double(features.size());
  }
  nn::adam_step(pc.adam, pc.store);
  return total / double(features.size());
}

}  // namespace trajtensor::baselines
