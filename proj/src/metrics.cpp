#include "trajtensor/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>

#include "json.hpp"
#include "trajtensor/errors.hpp"
#include "trajtensor/heatmap.hpp"

namespace trajtensor::metrics {

const char* task_name(Task t) {
  switch (t) {
    case Task::which: return "which";
    case Task::when: return "when";
    case Task::where: return "where";
  }
  return "?";
}

Task task_from_name(const std::string& name) {
  if (name == "which") return Task::which;
  if (name == "when") return Task::when;
  if (name == "where") return Task::where;
  throw InvalidInputError("unknown task: " + name);
}

namespace {

void check_pool(const std::vector<double>& scores, const std::vector<char>& labels) {
  if (scores.empty()) throw InvalidInputError("empty score pool");
  if (scores.size() != labels.size())
    throw ShapeError("score/label pools differ in length: " + std::to_string(scores.size()) +
                     " vs " + std::to_string(labels.size()));
}

// Indices sorted by descending score; stable, so equal scores keep input order.
std::vector<size_t> ranked(const std::vector<double>& scores) {
  std::vector<size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return scores[a] > scores[b]; });
  return order;
}

void require_binary(const DenseTensor& gt, const char* what) {
  for (size_t i = 0; i < gt.size(); ++i)
    if (gt[i] != 0.0 && gt[i] != 1.0)
      throw InvalidInputError(std::string(what) + ": ground truth must be binary");
}

void require_same_shape(const DenseTensor& pred, const DenseTensor& gt, const char* what) {
  if (!pred.same_shape(gt))
    throw ShapeError(std::string(what) + ": prediction " +
                     DenseTensor::shape_string(pred.shape()) + " vs ground truth " +
                     DenseTensor::shape_string(gt.shape()));
}

}  // namespace

double average_precision(const std::vector<double>& scores, const std::vector<char>& labels) {
  check_pool(scores, labels);
  size_t total_pos = 0;
  for (char l : labels) total_pos += (l != 0);
  if (total_pos == 0) throw NoPositivesError("average precision needs at least one positive");

  auto order = ranked(scores);
  double ap = 0.0;
  size_t tp = 0, fp = 0, tp_prev = 0;
  size_t i = 0;
  while (i < order.size()) {
    double threshold = scores[order[i]];
    // Everything tied at this score crosses the threshold together.
    while (i < order.size() && scores[order[i]] == threshold) {
      if (labels[order[i]]) ++tp; else ++fp;
      ++i;
    }
    if (tp > tp_prev) {
      double precision = double(tp) / double(tp + fp);
      double delta_recall = double(tp - tp_prev) / double(total_pos);
      ap += delta_recall * precision;
      tp_prev = tp;
    }
  }
  return ap;
}

PrCurve pr_curve(const std::vector<double>& scores, const std::vector<char>& labels) {
  check_pool(scores, labels);
  size_t total_pos = 0;
  for (char l : labels) total_pos += (l != 0);
  if (total_pos == 0) throw NoPositivesError("PR curve needs at least one positive");

  auto order = ranked(scores);
  PrCurve curve;
  size_t tp = 0, fp = 0;
  size_t i = 0;
  while (i < order.size()) {
    double threshold = scores[order[i]];
    while (i < order.size() && scores[order[i]] == threshold) {
      if (labels[order[i]]) ++tp; else ++fp;
      ++i;
    }
    curve.points.push_back({threshold, double(tp) / double(tp + fp), double(tp) / double(total_pos)});
  }
  return curve;
}

double siou_when(const DenseTensor& pred, const DenseTensor& gt) {
  require_same_shape(pred, gt, "siou_when");
  if (pred.rank() != 2) throw ShapeError("siou_when expects (cameras, timesteps)");
  require_binary(gt, "siou_when");

  size_t k = pred.dim(0), m = pred.dim(1);
  double acc = 0.0;
  size_t positive_cameras = 0;
  for (size_t c = 0; c < k; ++c) {
    bool has_positive = false;
    double on_mass = 0.0, total_mass = 0.0;
    for (size_t t = 0; t < m; ++t) {
      double p = pred.at(c, t);
      total_mass += p;
      if (gt.at(c, t) == 1.0) {
        has_positive = true;
        on_mass += p;
      }
    }
    if (!has_positive) continue;
    ++positive_cameras;
    acc += total_mass > 0.0 ? on_mass / total_mass : 0.0;
  }
  if (positive_cameras == 0) throw NoPositivesError("siou_when: no positive camera");
  return acc / double(positive_cameras);
}

double siou_where(const DenseTensor& pred, const DenseTensor& gt) {
  require_same_shape(pred, gt, "siou_where");
  if (pred.rank() != 4) throw ShapeError("siou_where expects (cameras, timesteps, h, w)");
  require_binary(gt, "siou_where");

  size_t k = pred.dim(0), m = pred.dim(1), cells = pred.dim(2) * pred.dim(3);
  double acc = 0.0;
  size_t positive_cameras = 0;
  for (size_t c = 0; c < k; ++c) {
    double camera_acc = 0.0;
    size_t present_steps = 0;
    for (size_t t = 0; t < m; ++t) {
      const double* ps = pred.data() + (c * m + t) * cells;
      const double* gs = gt.data() + (c * m + t) * cells;
      bool present = false;
      double on_mass = 0.0, total_mass = 0.0;
      for (size_t g = 0; g < cells; ++g) {
        total_mass += ps[g];
        if (gs[g] == 1.0) {
          present = true;
          on_mass += ps[g];
        }
      }
      if (!present) continue;
      ++present_steps;
      camera_acc += total_mass > 0.0 ? on_mass / total_mass : 0.0;
    }
    if (present_steps == 0) continue;
    ++positive_cameras;
    acc += camera_acc / double(present_steps);
  }
  if (positive_cameras == 0) throw NoPositivesError("siou_where: no positive camera");
  return acc / double(positive_cameras);
}

std::pair<double, double> displacement_errors(const DenseTensor& pred, const DenseTensor& gt,
                                              double image_w, double image_h) {
  require_same_shape(pred, gt, "displacement_errors");
  if (pred.rank() != 4) throw ShapeError("displacement_errors expects (cameras, timesteps, h, w)");
  require_binary(gt, "displacement_errors");

  size_t k = pred.dim(0), m = pred.dim(1), h = pred.dim(2), w = pred.dim(3);
  size_t cells = h * w;
  double diagonal = std::sqrt(image_w * image_w + image_h * image_h);

  auto slice = [&](const DenseTensor& t4, size_t c, size_t t) {
    Heatmap hm(w, h);
    const double* s = t4.data() + (c * m + t) * cells;
    std::copy(s, s + cells, hm.values().begin());
    return hm;
  };

  double ade_acc = 0.0, fde_acc = 0.0;
  size_t positive_cameras = 0;
  for (size_t c = 0; c < k; ++c) {
    double dist_acc = 0.0, last_dist = 0.0;
    size_t present_steps = 0;
    for (size_t t = 0; t < m; ++t) {
      Heatmap gt_slice = slice(gt, c, t);
      if (gt_slice.sum() <= 0.0) continue;
      auto [gx, gy] = center_of_mass(gt_slice, image_w, image_h);
      Heatmap pred_slice = slice(pred, c, t);
      double dist;
      if (pred_slice.sum() <= 0.0) {
        dist = diagonal;  // declared worst case for an empty prediction
      } else {
        auto [px, py] = center_of_mass(pred_slice, image_w, image_h);
        dist = std::sqrt((px - gx) * (px - gx) + (py - gy) * (py - gy));
      }
      dist_acc += dist;
      last_dist = dist;
      ++present_steps;
    }
    if (present_steps == 0) continue;
    ++positive_cameras;
    ade_acc += dist_acc / double(present_steps);
    fde_acc += last_dist;
  }
  if (positive_cameras == 0) throw NoPositivesError("displacement_errors: no positive camera");
  return {ade_acc / double(positive_cameras), fde_acc / double(positive_cameras)};
}

FoldMetrics MetricsReport::mean() const {
  FoldMetrics out;
  out.fold = -1;
  size_t ap_n = 0;
  double ap_sum = 0.0;
  double sw = 0.0, swh = 0.0, ade = 0.0, fde = 0.0;
  size_t sw_n = 0, swh_n = 0, de_n = 0;
  for (const auto& f : folds) {
    out.sample_count += f.sample_count;
    if (!f.ap_skipped) {
      ap_sum += f.ap;
      ++ap_n;
    }
    if (f.siou_when) { sw += *f.siou_when; ++sw_n; }
    if (f.siou_where) { swh += *f.siou_where; ++swh_n; }
    if (f.ade) { ade += *f.ade; fde += *f.fde; ++de_n; }
  }
  out.ap_skipped = (ap_n == 0);
  if (ap_n) out.ap = ap_sum / double(ap_n);
  if (sw_n) out.siou_when = sw / double(sw_n);
  if (swh_n) out.siou_where = swh / double(swh_n);
  if (de_n) {
    out.ade = ade / double(de_n);
    out.fde = fde / double(de_n);
  }
  return out;
}

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

void emit_fold(std::ostream& out, const std::string& prefix, Task task, const FoldMetrics& f) {
  std::string ap_key = std::string("ap_") + task_name(task);
  out << prefix << "samples = " << f.sample_count << "\n";
  if (f.ap_skipped)
    out << prefix << ap_key << " = skipped (no positives)\n";
  else
    out << prefix << ap_key << " = " << fmt(f.ap) << "\n";
  if (f.siou_when) out << prefix << "siou_when = " << fmt(*f.siou_when) << "\n";
  if (f.siou_where) out << prefix << "siou_where = " << fmt(*f.siou_where) << "\n";
  if (f.ade) out << prefix << "ade_where_px = " << fmt(*f.ade) << "\n";
  if (f.fde) out << prefix << "fde_where_px = " << fmt(*f.fde) << "\n";
}

nlohmann::ordered_json fold_json(Task task, const FoldMetrics& f) {
  nlohmann::ordered_json j;
  j["samples"] = f.sample_count;
  std::string ap_key = std::string("ap_") + task_name(task);
  if (f.ap_skipped)
    j[ap_key] = nullptr;
  else
    j[ap_key] = f.ap;
  if (f.siou_when) j["siou_when"] = *f.siou_when;
  if (f.siou_where) j["siou_where"] = *f.siou_where;
  if (f.ade) j["ade_where_px"] = *f.ade;
  if (f.fde) j["fde_where_px"] = *f.fde;
  return j;
}

}  // namespace

void write_report_text(std::ostream& out, const MetricsReport& report,
                       const std::vector<std::pair<std::string, std::string>>& header) {
  out << "task = " << task_name(report.task) << "\n";
  for (const auto& [k, v] : header) out << k << " = " << v << "\n";
  for (const auto& f : report.folds)
    emit_fold(out, "fold." + std::to_string(f.fold) + ".", report.task, f);
  emit_fold(out, "mean.", report.task, report.mean());
}

void write_report_json(std::ostream& out, const MetricsReport& report,
                       const std::vector<std::pair<std::string, std::string>>& header) {
  nlohmann::ordered_json j;
  j["task"] = task_name(report.task);
  nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
  for (const auto& [k, v] : header) cfg[k] = v;
  j["config"] = cfg;
  j["folds"] = nlohmann::ordered_json::array();
  for (const auto& f : report.folds) {
    auto jf = fold_json(report.task, f);
    jf["fold"] = f.fold;
    j["folds"].push_back(jf);
  }
  j["mean"] = fold_json(report.task, report.mean());
  out << j.dump(2) << "\n";
}

void write_pr_csv(std::ostream& out, const PrCurve& curve) {
  out << "threshold,precision,recall\n";
  char buf[128];
  for (const auto& p : curve.points) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", p.threshold, p.precision, p.recall);
    out << buf;
  }
}

}  // namespace trajtensor::metrics
