#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "trajtensor/tensor.hpp"

namespace trajtensor::metrics {

enum class Task { which, when, where };

const char* task_name(Task t);
Task task_from_name(const std::string& name);

/// Scores plus binary ground truth for one task. Shapes: (k) for which,
/// (k,m) for when, (k,m,h,w) for where.
struct PredictionTarget {
  Task task = Task::which;
  DenseTensor scores;
  DenseTensor labels;
};

struct PrPoint {
  double threshold = 0.0;
  double precision = 0.0;
  double recall = 0.0;
};

struct PrCurve {
  std::vector<PrPoint> points;  // one per distinct threshold, descending
};

/// Step-summed average precision over a flat pool: walk distinct score
/// thresholds in descending order and accumulate delta-recall times
/// precision. Equal scores cross a threshold together. Callers micro-pool
/// all samples/cameras/timesteps/cells of one task before calling.
/// Throws NoPositivesError when the pool has no positive label.
double average_precision(const std::vector<double>& scores, const std::vector<char>& labels);

PrCurve pr_curve(const std::vector<double>& scores, const std::vector<char>& labels);

/// Temporal soft IOU: over ground-truth-positive cameras, the fraction of
/// predicted mass that falls on ground-truth-positive timesteps. A camera
/// with zero predicted mass contributes 0. pred and gt are (k,m).
double siou_when(const DenseTensor& pred, const DenseTensor& gt);

/// Spatial soft IOU over (k,m,h,w): per positive camera and per
/// ground-truth-present timestep, the fraction of predicted cell mass
/// inside the ground-truth cells, averaged over timesteps then cameras.
double siou_where(const DenseTensor& pred, const DenseTensor& gt);

/// Centroid displacement between prediction and ground truth in image
/// pixels, evaluated on ground-truth-present timesteps of each positive
/// camera. Returns (ADE, FDE), both averaged over positive cameras. A
/// prediction slice with zero mass is charged the image diagonal.
std::pair<double, double> displacement_errors(const DenseTensor& pred, const DenseTensor& gt,
                                              double image_w, double image_h);

/// Metrics of one cross-validation fold. Optional fields are present only
/// when the task defines them.
struct FoldMetrics {
  int fold = 0;
  size_t sample_count = 0;
  bool ap_skipped = false;  // pooled labels had no positives
  double ap = 0.0;
  std::optional<double> siou_when;
  std::optional<double> siou_where;
  std::optional<double> ade;
  std::optional<double> fde;
  PrCurve curve;
};

struct MetricsReport {
  Task task = Task::which;
  std::vector<FoldMetrics> folds;
  FoldMetrics mean() const;
};

// Line-delimited key = value report; header lines are echoed first.
void write_report_text(std::ostream& out, const MetricsReport& report,
                       const std::vector<std::pair<std::string, std::string>>& header);
// Machine-readable structured report.
void write_report_json(std::ostream& out, const MetricsReport& report,
                       const std::vector<std::pair<std::string, std::string>>& header);
// threshold,precision,recall rows for external plotting.
void write_pr_csv(std::ostream& out, const PrCurve& curve);

}  // namespace trajtensor::metrics
