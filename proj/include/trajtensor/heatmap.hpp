#pragma once

#include <utility>
#include <vector>

#include "trajtensor/errors.hpp"

namespace trajtensor {

/// Axis-aligned box in normalized image coordinates. Origin top-left,
/// x rightward, y downward, all fields in [0,1], x1<x2 and y1<y2.
struct BoundingBox {
  double x1 = 0.0, y1 = 0.0, x2 = 0.0, y2 = 0.0;

  bool valid() const {
    return x1 >= 0.0 && y1 >= 0.0 && x2 <= 1.0 && y2 <= 1.0 && x2 > x1 && y2 > y1;
  }
  double center_x() const { return 0.5 * (x1 + x2); }
  double center_y() const { return 0.5 * (y1 + y2); }
  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
};

/// One camera/timestep grid of presence scores in [0,1]. Stored row-major
/// by grid row: value(gx, gy) with gx in [0,w) columns, gy in [0,h) rows.
class Heatmap {
 public:
  Heatmap() = default;
  Heatmap(size_t w, size_t h, double fill = 0.0);

  size_t width() const { return w_; }
  size_t height() const { return h_; }

  double& value(size_t gx, size_t gy) { return values_[gy * w_ + gx]; }
  double value(size_t gx, size_t gy) const { return values_[gy * w_ + gx]; }

  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }

  double max_value() const;
  double sum() const;

 private:
  size_t w_ = 0, h_ = 0;
  std::vector<double> values_;
};

/// Rasterize a box onto a w x h grid. A cell is 1 iff the open box
/// rectangle overlaps the cell rectangle with positive area, so one object
/// may span any number of cells. Degenerate boxes are rejected.
Heatmap bbox_to_heatmap(const BoundingBox& bbox, size_t w, size_t h);

/// Gaussian blur with kernel exp(-(dx^2+dy^2)/(2 sigma^2)) truncated at
/// radius ceil(3 sigma), zero padding, rescaled afterwards so the maximum
/// equals the pre-smoothing maximum. sigma = 0 is the identity.
Heatmap gaussian_smooth(const Heatmap& hm, double sigma);

/// Value-weighted mean of cell centers, mapped to image pixels. The cell
/// (gx,gy) center sits at ((gx+0.5)*image_w/w, (gy+0.5)*image_h/h).
/// Throws InvalidInputError when the heatmap has zero total mass.
std::pair<double, double> center_of_mass(const Heatmap& hm, double image_w, double image_h);

}  // namespace trajtensor
