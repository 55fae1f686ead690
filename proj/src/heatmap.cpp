#include "trajtensor/heatmap.hpp"

#include <algorithm>
#include <cmath>

namespace trajtensor {

Heatmap::Heatmap(size_t w, size_t h, double fill) : w_(w), h_(h), values_(w * h, fill) {
  if (w == 0 || h == 0) throw InvalidInputError("heatmap dimensions must be >= 1");
}

double Heatmap::max_value() const {
  double m = 0.0;
  for (double v : values_) m = std::max(m, v);
  return m;
}

double Heatmap::sum() const {
  double s = 0.0;
  for (double v : values_) s += v;
  return s;
}

Heatmap bbox_to_heatmap(const BoundingBox& bbox, size_t w, size_t h) {
  if (!bbox.valid()) throw InvalidInputError("degenerate or out-of-range bounding box");
  Heatmap hm(w, h);
  for (size_t gy = 0; gy < h; ++gy) {
    double cy0 = double(gy) / double(h);
    double cy1 = double(gy + 1) / double(h);
    double oy = std::min(bbox.y2, cy1) - std::max(bbox.y1, cy0);
    if (oy <= 0.0) continue;
    for (size_t gx = 0; gx < w; ++gx) {
      double cx0 = double(gx) / double(w);
      double cx1 = double(gx + 1) / double(w);
      double ox = std::min(bbox.x2, cx1) - std::max(bbox.x1, cx0);
      if (ox > 0.0) hm.value(gx, gy) = 1.0;
    }
  }
  return hm;
}

Heatmap gaussian_smooth(const Heatmap& hm, double sigma) {
  if (sigma < 0.0) throw InvalidInputError("negative smoothing sigma");
  if (sigma == 0.0) return hm;

  double peak = hm.max_value();
  if (peak == 0.0) return hm;  // all-zero stays all-zero

  int radius = int(std::ceil(3.0 * sigma));
  int side = 2 * radius + 1;
  std::vector<double> kernel(size_t(side) * side);
  double ksum = 0.0;
  for (int dy = -radius; dy <= radius; ++dy) {
    for (int dx = -radius; dx <= radius; ++dx) {
      double v = std::exp(-(double(dx) * dx + double(dy) * dy) / (2.0 * sigma * sigma));
      kernel[size_t(dy + radius) * side + size_t(dx + radius)] = v;
      ksum += v;
    }
  }
  for (double& v : kernel) v /= ksum;

  int w = int(hm.width()), h = int(hm.height());
  Heatmap out(hm.width(), hm.height());
  for (int gy = 0; gy < h; ++gy) {
    for (int gx = 0; gx < w; ++gx) {
      double acc = 0.0;
      for (int dy = -radius; dy <= radius; ++dy) {
        int sy = gy + dy;
        if (sy < 0 || sy >= h) continue;  // zero padding
        for (int dx = -radius; dx <= radius; ++dx) {
          int sx = gx + dx;
          if (sx < 0 || sx >= w) continue;
          acc += kernel[size_t(dy + radius) * side + size_t(dx + radius)] *
                 hm.value(size_t(sx), size_t(sy));
        }
      }
      out.value(size_t(gx), size_t(gy)) = acc;
    }
  }

  // Rescale so the maximum matches the pre-smoothing maximum, keeping
  // every entry inside [0,1].
  double smoothed_peak = out.max_value();
  if (smoothed_peak > 0.0) {
    double scale = peak / smoothed_peak;
    for (double& v : out.values()) v = std::min(1.0, v * scale);
  }
  return out;
}

std::pair<double, double> center_of_mass(const Heatmap& hm, double image_w, double image_h) {
  double mass = hm.sum();
  if (mass <= 0.0) throw InvalidInputError("center of mass of an all-zero heatmap is undefined");
  double sx = 0.0, sy = 0.0;
  size_t w = hm.width(), h = hm.height();
  for (size_t gy = 0; gy < h; ++gy) {
    double cy = (double(gy) + 0.5) * image_h / double(h);
    for (size_t gx = 0; gx < w; ++gx) {
      double v = hm.value(gx, gy);
      if (v == 0.0) continue;
      double cx = (double(gx) + 0.5) * image_w / double(w);
      sx += v * cx;
      sy += v * cy;
    }
  }
  return {sx / mass, sy / mass};
}

}  // namespace trajtensor
