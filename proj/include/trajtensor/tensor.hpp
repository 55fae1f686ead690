#pragma once

#include <cstdint>
#include <initializer_list>
#include <iosfwd>
#include <string>
#include <vector>

#include "trajtensor/errors.hpp"

namespace trajtensor {

/// Dense row-major tensor of 64-bit reals, rank 0..5. All training math
/// happens in doubles; values are narrowed to 32 bits only on disk.
class DenseTensor {
 public:
  DenseTensor() = default;
  explicit DenseTensor(std::vector<size_t> shape, double fill = 0.0);
  DenseTensor(std::initializer_list<size_t> shape, double fill = 0.0)
      : DenseTensor(std::vector<size_t>(shape), fill) {}

  const std::vector<size_t>& shape() const { return shape_; }
  size_t rank() const { return shape_.size(); }
  size_t dim(size_t i) const { return shape_.at(i); }
  size_t size() const { return data_.size(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  double& operator[](size_t i) { return data_[i]; }
  double operator[](size_t i) const { return data_[i]; }

  double& at(size_t i0) { return data_[i0]; }
  double& at(size_t i0, size_t i1) { return data_[i0 * shape_[1] + i1]; }
  double& at(size_t i0, size_t i1, size_t i2) {
    return data_[(i0 * shape_[1] + i1) * shape_[2] + i2];
  }
  double& at(size_t i0, size_t i1, size_t i2, size_t i3) {
    return data_[((i0 * shape_[1] + i1) * shape_[2] + i2) * shape_[3] + i3];
  }
  double at(size_t i0) const { return data_[i0]; }
  double at(size_t i0, size_t i1) const { return data_[i0 * shape_[1] + i1]; }
  double at(size_t i0, size_t i1, size_t i2) const {
    return data_[(i0 * shape_[1] + i1) * shape_[2] + i2];
  }
  double at(size_t i0, size_t i1, size_t i2, size_t i3) const {
    return data_[((i0 * shape_[1] + i1) * shape_[2] + i2) * shape_[3] + i3];
  }

  void fill(double v);
  double sum() const;

  bool same_shape(const DenseTensor& other) const { return shape_ == other.shape_; }

  /// Throws ShapeError naming expected vs actual dims.
  void require_shape(const std::vector<size_t>& expected, const char* what) const;

  static std::string shape_string(const std::vector<size_t>& shape);

 private:
  std::vector<size_t> shape_;
  std::vector<double> data_;
};

// "TTEN" binary container: magic, version 0x01, rank byte, rank x u32
// little-endian dims, then row-major 32-bit little-endian reals.
void write_tten(std::ostream& out, const DenseTensor& t);
void write_tten_file(const std::string& path, const DenseTensor& t);
DenseTensor read_tten(std::istream& in);
DenseTensor read_tten_file(const std::string& path);

}  // namespace trajtensor
