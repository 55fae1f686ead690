#include "trajtensor/tensor.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <sstream>

namespace trajtensor {

DenseTensor::DenseTensor(std::vector<size_t> shape, double fill) : shape_(std::move(shape)) {
  if (shape_.size() > 5) throw ShapeError("tensor rank > 5: " + shape_string(shape_));
  size_t n = 1;
  for (size_t d : shape_) {
    if (d == 0) throw ShapeError("zero-sized dimension in " + shape_string(shape_));
    n *= d;
  }
  data_.assign(n, fill);
}

void DenseTensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

double DenseTensor::sum() const {
  double s = 0.0;
  for (double v : data_) s += v;
  return s;
}

void DenseTensor::require_shape(const std::vector<size_t>& expected, const char* what) const {
  if (shape_ != expected) {
    throw ShapeError(std::string(what) + ": expected " + shape_string(expected) + ", got " +
                     shape_string(shape_));
  }
}

std::string DenseTensor::shape_string(const std::vector<size_t>& shape) {
  std::ostringstream oss;
  oss << "(";
  for (size_t i = 0; i < shape.size(); ++i) oss << (i ? "," : "") << shape[i];
  oss << ")";
  return oss.str();
}

namespace {

constexpr char kMagic[4] = {'T', 'T', 'E', 'N'};
constexpr uint8_t kVersion = 0x01;

void put_u32(std::ostream& out, uint32_t v) {
  unsigned char b[4] = {(unsigned char)(v & 0xff), (unsigned char)((v >> 8) & 0xff),
                        (unsigned char)((v >> 16) & 0xff), (unsigned char)((v >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  return uint32_t(b[0]) | (uint32_t(b[1]) << 8) | (uint32_t(b[2]) << 16) | (uint32_t(b[3]) << 24);
}

}  // namespace

void write_tten(std::ostream& out, const DenseTensor& t) {
  out.write(kMagic, 4);
  out.put(char(kVersion));
  out.put(char(t.rank()));
  for (size_t d : t.shape()) put_u32(out, uint32_t(d));
  for (size_t i = 0; i < t.size(); ++i) {
    float f = float(t[i]);
    uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32(out, bits);
  }
}

void write_tten_file(const std::string& path, const DenseTensor& t) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path);
  write_tten(out, t);
  if (!out) throw DataError("write failed: " + path);
}

DenseTensor read_tten(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) throw DataError("not a TTEN file");
  int version = in.get();
  if (version != kVersion) throw DataError("unsupported TTEN version " + std::to_string(version));
  int rank = in.get();
  if (rank < 0 || rank > 5) throw DataError("bad TTEN rank");
  std::vector<size_t> shape;
  for (int i = 0; i < rank; ++i) shape.push_back(get_u32(in));
  if (!in) throw DataError("truncated TTEN header");
  DenseTensor t(shape);
  for (size_t i = 0; i < t.size(); ++i) {
    uint32_t bits = get_u32(in);
    if (!in) throw DataError("truncated TTEN payload");
    float f;
    std::memcpy(&f, &bits, 4);
    t[i] = double(f);
  }
  return t;
}

DenseTensor read_tten_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open: " + path);
  return read_tten(in);
}

}  // namespace trajtensor
