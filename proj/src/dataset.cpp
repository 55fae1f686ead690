#include "trajtensor/dataset.hpp"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "trajtensor/errors.hpp"

namespace trajtensor::datagen {

namespace fs = std::filesystem;

DenseTensor MctfSample::where_target(size_t target_w, size_t target_h) const {
  size_t k = future_tracks.size();
  size_t m = future_tracks.empty() ? 0 : future_tracks[0].size();
  return build_trajectory_tensor(future_tracks, k, m, target_w, target_h, 0.0).tensor();
}

void label_sample(MctfSample& sample, size_t cameras, size_t horizon) {
  if (sample.future_tracks.size() != cameras)
    throw InvalidInputError("sample future tracks do not cover all cameras");
  sample.which.assign(cameras, 0.0);
  sample.when = DenseTensor({cameras, horizon});
  bool any = false;
  for (size_t c = 0; c < cameras; ++c) {
    if (sample.future_tracks[c].size() != horizon)
      throw InvalidInputError("future track length does not match horizon");
    for (size_t t = 0; t < horizon; ++t) {
      if (!sample.future_tracks[c][t]) continue;
      sample.when.at(c, t) = 1.0;
      sample.which[c] = 1.0;
      any = true;
    }
  }
  if (!any) throw InvalidInputError("sample has no future box in any camera");
}

namespace {

std::string format_box_list(const std::vector<CoordinateTrack>& tracks) {
  std::string out;
  char buf[160];
  bool first = true;
  for (size_t c = 0; c < tracks.size(); ++c) {
    for (size_t t = 0; t < tracks[c].size(); ++t) {
      const auto& box = tracks[c][t];
      if (!box) continue;
      std::snprintf(buf, sizeof buf, "%s%zu,%zu,%.17g,%.17g,%.17g,%.17g", first ? "" : ";", c, t,
                    box->x1, box->y1, box->x2, box->y2);
      out += buf;
      first = false;
    }
  }
  return out;
}

void parse_box_list(const std::string& text, std::vector<CoordinateTrack>& tracks, size_t cameras,
                    size_t steps, long line) {
  tracks.assign(cameras, CoordinateTrack(steps));
  if (text.empty()) return;
  std::stringstream ss(text);
  std::string entry;
  while (std::getline(ss, entry, ';')) {
    double v[6];
    int fields = std::sscanf(entry.c_str(), "%lf,%lf,%lf,%lf,%lf,%lf", &v[0], &v[1], &v[2], &v[3],
                             &v[4], &v[5]);
    if (fields != 6) throw ParseError("malformed box entry '" + entry + "'", line);
    auto cam = size_t(v[0]);
    auto step = size_t(v[1]);
    if (v[0] < 0 || cam >= cameras) throw ParseError("box camera index out of range", line);
    if (v[1] < 0 || step >= steps) throw ParseError("box timestep out of range", line);
    BoundingBox box{v[2], v[3], v[4], v[5]};
    if (!box.valid()) throw ParseError("invalid box coordinates", line);
    tracks[cam][step] = box;
  }
}

}  // namespace

void save_dataset(const std::string& dir, const Dataset& ds) {
  fs::create_directories(dir);

  {
    std::ofstream meta(fs::path(dir) / "meta");
    if (!meta) throw DataError("cannot write dataset meta in " + dir);
    meta << "schema = " << ds.meta.schema << "\n";
    meta << "cameras = " << ds.meta.cameras << "\n";
    meta << "observed = " << ds.meta.observed << "\n";
    meta << "horizon = " << ds.meta.horizon << "\n";
    meta << "days = " << ds.meta.days << "\n";
    meta << "samples = " << ds.samples.size() << "\n";
    meta << "distances = " << ds.meta.distance_file << "\n";
    for (const auto& [k, v] : ds.meta.config_echo) meta << "config." << k << " = " << v << "\n";
  }
  ds.distances.save((fs::path(dir) / ds.meta.distance_file).string());

  std::ofstream rec(fs::path(dir) / "samples.ndrec");
  if (!rec) throw DataError("cannot write samples.ndrec in " + dir);
  for (const auto& s : ds.samples) {
    rec << s.id << " " << s.day << " " << s.departure_camera << " " << s.depart_step << " |"
        << format_box_list(s.input_tracks) << " |" << format_box_list(s.future_tracks) << "\n";
  }
  if (!rec) throw DataError("write failed: samples.ndrec");
}

Dataset load_dataset(const std::string& dir) {
  Dataset ds;
  size_t declared_samples = 0;

  {
    std::ifstream meta(fs::path(dir) / "meta");
    if (!meta) throw DataError("dataset meta not found in " + dir);
    std::string line;
    long line_no = 0;
    while (std::getline(meta, line)) {
      ++line_no;
      if (line.empty()) continue;
      auto eq = line.find('=');
      if (eq == std::string::npos) throw ParseError("meta line without '='", line_no);
      auto trim = [](std::string s) {
        size_t a = s.find_first_not_of(" \t");
        size_t b = s.find_last_not_of(" \t");
        return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
      };
      std::string key = trim(line.substr(0, eq));
      std::string value = trim(line.substr(eq + 1));
      if (key == "schema") {
        ds.meta.schema = std::stoi(value);
        if (ds.meta.schema != 1)
          throw DataError("unsupported dataset schema version " + value);
      } else if (key == "cameras") {
        ds.meta.cameras = std::stoul(value);
      } else if (key == "observed") {
        ds.meta.observed = std::stoul(value);
      } else if (key == "horizon") {
        ds.meta.horizon = std::stoul(value);
      } else if (key == "days") {
        ds.meta.days = std::stoi(value);
      } else if (key == "samples") {
        declared_samples = std::stoul(value);
      } else if (key == "distances") {
        ds.meta.distance_file = value;
      } else if (key.rfind("config.", 0) == 0) {
        ds.meta.config_echo.emplace_back(key.substr(7), value);
      } else {
        throw ParseError("unknown meta key '" + key + "'", line_no);
      }
    }
    if (ds.meta.cameras == 0) throw DataError("dataset meta missing camera count");
  }

  ds.distances = baselines::CameraDistanceMatrix::load(
      (fs::path(dir) / ds.meta.distance_file).string());
  if (ds.distances.cameras != ds.meta.cameras)
    throw DataError("distance matrix camera count does not match dataset");

  std::ifstream rec(fs::path(dir) / "samples.ndrec");
  if (!rec) throw DataError("samples.ndrec not found in " + dir);
  std::string line;
  long line_no = 0;
  while (std::getline(rec, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto bar1 = line.find('|');
    auto bar2 = line.find('|', bar1 == std::string::npos ? 0 : bar1 + 1);
    if (bar1 == std::string::npos || bar2 == std::string::npos)
      throw ParseError("sample record missing track sections", line_no);

    MctfSample s;
    {
      std::stringstream head(line.substr(0, bar1));
      if (!(head >> s.id >> s.day >> s.departure_camera >> s.depart_step))
        throw ParseError("malformed sample header", line_no);
      if (s.departure_camera < 0 || size_t(s.departure_camera) >= ds.meta.cameras)
        throw ParseError("departure camera out of range", line_no);
    }
    std::string input_part = line.substr(bar1 + 1, bar2 - bar1 - 1);
    while (!input_part.empty() && input_part.back() == ' ') input_part.pop_back();
    std::string future_part = line.substr(bar2 + 1);
    parse_box_list(input_part, s.input_tracks, ds.meta.cameras, ds.meta.observed, line_no);
    parse_box_list(future_part, s.future_tracks, ds.meta.cameras, ds.meta.horizon, line_no);
    label_sample(s, ds.meta.cameras, ds.meta.horizon);

    bool has_input = false;
    for (const auto& b : s.input_tracks[size_t(s.departure_camera)]) has_input |= bool(b);
    if (!has_input) throw ParseError("sample has no input box in its departure camera", line_no);

    ds.samples.push_back(std::move(s));
  }
  if (declared_samples != ds.samples.size())
    throw DataError("dataset truncated: meta declares " + std::to_string(declared_samples) +
                    " samples, found " + std::to_string(ds.samples.size()));
  return ds;
}

}  // namespace trajtensor::datagen
