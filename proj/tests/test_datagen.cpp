#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "test_util.hpp"
#include "trajtensor/datagen.hpp"

using namespace trajtensor;
using namespace trajtensor::datagen;

namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("project maps the FOV center to the frame center") {
  CameraModel cam;
  cam.fov_x0 = 0;
  cam.fov_y0 = 0;
  cam.fov_x1 = 10;
  cam.fov_y1 = 20;
  cam.axis = ViewAxis::pos_y;
  auto box = project(5.0, 10.0, cam, 0.0, nullptr);
  REQUIRE(box.has_value());
  CHECK(box->center_x() == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(box->center_y() == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(box->height() ==
        doctest::Approx(0.5 * (cam.near_height + cam.far_height)).epsilon(1e-12));
  CHECK(box->width() == doctest::Approx(0.4 * box->height()).epsilon(1e-12));

  // outside the FOV: absent
  CHECK(!project(11.0, 10.0, cam, 0.0, nullptr).has_value());
  // near edge: full near height
  auto near = project(5.0, 0.0, cam, 0.0, nullptr);
  REQUIRE(near.has_value());
  CHECK(near->height() == doctest::Approx(cam.near_height).epsilon(1e-12));
  // far edge: far height
  auto far = project(5.0, 20.0, cam, 0.0, nullptr);
  REQUIRE(far.has_value());
  CHECK(far->height() == doctest::Approx(cam.far_height).epsilon(1e-12));
}

TEST_CASE("project is continuous in position with zero jitter") {
  CameraModel cam;
  cam.fov_x0 = 0;
  cam.fov_y0 = 0;
  cam.fov_x1 = 8;
  cam.fov_y1 = 8;
  auto a = project(4.0, 4.0, cam, 0.0, nullptr);
  auto b = project(4.001, 4.0, cam, 0.0, nullptr);
  REQUIRE(a.has_value());
  REQUIRE(b.has_value());
  CHECK(std::fabs(a->center_x() - b->center_x()) < 1e-3);
  CHECK(std::fabs(a->center_y() - b->center_y()) < 1e-6);
}

TEST_CASE("generate is deterministic: same config and seed give identical files") {
  ScenarioConfig sc = testutil::two_camera_corridor();
  Dataset a = generate(sc, 123);
  Dataset b = generate(sc, 123);
  TempDir dir_a("tt_dgen_a"), dir_b("tt_dgen_b");
  save_dataset(dir_a.path.string(), a);
  save_dataset(dir_b.path.string(), b);
  CHECK(slurp(dir_a.path / "samples.ndrec") == slurp(dir_b.path / "samples.ndrec"));
  CHECK(slurp(dir_a.path / "meta") == slurp(dir_b.path / "meta"));
  CHECK(slurp(dir_a.path / "distances.txt") == slurp(dir_b.path / "distances.txt"));

  // different seed, different walks (the default world has speed variety)
  Dataset c = testutil::tiny_default_dataset(1, 3, 150, 123);
  Dataset d = testutil::tiny_default_dataset(1, 3, 150, 124);
  TempDir dir_c("tt_dgen_c"), dir_d("tt_dgen_d");
  save_dataset(dir_c.path.string(), c);
  save_dataset(dir_d.path.string(), d);
  CHECK(slurp(dir_c.path / "samples.ndrec") != slurp(dir_d.path / "samples.ndrec"));
}

TEST_CASE("an agent confined to one camera's FOV yields no samples") {
  ScenarioConfig sc = testutil::two_camera_corridor();
  sc.nodes = {{2.0, 0.0}, {8.0, 0.0}};  // entirely inside camera 0's view
  sc.edges = {{0, 1}};
  Dataset ds = generate(sc, 5);
  CHECK(ds.samples.empty());
}

TEST_CASE("two-camera corridor: one crossing gives one sample pointing at the far camera") {
  ScenarioConfig sc = testutil::two_camera_corridor();
  Dataset ds = generate(sc, 9);
  REQUIRE(ds.samples.size() == 1);
  const MctfSample& s = ds.samples[0];
  int other = s.departure_camera == 0 ? 1 : 0;
  CHECK(s.which[size_t(other)] == 1.0);
  CHECK(s.which[size_t(s.departure_camera)] == 0.0);  // one-hot
  // input has boxes in the departure camera
  bool has_input = false;
  for (const auto& b : s.input_tracks[size_t(s.departure_camera)]) has_input |= bool(b);
  CHECK(has_input);
}

TEST_CASE("labels reduce consistently: where -> when -> which") {
  Dataset ds = testutil::tiny_default_dataset(2, 3, 150, 21);
  REQUIRE(!ds.samples.empty());
  for (const auto& s : ds.samples) {
    DenseTensor where = s.where_target();
    size_t k = ds.meta.cameras, m = ds.meta.horizon;
    for (size_t c = 0; c < k; ++c) {
      bool cam_any = false;
      for (size_t t = 0; t < m; ++t) {
        double cell_any = 0.0;
        for (size_t r = 0; r < 9; ++r)
          for (size_t q = 0; q < 16; ++q) cell_any = std::max(cell_any, where.at(c, t, r, q));
        CHECK(cell_any == s.when.at(c, t));
        cam_any |= s.when.at(c, t) == 1.0;
      }
      CHECK((cam_any ? 1.0 : 0.0) == s.which[c]);
    }
  }
}

TEST_CASE("generated distance matrix is symmetric with zero diagonal") {
  Dataset ds = testutil::tiny_default_dataset(1, 2, 120, 3);
  ds.distances.validate();
  CHECK(ds.distances.cameras == 5);
}

TEST_CASE("every sample carries a day tag within range") {
  Dataset ds = testutil::tiny_default_dataset(3, 3, 150, 7);
  REQUIRE(!ds.samples.empty());
  for (const auto& s : ds.samples) {
    CHECK(s.day >= 0);
    CHECK(s.day < 3);
  }
}

TEST_CASE("multi-target grouping bins departures by 10 steps within a day") {
  Dataset ds;
  ds.meta.cameras = 2;
  ds.meta.days = 1;
  auto mk = [&](int64_t id, int day, int64_t step) {
    MctfSample s;
    s.id = id;
    s.day = day;
    s.depart_step = step;
    return s;
  };
  // steps 3 and 9 share bin 0; 11 lands in bin 1
  ds.samples.push_back(mk(0, 0, 3));
  ds.samples.push_back(mk(1, 0, 9));
  ds.samples.push_back(mk(2, 0, 11));
  auto groups = group_multi_target(ds);
  REQUIRE(groups.size() == 1);
  CHECK(groups[0].bin == 0);
  CHECK(groups[0].sample_indices == std::vector<size_t>{0, 1});

  // same steps on different days never group
  ds.samples.clear();
  ds.samples.push_back(mk(0, 0, 3));
  ds.samples.push_back(mk(1, 1, 4));
  CHECK(group_multi_target(ds).empty());

  // all isolated -> empty
  ds.samples.clear();
  ds.samples.push_back(mk(0, 0, 5));
  ds.samples.push_back(mk(1, 0, 25));
  CHECK(group_multi_target(ds).empty());
}

TEST_CASE("dataset save/load round trip is structurally exact") {
  Dataset ds = testutil::tiny_default_dataset(2, 2, 140, 31);
  REQUIRE(!ds.samples.empty());
  TempDir dir("tt_roundtrip");
  save_dataset(dir.path.string(), ds);
  Dataset back = load_dataset(dir.path.string());

  REQUIRE(back.samples.size() == ds.samples.size());
  CHECK(back.meta.cameras == ds.meta.cameras);
  CHECK(back.distances.values == ds.distances.values);
  for (size_t i = 0; i < ds.samples.size(); ++i) {
    const auto& a = ds.samples[i];
    const auto& b = back.samples[i];
    CHECK(a.id == b.id);
    CHECK(a.day == b.day);
    CHECK(a.departure_camera == b.departure_camera);
    CHECK(a.depart_step == b.depart_step);
    CHECK(a.which == b.which);
    for (size_t c = 0; c < ds.meta.cameras; ++c)
      for (size_t t = 0; t < ds.meta.observed; ++t) {
        REQUIRE(bool(a.input_tracks[c][t]) == bool(b.input_tracks[c][t]));
        if (a.input_tracks[c][t]) {
          CHECK(a.input_tracks[c][t]->x1 == b.input_tracks[c][t]->x1);
          CHECK(a.input_tracks[c][t]->y2 == b.input_tracks[c][t]->y2);
        }
      }
  }
}

TEST_CASE("truncated dataset files fail loudly") {
  Dataset ds = testutil::tiny_default_dataset(2, 2, 140, 33);
  TempDir dir("tt_truncated");
  save_dataset(dir.path.string(), ds);

  // drop the last record line; the meta count no longer matches
  std::string records = slurp(dir.path / "samples.ndrec");
  auto cut = records.find_last_of('\n', records.size() - 2);
  std::ofstream out(dir.path / "samples.ndrec", std::ios::binary);
  out << records.substr(0, cut + 1);
  out.close();
  CHECK_THROWS_AS(load_dataset(dir.path.string()), DataError);
}

TEST_CASE("label_sample rejects samples without any future box") {
  MctfSample s;
  s.future_tracks.assign(2, CoordinateTrack(4));
  CHECK_THROWS_AS(label_sample(s, 2, 4), InvalidInputError);
}

TEST_CASE("unknown dataset schema versions are rejected") {
  Dataset ds = testutil::tiny_default_dataset(1, 2, 120, 51);
  TempDir dir("tt_schema");
  save_dataset(dir.path.string(), ds);
  std::string meta = slurp(dir.path / "meta");
  auto pos = meta.find("schema = 1");
  REQUIRE(pos != std::string::npos);
  meta.replace(pos, 10, "schema = 2");
  std::ofstream(dir.path / "meta", std::ios::binary) << meta;
  CHECK_THROWS_AS(load_dataset(dir.path.string()), DataError);
}

TEST_CASE("an empty dataset round trips") {
  Dataset ds;
  ds.meta.cameras = 3;
  ds.meta.days = 1;
  ds.distances.cameras = 3;
  ds.distances.values.assign(9, 0.0);
  TempDir dir("tt_empty");
  save_dataset(dir.path.string(), ds);
  Dataset back = load_dataset(dir.path.string());
  CHECK(back.samples.empty());
  CHECK(back.meta.cameras == 3);
}

TEST_CASE("scenario config validation") {
  ScenarioConfig sc = default_scenario();
  CHECK_NOTHROW(sc.validate());

  ScenarioConfig no_agents = sc;
  no_agents.agents = 0;
  CHECK_THROWS_AS(no_agents.validate(), ConfigError);

  ScenarioConfig disconnected = sc;
  disconnected.nodes.push_back({100.0, 100.0});  // island node
  CHECK_THROWS_AS(disconnected.validate(), ConfigError);

  ScenarioConfig bad_rate = sc;
  bad_rate.horizon = 30;
  CHECK_THROWS_AS(bad_rate.validate(), ConfigError);
}

TEST_CASE("scenario config file round trip") {
  Config cfg = Config::parse_string(
      "[scenario]\n"
      "agents = 7\n"
      "days = 3\n"
      "day_steps = 200\n"
      "jitter = 0\n"
      "[graph]\n"
      "nodes = 0,0; 10,0\n"
      "edges = 0-1\n"
      "[camera.0]\n"
      "fov = -1,-2,6,2\n"
      "pos = 0,0\n"
      "axis = +x\n"
      "[camera.1]\n"
      "fov = 5,-2,11,2\n"
      "pos = 10,0\n"
      "axis = -x\n");
  ScenarioConfig sc = scenario_from_config(cfg);
  CHECK(sc.agents == 7);
  CHECK(sc.days == 3);
  CHECK(sc.cameras.size() == 2);
  CHECK(sc.nodes.size() == 2);
  CHECK(sc.cameras[1].axis == ViewAxis::neg_x);
  CHECK_NOTHROW(sc.validate());
}
