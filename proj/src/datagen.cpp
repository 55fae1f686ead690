#include "trajtensor/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <queue>
#include <sstream>

#include "trajtensor/errors.hpp"

namespace trajtensor::datagen {

ViewAxis view_axis_from_name(const std::string& name) {
  if (name == "+x") return ViewAxis::pos_x;
  if (name == "-x") return ViewAxis::neg_x;
  if (name == "+y") return ViewAxis::pos_y;
  if (name == "-y") return ViewAxis::neg_y;
  throw ConfigError("unknown view axis: " + name);
}

const char* view_axis_name(ViewAxis a) {
  switch (a) {
    case ViewAxis::pos_x: return "+x";
    case ViewAxis::neg_x: return "-x";
    case ViewAxis::pos_y: return "+y";
    case ViewAxis::neg_y: return "-y";
  }
  return "?";
}

void CameraModel::validate() const {
  if (fov_x1 <= fov_x0 || fov_y1 <= fov_y0)
    throw ConfigError("camera FOV rectangle must have positive area");
  if (near_height <= far_height)
    throw ConfigError("camera near height must exceed far height");
  if (near_height <= 0.0 || near_height > 0.9 || far_height <= 0.0)
    throw ConfigError("camera box heights must lie in (0, 0.9]");
}

void ScenarioConfig::validate() const {
  if (cameras.empty()) throw ConfigError("scenario needs at least one camera");
  for (const auto& c : cameras) c.validate();
  if (agents == 0) throw ConfigError("scenario needs at least one agent");
  if (days < 1) throw ConfigError("scenario needs at least one day");
  if (day_steps < observed + horizon)
    throw ConfigError("day_steps must cover at least one observation + horizon window");
  if (speed_min <= 0.0 || speed_max < speed_min) throw ConfigError("bad speed range");
  if (sample_hz != 5.0 || observed != 10 || horizon != 60)
    throw ConfigError("sampling is fixed at 5 Hz with n=10 observed and m=60 future steps");
  if (jitter < 0.0) throw ConfigError("jitter must be non-negative");
  if (nodes.size() < 2 || edges.empty()) throw ConfigError("corridor graph needs nodes and edges");
  // connectivity
  std::vector<std::vector<int>> adj(nodes.size());
  for (auto [a, b] : edges) {
    if (a < 0 || b < 0 || size_t(a) >= nodes.size() || size_t(b) >= nodes.size() || a == b)
      throw ConfigError("corridor edge references a bad node");
    adj[size_t(a)].push_back(b);
    adj[size_t(b)].push_back(a);
  }
  std::vector<bool> seen(nodes.size(), false);
  std::queue<int> q;
  q.push(0);
  seen[0] = true;
  size_t reached = 1;
  while (!q.empty()) {
    int u = q.front();
    q.pop();
    for (int v : adj[size_t(u)])
      if (!seen[size_t(v)]) {
        seen[size_t(v)] = true;
        ++reached;
        q.push(v);
      }
  }
  if (reached != nodes.size()) throw ConfigError("corridor graph is disconnected");
}

ScenarioConfig default_scenario() {
  ScenarioConfig cfg;
  cfg.nodes = {{0, 0}, {0, 12}, {0, 24}, {16, 0}, {16, 12}, {16, 24}, {8, 12}};
  cfg.edges = {{0, 1}, {1, 2}, {3, 4}, {4, 5}, {1, 6}, {6, 4}};
  auto cam = [](int id, double px, double py, double x0, double y0, double x1, double y1,
                ViewAxis axis) {
    CameraModel c;
    c.id = id;
    c.pos_x = px;
    c.pos_y = py;
    c.fov_x0 = x0;
    c.fov_y0 = y0;
    c.fov_x1 = x1;
    c.fov_y1 = y1;
    c.axis = axis;
    return c;
  };
  // FOVs reach past the junctions so a turn is visible before the agent
  // leaves the view, and neighboring FOVs overlap around them.
  cfg.cameras = {
      cam(0, 0, -1, -2, -1, 2, 13, ViewAxis::pos_y),    // left corridor, upper half
      cam(1, 0, 25, -2, 11, 2, 25, ViewAxis::neg_y),    // left corridor, lower half
      cam(2, -1, 12, -1, 10.5, 17, 13.5, ViewAxis::pos_x),  // bridge
      cam(3, 16, -1, 14, -1, 18, 13, ViewAxis::pos_y),  // right corridor, upper half
      cam(4, 16, 25, 14, 11, 18, 25, ViewAxis::neg_y),  // right corridor, lower half
  };
  return cfg;
}

namespace {

std::vector<double> parse_number_list(const std::string& text, char sep) {
  std::vector<double> out;
  std::string item;
  std::stringstream ss(text);
  while (std::getline(ss, item, sep)) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ConfigError("bad number in list: '" + item + "'");
    }
  }
  return out;
}

}  // namespace

ScenarioConfig scenario_from_config(const Config& cfg) {
  ScenarioConfig sc = default_scenario();
  sc.agents = size_t(cfg.get_int("scenario", "agents", int64_t(sc.agents)));
  sc.days = int(cfg.get_int("scenario", "days", sc.days));
  sc.day_steps = size_t(cfg.get_int("scenario", "day_steps", int64_t(sc.day_steps)));
  sc.speed_min = cfg.get_double("scenario", "speed_min", sc.speed_min);
  sc.speed_max = cfg.get_double("scenario", "speed_max", sc.speed_max);
  sc.jitter = cfg.get_double("scenario", "jitter", sc.jitter);
  sc.seed = uint64_t(cfg.get_int("scenario", "seed", int64_t(sc.seed)));

  if (cfg.has("graph", "nodes")) {
    sc.nodes.clear();
    sc.edges.clear();
    std::string nodes_text = cfg.require_string("graph", "nodes");
    std::stringstream ns(nodes_text);
    std::string item;
    while (std::getline(ns, item, ';')) {
      auto xy = parse_number_list(item, ',');
      if (xy.size() != 2) throw ConfigError("graph node needs 'x,y': " + item);
      sc.nodes.emplace_back(xy[0], xy[1]);
    }
    std::string edges_text = cfg.require_string("graph", "edges");
    std::stringstream es(edges_text);
    while (std::getline(es, item, ';')) {
      auto dash = item.find('-');
      if (dash == std::string::npos) throw ConfigError("graph edge needs 'a-b': " + item);
      sc.edges.emplace_back(std::stoi(item.substr(0, dash)), std::stoi(item.substr(dash + 1)));
    }
  }

  bool any_camera = false;
  for (int i = 0; cfg.has("camera." + std::to_string(i), "fov"); ++i) any_camera = true;
  if (any_camera) {
    sc.cameras.clear();
    for (int i = 0;; ++i) {
      std::string section = "camera." + std::to_string(i);
      if (!cfg.has(section, "fov")) break;
      CameraModel cam;
      cam.id = i;
      auto fov = parse_number_list(cfg.require_string(section, "fov"), ',');
      if (fov.size() != 4) throw ConfigError(section + ".fov needs 'x0,y0,x1,y1'");
      cam.fov_x0 = fov[0];
      cam.fov_y0 = fov[1];
      cam.fov_x1 = fov[2];
      cam.fov_y1 = fov[3];
      auto pos = parse_number_list(cfg.get_string(section, "pos", "0,0"), ',');
      if (pos.size() != 2) throw ConfigError(section + ".pos needs 'x,y'");
      cam.pos_x = pos[0];
      cam.pos_y = pos[1];
      cam.axis = view_axis_from_name(cfg.get_string(section, "axis", "+y"));
      cam.near_height = cfg.get_double(section, "near_height", cam.near_height);
      cam.far_height = cfg.get_double(section, "far_height", cam.far_height);
      sc.cameras.push_back(cam);
    }
  }
  return sc;
}

Config scenario_to_config(const ScenarioConfig& sc) {
  Config cfg;
  cfg.set_int("scenario", "agents", int64_t(sc.agents));
  cfg.set_int("scenario", "days", sc.days);
  cfg.set_int("scenario", "day_steps", int64_t(sc.day_steps));
  cfg.set_double("scenario", "speed_min", sc.speed_min);
  cfg.set_double("scenario", "speed_max", sc.speed_max);
  cfg.set_double("scenario", "jitter", sc.jitter);
  cfg.set_int("scenario", "seed", int64_t(sc.seed));
  cfg.set_int("scenario", "cameras", int64_t(sc.cameras.size()));
  cfg.set_int("scenario", "graph_nodes", int64_t(sc.nodes.size()));
  return cfg;
}

std::optional<BoundingBox> project(double x, double y, const CameraModel& cam, double jitter,
                                   Rng* rng) {
  if (x < cam.fov_x0 || x > cam.fov_x1 || y < cam.fov_y0 || y > cam.fov_y1) return std::nullopt;
  double dx = cam.fov_x1 - cam.fov_x0, dy = cam.fov_y1 - cam.fov_y0;
  double depth = 0.0, lateral = 0.0;
  switch (cam.axis) {
    case ViewAxis::pos_y:
      depth = (y - cam.fov_y0) / dy;
      lateral = (x - cam.fov_x0) / dx;
      break;
    case ViewAxis::neg_y:
      depth = (cam.fov_y1 - y) / dy;
      lateral = (cam.fov_x1 - x) / dx;
      break;
    case ViewAxis::pos_x:
      depth = (x - cam.fov_x0) / dx;
      lateral = (cam.fov_y1 - y) / dy;
      break;
    case ViewAxis::neg_x:
      depth = (cam.fov_x1 - x) / dx;
      lateral = (y - cam.fov_y0) / dy;
      break;
  }
  double cx = lateral;
  double cy = 1.0 - depth;
  double h = cam.near_height + depth * (cam.far_height - cam.near_height);
  double w = 0.4 * h;
  if (jitter > 0.0 && rng) {
    cx += rng->uniform(-jitter, jitter);
    cy += rng->uniform(-jitter, jitter);
  }
  BoundingBox box{cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2};
  // Shift into the frame, preserving size.
  if (box.x1 < 0.0) { box.x2 -= box.x1; box.x1 = 0.0; }
  if (box.x2 > 1.0) { box.x1 -= box.x2 - 1.0; box.x2 = 1.0; }
  if (box.y1 < 0.0) { box.y2 -= box.y1; box.y1 = 0.0; }
  if (box.y2 > 1.0) { box.y1 -= box.y2 - 1.0; box.y2 = 1.0; }
  box.x1 = std::max(0.0, box.x1);
  box.y1 = std::max(0.0, box.y1);
  return box;
}

namespace {

struct Agent {
  double x = 0.0, y = 0.0;
  int goal = 0;
  std::vector<int> path;  // node sequence toward goal, path.front() is next
  double speed = 1.0;     // m/s
};

std::vector<int> shortest_path(const std::vector<std::vector<int>>& adj, int from, int to) {
  std::vector<int> prev(adj.size(), -1);
  std::queue<int> q;
  q.push(from);
  prev[size_t(from)] = from;
  while (!q.empty()) {
    int u = q.front();
    q.pop();
    if (u == to) break;
    for (int v : adj[size_t(u)])
      if (prev[size_t(v)] < 0) {
        prev[size_t(v)] = u;
        q.push(v);
      }
  }
  std::vector<int> path;
  for (int v = to; v != from; v = prev[size_t(v)]) path.push_back(v);
  std::reverse(path.begin(), path.end());
  return path;
}

}  // namespace

Dataset generate(const ScenarioConfig& config, uint64_t seed) {
  config.validate();
  size_t k = config.cameras.size();
  size_t n = config.observed, m = config.horizon;

  Dataset ds;
  ds.meta.cameras = k;
  ds.meta.observed = n;
  ds.meta.horizon = m;
  ds.meta.days = config.days;

  ds.distances.cameras = k;
  ds.distances.values.assign(k * k, 0.0);
  for (size_t i = 0; i < k; ++i)
    for (size_t j = 0; j < k; ++j) {
      double ddx = config.cameras[i].pos_x - config.cameras[j].pos_x;
      double ddy = config.cameras[i].pos_y - config.cameras[j].pos_y;
      ds.distances.at(i, j) = std::sqrt(ddx * ddx + ddy * ddy);
    }

  std::vector<std::vector<int>> adj(config.nodes.size());
  for (auto [a, b] : config.edges) {
    adj[size_t(a)].push_back(b);
    adj[size_t(b)].push_back(a);
  }

  double step_len_hz = 1.0 / config.sample_hz;
  int64_t next_id = 0;

  for (int day = 0; day < config.days; ++day) {
    Rng rng = Rng::derive(seed, uint64_t(day));

    std::vector<Agent> agents(config.agents);
    for (auto& a : agents) {
      int node = int(rng.below(config.nodes.size()));
      a.x = config.nodes[size_t(node)].first;
      a.y = config.nodes[size_t(node)].second;
      a.goal = node;
      a.speed = rng.uniform(config.speed_min, config.speed_max);
      while (a.goal == node) a.goal = int(rng.below(config.nodes.size()));
      a.path = shortest_path(adj, node, a.goal);
    }

    // visibility[agent][camera][step]
    std::vector<std::vector<CoordinateTrack>> vis(
        config.agents, std::vector<CoordinateTrack>(k, CoordinateTrack(config.day_steps)));

    for (size_t step = 0; step < config.day_steps; ++step) {
      for (size_t ai = 0; ai < config.agents; ++ai) {
        Agent& a = agents[ai];
        double budget = a.speed * step_len_hz;
        while (budget > 0.0 && !a.path.empty()) {
          auto [tx, ty] = config.nodes[size_t(a.path.front())];
          double dist = std::hypot(tx - a.x, ty - a.y);
          if (dist <= budget) {
            a.x = tx;
            a.y = ty;
            budget -= dist;
            a.path.erase(a.path.begin());
            if (a.path.empty()) {
              int node = a.goal;
              a.speed = rng.uniform(config.speed_min, config.speed_max);
              while (a.goal == node) a.goal = int(rng.below(config.nodes.size()));
              a.path = shortest_path(adj, node, a.goal);
            }
          } else {
            a.x += (tx - a.x) / dist * budget;
            a.y += (ty - a.y) / dist * budget;
            budget = 0.0;
          }
        }
        for (size_t c = 0; c < k; ++c)
          vis[ai][c][step] = project(a.x, a.y, config.cameras[c], config.jitter, &rng);
      }
    }

    // One sample per departure: the last visible step in a camera before at
    // least one step of absence there, kept when the agent stays or
    // re-appears somewhere within the horizon.
    for (size_t ai = 0; ai < config.agents; ++ai) {
      for (size_t c = 0; c < k; ++c) {
        for (size_t step = 0; step + 1 < config.day_steps; ++step) {
          if (!vis[ai][c][step] || vis[ai][c][step + 1]) continue;
          MctfSample s;
          s.day = day;
          s.departure_camera = int(c);
          s.depart_step = int64_t(step);
          s.input_tracks.assign(k, CoordinateTrack(n));
          s.future_tracks.assign(k, CoordinateTrack(m));
          for (size_t cam = 0; cam < k; ++cam) {
            for (size_t i = 0; i < n; ++i) {
              int64_t src = int64_t(step) - int64_t(n - 1) + int64_t(i);
              if (src >= 0) s.input_tracks[cam][i] = vis[ai][cam][size_t(src)];
            }
            for (size_t i = 0; i < m; ++i) {
              size_t src = step + 1 + i;
              if (src < config.day_steps) s.future_tracks[cam][i] = vis[ai][cam][src];
            }
          }
          bool any_future = false;
          for (size_t cam = 0; cam < k && !any_future; ++cam)
            for (size_t i = 0; i < m && !any_future; ++i) any_future = bool(s.future_tracks[cam][i]);
          if (!any_future) continue;
          s.id = next_id++;
          label_sample(s, k, m);
          ds.samples.push_back(std::move(s));
        }
      }
    }
  }
  return ds;
}

std::vector<MultiTargetGroup> group_multi_target(const Dataset& ds, int64_t bin_steps) {
  if (bin_steps <= 0) throw InvalidInputError("bin size must be positive");
  std::map<std::pair<int, int64_t>, std::vector<size_t>> bins;
  for (size_t i = 0; i < ds.samples.size(); ++i) {
    const auto& s = ds.samples[i];
    bins[{s.day, s.depart_step / bin_steps}].push_back(i);
  }
  std::vector<MultiTargetGroup> groups;
  for (auto& [key, indices] : bins) {
    if (indices.size() < 2) continue;  // single-target bins are discarded
    MultiTargetGroup g;
    g.day = key.first;
    g.bin = key.second;
    g.sample_indices = std::move(indices);
    groups.push_back(std::move(g));
  }
  return groups;
}

}  // namespace trajtensor::datagen
