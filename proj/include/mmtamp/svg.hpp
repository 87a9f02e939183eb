#pragma once

// Static SVG keyframes of a plan.

#include <filesystem>
#include <iomanip>
#include <sstream>

#include "mmtamp/solution.hpp"

namespace mmtamp::svg {

struct RenderOptions {
  double interval = 1.0;  // seconds between keyframes
  double scale = 400.0;   // pixels per workspace unit
};

/// Where things are at one instant.
struct Snapshot {
  double t = 0.0;
  std::vector<Config2> robots;
  std::vector<Pose2> objects;
  std::vector<int> carried_by;  // per object, -1 if resting
};

namespace detail {

struct Segment {
  Waypoint a, b;
  std::optional<CarriedRef> carried;
};

inline Config2 lerp(const Segment& s, double t) {
  if (s.b.t <= s.a.t) return s.b.c;
  const double u = std::clamp((t - s.a.t) / (s.b.t - s.a.t), 0.0, 1.0);
  return s.a.c + (s.b.c - s.a.c) * u;
}

inline Pose2 carried_pose(const Scenario& s, const CarriedRef& c, const Config2& robot) {
  const auto& o = s.objects.at(c.object);
  return geom::Carried{o.footprint, c.grasp.position(), o.start_pose.theta}.object_pose(robot);
}

}  // namespace detail

inline Snapshot snapshot(const Scenario& s, const Solution& sol, double t) {
  Snapshot snap;
  snap.t = t;
  const int N = static_cast<int>(s.robots.size());
  snap.objects.clear();
  for (const auto& o : s.objects) snap.objects.push_back(o.start_pose);
  snap.carried_by.assign(s.objects.size(), -1);
  std::vector<double> settled(s.objects.size(), -kInf);
  for (int r = 0; r < N; ++r) {
    std::vector<detail::Segment> segs;
    for (const auto* g : sol.of_robot(r))
      for (std::size_t i = 0; i + 1 < g->path.waypoints.size(); ++i)
        segs.push_back({g->path.waypoints[i], g->path.waypoints[i + 1], g->path.carried[i]});
    Config2 at = s.robots[r].start_config;
    for (const auto& sg : segs) {
      if (sg.a.t <= t) at = detail::lerp(sg, t);
      if (!sg.carried) continue;
      const int o = sg.carried->object;
      if (sg.a.t <= t && t <= sg.b.t) {
        snap.objects[o] = detail::carried_pose(s, *sg.carried, detail::lerp(sg, t));
        snap.carried_by[o] = r;
        settled[o] = kInf;
      } else if (sg.b.t < t && sg.b.t > settled[o]) {
        snap.objects[o] = detail::carried_pose(s, *sg.carried, sg.b.c);
        settled[o] = sg.b.t;
      }
    }
    snap.robots.push_back(at);
  }
  return snap;
}

inline std::string render_frame(const Scenario& s, const Snapshot& snap, const RenderOptions& opt = {}) {
  const auto& b = s.workspace.bounds;
  const double k = opt.scale;
  auto X = [&](double x) { return (x - b.xmin) * k; };
  auto Y = [&](double y) { return (b.ymax - y) * k; };
  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << (b.xmax - b.xmin) * k << "\" height=\""
     << (b.ymax - b.ymin) * k << "\">\n";
  os << "<rect x=\"0\" y=\"0\" width=\"" << (b.xmax - b.xmin) * k << "\" height=\"" << (b.ymax - b.ymin) * k
     << "\" fill=\"white\" stroke=\"black\"/>\n";
  auto polygon = [&](const geom::ConvexPolygon& p, const char* fill, const char* cls) {
    os << "<polygon class=\"" << cls << "\" points=\"";
    for (std::size_t i = 0; i < p.pts.size(); ++i) os << (i ? " " : "") << X(p.pts[i].x) << "," << Y(p.pts[i].y);
    os << "\" fill=\"" << fill << "\" stroke=\"black\"/>\n";
  };
  for (const auto& obs : s.workspace.static_obstacles) polygon(obs, "gray", "obstacle");
  for (std::size_t o = 0; o < s.objects.size(); ++o) {
    polygon(s.objects[o].footprint.transformed(s.objects[o].goal_pose), "none", "goal");
    polygon(s.objects[o].footprint.transformed(snap.objects[o]), snap.carried_by[o] >= 0 ? "orange" : "tan",
            "object");
    os << "<text x=\"" << X(snap.objects[o].x) << "\" y=\"" << Y(snap.objects[o].y)
       << "\" font-size=\"10\" text-anchor=\"middle\">" << s.objects[o].id << "</text>\n";
  }
  for (std::size_t r = 0; r < snap.robots.size(); ++r) {
    const auto& c = snap.robots[r];
    os << "<circle class=\"robot\" cx=\"" << X(c.x) << "\" cy=\"" << Y(c.y) << "\" r=\"" << s.robots[r].radius * k
       << "\" fill=\"steelblue\" stroke=\"black\"/>\n";
    os << "<text x=\"" << X(c.x) << "\" y=\"" << Y(c.y) - s.robots[r].radius * k - 2
       << "\" font-size=\"10\" text-anchor=\"middle\">" << s.robots[r].id << "</text>\n";
  }
  os << "<text x=\"4\" y=\"12\" font-size=\"11\">t = " << std::setprecision(3) << snap.t << " s</text>\n";
  os << "</svg>\n";
  return os.str();
}

/// Keyframe times 0, interval, 2 interval, ... up to the makespan.
inline std::vector<double> keyframe_times(const Solution& sol, double interval) {
  if (!(interval > 0.0)) throw Error("render interval must be positive");
  const double end = sol.subplans.empty() ? 0.0 : sol.makespan;
  const auto n = static_cast<std::size_t>(std::floor(end / interval + 1e-9)) + 1;
  std::vector<double> ts;
  for (std::size_t i = 0; i < n; ++i) ts.push_back(static_cast<double>(i) * interval);
  return ts;
}

/// Writes frame_000.svg, frame_001.svg, ... into `dir`; returns the paths.
inline std::vector<std::string> render_svg(const Scenario& s, const Solution& sol, const std::string& dir,
                                           const RenderOptions& opt = {}) {
  std::vector<std::string> paths;
  try {
    std::filesystem::create_directories(dir);
  } catch (const std::filesystem::filesystem_error& e) {
    throw IoError(e.what());
  }
  const auto ts = keyframe_times(sol, opt.interval);
  for (std::size_t i = 0; i < ts.size(); ++i) {
    std::ostringstream name;
    name << "frame_" << std::setw(3) << std::setfill('0') << i << ".svg";
    const auto path = (std::filesystem::path(dir) / name.str()).string();
    write_text_file(path, render_frame(s, snapshot(s, sol, ts[i]), opt));
    paths.push_back(path);
  }
  return paths;
}

}  // namespace mmtamp::svg
