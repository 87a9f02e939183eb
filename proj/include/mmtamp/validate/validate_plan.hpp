#pragma once

// Plan validation by dense geometric replay.

#include <sstream>

#include "mmtamp/solution.hpp"

namespace mmtamp::validate {

enum class ViolationKind {
  velocity,
  static_collision,
  pairwise_collision,
  precedence,
  chain,
  task_completion,
  object_pose
};

inline std::string_view to_string(ViolationKind k) {
  switch (k) {
    case ViolationKind::velocity: return "velocity";
    case ViolationKind::static_collision: return "static_collision";
    case ViolationKind::pairwise_collision: return "pairwise_collision";
    case ViolationKind::precedence: return "precedence";
    case ViolationKind::chain: return "chain";
    case ViolationKind::task_completion: return "task_completion";
    case ViolationKind::object_pose: return "object_pose";
  }
  return "?";
}

struct Violation {
  ViolationKind kind;
  std::vector<std::string> entities;
  double time = 0.0;
  std::string detail;
};

struct ValidationReport {
  bool ok = true;
  std::vector<Violation> violations;

  std::size_t count(ViolationKind k) const {
    return static_cast<std::size_t>(std::count_if(
        violations.begin(), violations.end(), [k](const Violation& v) { return v.kind == k; }));
  }
};

struct ValidateOptions {
  double tick = 1e-3;
  double penetration = 1e-7;  // tolerated overlap depth
  double time_eps = kTimeEps;
  double pose_eps = 1e-6;
};

inline json report_to_json(const ValidationReport& r) {
  json vs = json::array();
  for (const auto& v : r.violations)
    vs.push_back({{"kind", std::string(to_string(v.kind))},
                  {"entities", v.entities},
                  {"time", v.time},
                  {"detail", v.detail}});
  return {{"ok", r.ok}, {"violations", vs}};
}

namespace detail {

/// One robot's whole trajectory.
struct Track {
  std::vector<Waypoint> w;
  std::vector<std::optional<CarriedRef>> carried;  // per segment

  Config2 at(double t) const {
    if (t <= w.front().t) return w.front().c;
    if (t >= w.back().t) return w.back().c;
    auto it = std::upper_bound(w.begin(), w.end(), t, [](double v, const Waypoint& x) { return v < x.t; });
    const auto& b = *it;
    const auto& a = *(it - 1);
    if (b.t <= a.t) return b.c;
    return a.c + (b.c - a.c) * ((t - a.t) / (b.t - a.t));
  }
};

/// Interval of continuous carrying of one object by one robot.
struct CarryRun {
  int robot = -1;
  double t0 = 0.0, t1 = 0.0;
  CarriedRef ref;
};

inline geom::ConvexPolygon carried_footprint(const Scenario& s, const CarriedRef& c, const Config2& robot) {
  const auto& o = s.objects.at(c.object);
  const geom::Carried car{o.footprint, c.grasp.position(), o.start_pose.theta};
  return car.world_footprint(robot);
}

inline Pose2 carried_pose(const Scenario& s, const CarriedRef& c, const Config2& robot) {
  const auto& o = s.objects.at(c.object);
  const geom::Carried car{o.footprint, c.grasp.position(), o.start_pose.theta};
  return car.object_pose(robot);
}

inline bool disc_hits_polygon(const Config2& c, double r, const geom::ConvexPolygon& p, double pen) {
  return geom::capsule_polygon_overlap({c, c, r}, p, -pen);
}

inline double pose_gap(const Pose2& a, const Pose2& b) {
  return std::max({std::abs(a.x - b.x), std::abs(a.y - b.y), std::abs(a.theta - b.theta)});
}

}  // namespace detail

inline ValidationReport validate_plan(const Scenario& s, const Solution& sol, const ValidateOptions& opt = {}) {
  ValidationReport rep;
  std::set<std::pair<int, std::vector<std::string>>> reported;
  auto report = [&](ViolationKind k, std::vector<std::string> ents, double t, std::string detail) {
    if (!reported.insert({static_cast<int>(k), ents}).second) return;
    rep.violations.push_back({k, std::move(ents), t, std::move(detail)});
  };
  const int N = static_cast<int>(s.robots.size());
  const int O = static_cast<int>(s.objects.size());

  // Chains, velocity and robot tracks.
  std::vector<detail::Track> tracks(N);
  double horizon = 0.0;
  for (int r = 0; r < N; ++r) {
    const auto& rb = s.robots[r];
    const auto seq = sol.of_robot(r);
    auto& tr = tracks[r];
    if (seq.empty()) {
      report(ViolationKind::chain, {rb.id}, 0.0, "robot has no subplans");
      tr.w.push_back({0.0, rb.start_config});
      continue;
    }
    for (std::size_t i = 0; i < seq.size(); ++i) {
      const auto& p = seq[i]->path;
      if (p.waypoints.empty()) continue;
      if (static_cast<int>(i) != seq[i]->index)
        report(ViolationKind::chain, {rb.id}, p.start_time(), "subplan indices are not consecutive");
      if (auto v = p.velocity_violation(rb.v_max))
        report(ViolationKind::velocity, {rb.id, std::to_string(seq[i]->index)}, p.waypoints[*v].t,
               "segment exceeds v_max");
      if (tr.w.empty()) {
        if (std::abs(p.start_time()) > opt.time_eps || distance(p.waypoints.front().c, rb.start_config) > opt.pose_eps)
          report(ViolationKind::chain, {rb.id}, p.start_time(), "first subplan does not start at the start configuration at t=0");
      } else {
        const auto& last = tr.w.back();
        if (std::abs(last.t - p.start_time()) > opt.time_eps || distance(last.c, p.waypoints.front().c) > opt.pose_eps)
          report(ViolationKind::chain, {rb.id, std::to_string(seq[i]->index)}, p.start_time(),
                 "subplan does not continue where the previous one ended");
        tr.carried.push_back(std::nullopt);  // zero-length junction
      }
      tr.w.insert(tr.w.end(), p.waypoints.begin(), p.waypoints.end());
      tr.carried.insert(tr.carried.end(), p.carried.begin(), p.carried.end());
    }
    if (tr.w.empty()) tr.w.push_back({0.0, rb.start_config});
    if (distance(tr.w.back().c, rb.goal_config) > opt.pose_eps)
      report(ViolationKind::chain, {rb.id}, tr.w.back().t, "robot does not end at its goal configuration");
    horizon = std::max(horizon, tr.w.back().t);
  }

  // Task completion and precedence.
  std::map<std::pair<int, int>, std::vector<const SolutionSubplan*>> by_prim;
  for (const auto& g : sol.subplans) {
    if (g.task >= 0) {
      by_prim[{g.task, g.k}].push_back(&g);
    } else if (g.tau.mode_changing()) {
      report(ViolationKind::task_completion, {s.robots.at(g.robot).id, std::to_string(g.index)}, 0.0,
             "mode-changing subplan without a task");
    }
  }
  std::map<TimePoint, double> when;
  for (std::size_t p = 0; p < s.tasks.size(); ++p) {
    const auto& t = s.tasks[p];
    int robot = -1;
    for (std::size_t k = 0; k < t.primitives.size(); ++k) {
      auto it = by_prim.find({static_cast<int>(p), static_cast<int>(k)});
      const std::string what = t.id + "[" + std::to_string(k) + "]";
      if (it == by_prim.end() || it->second.size() != 1) {
        report(ViolationKind::task_completion, {t.id, std::to_string(k)}, 0.0,
               what + (it == by_prim.end() ? " not executed" : " executed more than once"));
        continue;
      }
      const auto* g = it->second.front();
      if (g->tau != t.primitives[k])
        report(ViolationKind::task_completion, {t.id, std::to_string(k)}, 0.0, what + " executes the wrong primitive");
      if (robot >= 0 && g->robot != robot)
        report(ViolationKind::task_completion, {t.id}, 0.0, "task split across robots");
      robot = g->robot;
      if (!t.eligible(g->robot))
        report(ViolationKind::task_completion, {t.id, s.robots[g->robot].id}, 0.0, "robot not eligible for task");
      when[{static_cast<int>(p), static_cast<int>(k), Endpoint::Start}] = g->path.start_time();
      when[{static_cast<int>(p), static_cast<int>(k), Endpoint::End}] = g->path.end_time();
    }
  }
  auto check_order = [&](const TimePoint& a, const TimePoint& b) {
    auto ia = when.find(a), ib = when.find(b);
    if (ia == when.end() || ib == when.end()) return;
    if (ia->second > ib->second + opt.time_eps)
      report(ViolationKind::precedence, {describe(s, a), describe(s, b)}, ib->second,
             "time(a) = " + std::to_string(ia->second) + " > time(b) = " + std::to_string(ib->second));
  };
  for (const auto& c : s.precedence) check_order(c.a, c.b);
  for (std::size_t p = 0; p < s.tasks.size(); ++p)
    for (std::size_t k = 0; k < s.tasks[p].primitives.size(); ++k) {
      const TimePoint a{static_cast<int>(p), static_cast<int>(k), Endpoint::Start};
      const TimePoint b{static_cast<int>(p), static_cast<int>(k), Endpoint::End};
      check_order(a, b);
      if (k + 1 < s.tasks[p].primitives.size())
        check_order(b, {static_cast<int>(p), static_cast<int>(k + 1), Endpoint::Start});
    }

  // Carry runs per object, in time order.
  std::vector<std::vector<detail::CarryRun>> runs(O);
  for (int r = 0; r < N; ++r) {
    const auto& tr = tracks[r];
    for (std::size_t i = 0; i < tr.carried.size(); ++i) {
      const auto& c = tr.carried[i];
      if (!c) continue;
      auto& rs = runs[c->object];
      const double t0 = tr.w[i].t, t1 = tr.w[i + 1].t;
      if (!rs.empty() && rs.back().robot == r && std::abs(rs.back().t1 - t0) <= opt.time_eps &&
          rs.back().ref == *c)
        rs.back().t1 = t1;
      else
        rs.push_back({r, t0, t1, *c});
    }
  }
  for (int o = 0; o < O; ++o) {
    auto& rs = runs[o];
    std::sort(rs.begin(), rs.end(), [](const auto& a, const auto& b) { return a.t0 < b.t0; });
    Pose2 pose = s.objects[o].start_pose;
    for (std::size_t i = 0; i < rs.size(); ++i) {
      const auto& run = rs[i];
      if (i > 0 && run.t0 < rs[i - 1].t1 - opt.time_eps)
        report(ViolationKind::object_pose, {s.objects[o].id}, run.t0, "object carried by two robots at once");
      const Pose2 pick = detail::carried_pose(s, run.ref, tracks[run.robot].at(run.t0));
      if (detail::pose_gap(pick, pose) > opt.pose_eps)
        report(ViolationKind::object_pose, {s.objects[o].id, s.robots[run.robot].id}, run.t0,
               "object picked up away from its current pose");
      pose = detail::carried_pose(s, run.ref, tracks[run.robot].at(run.t1));
    }
    bool attached = false;
    for (const auto& t : s.tasks)
      for (const auto& p : t.primitives) attached = attached || (p.kind == PrimitiveKind::Attach && p.object == o);
    const Pose2 want = attached ? s.objects[o].goal_pose : s.objects[o].start_pose;
    if (detail::pose_gap(pose, want) > opt.pose_eps)
      report(ViolationKind::object_pose, {s.objects[o].id}, horizon, "object does not end at its goal pose");
  }

  // Dense replay.
  auto object_state = [&](int o, double t, int& carrier) {
    carrier = -1;
    Pose2 pose = s.objects[o].start_pose;
    for (const auto& run : runs[o]) {
      if (run.t0 > t) break;
      const Config2 c = tracks[run.robot].at(std::min(t, run.t1));
      pose = detail::carried_pose(s, run.ref, c);
      if (t <= run.t1) carrier = run.robot;
    }
    return pose;
  };
  const auto& ws = s.workspace;
  const double pen = opt.penetration;
  const long ticks = static_cast<long>(std::ceil(horizon / opt.tick - 1e-9));
  std::vector<Config2> pos(N);
  std::vector<geom::ConvexPolygon> fp(O);
  std::vector<geom::Rect> fbox(O);
  std::vector<int> carrier(O);
  for (long i = 0; i <= ticks; ++i) {
    const double t = std::min(horizon, static_cast<double>(i) * opt.tick);
    for (int r = 0; r < N; ++r) pos[r] = tracks[r].at(t);
    for (int o = 0; o < O; ++o) {
      fp[o] = s.objects[o].footprint.transformed(object_state(o, t, carrier[o]));
      fbox[o] = fp[o].bbox();
    }
    for (int r = 0; r < N; ++r) {
      const auto& rb = s.robots[r];
      const auto& c = pos[r];
      const auto& b = ws.bounds;
      if (c.x - rb.radius < b.xmin - pen || c.x + rb.radius > b.xmax + pen || c.y - rb.radius < b.ymin - pen ||
          c.y + rb.radius > b.ymax + pen)
        report(ViolationKind::static_collision, {rb.id, "bounds"}, t, "robot leaves the workspace");
      for (std::size_t k = 0; k < ws.static_obstacles.size(); ++k)
        if (detail::disc_hits_polygon(c, rb.radius, ws.static_obstacles[k], pen))
          report(ViolationKind::static_collision, {rb.id, "obstacle " + std::to_string(k)}, t, "robot hits an obstacle");
      for (int q = r + 1; q < N; ++q)
        if (distance(c, pos[q]) < rb.radius + s.robots[q].radius - pen)
          report(ViolationKind::pairwise_collision, {rb.id, s.robots[q].id}, t, "robots overlap");
      for (int o = 0; o < O; ++o) {
        if (carrier[o] == r) continue;
        const geom::Rect db{c.x - rb.radius, c.y - rb.radius, c.x + rb.radius, c.y + rb.radius};
        if (!db.intersects(fbox[o])) continue;
        if (detail::disc_hits_polygon(c, rb.radius, fp[o], pen))
          report(ViolationKind::pairwise_collision, {rb.id, s.objects[o].id}, t, "robot overlaps an object");
      }
    }
    for (int o = 0; o < O; ++o) {
      if (carrier[o] >= 0)
        for (std::size_t k = 0; k < ws.static_obstacles.size(); ++k)
          if (geom::polygons_overlap(fp[o], ws.static_obstacles[k], -pen))
            report(ViolationKind::static_collision, {s.objects[o].id, "obstacle " + std::to_string(k)}, t,
                   "carried object hits an obstacle");
      for (int q = o + 1; q < O; ++q) {
        if (!fbox[o].intersects(fbox[q])) continue;
        if (geom::polygons_overlap(fp[o], fp[q], -pen))
          report(ViolationKind::pairwise_collision, {s.objects[o].id, s.objects[q].id}, t, "objects overlap");
      }
    }
  }
  rep.ok = rep.violations.empty();
  return rep;
}

inline std::string format_report(const ValidationReport& r) {
  std::ostringstream os;
  os << (r.ok ? "valid" : "INVALID") << " (" << r.violations.size() << " violations)\n";
  for (const auto& v : r.violations) {
    os << "  " << to_string(v.kind) << " t=" << v.time;
    for (const auto& e : v.entities) os << " [" << e << "]";
    os << ": " << v.detail << "\n";
  }
  return os.str();
}

}  // namespace mmtamp::validate
