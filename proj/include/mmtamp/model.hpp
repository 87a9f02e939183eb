#pragma once

// Problem formulation: robots, objects, mode graphs, precedence-constrained
// tasks and time-stamped trajectories.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "mmtamp/common.hpp"
#include "mmtamp/geometry2d.hpp"

namespace mmtamp {

enum class ModeKind { Free, Carry, HoldG };

/// Qualitative relation between a robot and the objects. `object` is the
/// object index, or -1 for Free.
struct Mode {
  ModeKind kind = ModeKind::Free;
  int object = -1;

  friend bool operator==(const Mode&, const Mode&) = default;
  friend auto operator<=>(const Mode&, const Mode&) = default;
  bool valid() const { return (kind == ModeKind::Free) == (object < 0); }
};

enum class PrimitiveKind { Transit, Transfer, Detach, Attach, GraspG, ReleaseG };

inline constexpr PrimitiveKind kAllPrimitiveKinds[] = {
    PrimitiveKind::Transit, PrimitiveKind::Transfer, PrimitiveKind::Detach,
    PrimitiveKind::Attach,  PrimitiveKind::GraspG,   PrimitiveKind::ReleaseG};

inline std::string_view to_string(PrimitiveKind k) {
  switch (k) {
    case PrimitiveKind::Transit: return "Transit";
    case PrimitiveKind::Transfer: return "Transfer";
    case PrimitiveKind::Detach: return "Detach";
    case PrimitiveKind::Attach: return "Attach";
    case PrimitiveKind::GraspG: return "GraspG";
    case PrimitiveKind::ReleaseG: return "ReleaseG";
  }
  return "?";
}

inline std::optional<PrimitiveKind> primitive_kind_from_string(std::string_view s) {
  for (auto k : kAllPrimitiveKinds)
    if (to_string(k) == s) return k;
  return std::nullopt;
}

inline std::string_view to_string(ModeKind k) {
  switch (k) {
    case ModeKind::Free: return "Free";
    case ModeKind::Carry: return "Carry";
    case ModeKind::HoldG: return "HoldG";
  }
  return "?";
}

inline std::optional<ModeKind> mode_kind_from_string(std::string_view s) {
  for (auto k : {ModeKind::Free, ModeKind::Carry, ModeKind::HoldG})
    if (to_string(k) == s) return k;
  return std::nullopt;
}

inline bool is_mode_changing(PrimitiveKind k) {
  return k != PrimitiveKind::Transit && k != PrimitiveKind::Transfer;
}

/// A motion primitive of a mode graph; `object` is -1 only for Transit.
struct Primitive {
  PrimitiveKind kind = PrimitiveKind::Transit;
  int object = -1;

  friend bool operator==(const Primitive&, const Primitive&) = default;
  friend auto operator<=>(const Primitive&, const Primitive&) = default;
  bool mode_changing() const { return is_mode_changing(kind); }
};

inline Mode start_mode(const Primitive& p) {
  switch (p.kind) {
    case PrimitiveKind::Transit:
    case PrimitiveKind::Detach:
    case PrimitiveKind::GraspG: return {ModeKind::Free, -1};
    case PrimitiveKind::Transfer:
    case PrimitiveKind::Attach: return {ModeKind::Carry, p.object};
    case PrimitiveKind::ReleaseG: return {ModeKind::HoldG, p.object};
  }
  return {};
}

inline Mode end_mode(const Primitive& p) {
  switch (p.kind) {
    case PrimitiveKind::Transit:
    case PrimitiveKind::Attach:
    case PrimitiveKind::ReleaseG: return {ModeKind::Free, -1};
    case PrimitiveKind::Transfer:
    case PrimitiveKind::Detach: return {ModeKind::Carry, p.object};
    case PrimitiveKind::GraspG: return {ModeKind::HoldG, p.object};
  }
  return {};
}

/// The mode-preserving primitive of a mode, if it has one (HoldG has none).
inline std::optional<Primitive> preserving_primitive(const Mode& m) {
  if (m.kind == ModeKind::Free) return Primitive{PrimitiveKind::Transit, -1};
  if (m.kind == ModeKind::Carry) return Primitive{PrimitiveKind::Transfer, m.object};
  return std::nullopt;
}

/// Directed graph of modes (nodes) and primitives (edges) for one robot.
struct ModeGraph {
  std::vector<Mode> modes;
  std::vector<Primitive> primitives;

  bool has(const Primitive& p) const {
    return std::find(primitives.begin(), primitives.end(), p) != primitives.end();
  }
};

/// Builds the per-object mode graph: Free -Detach-> Carry -Attach-> Free,
/// Free -GraspG-> HoldG -ReleaseG-> Free, Transit and Transfer self-loops.
/// Primitive kinds outside `capabilities` are dropped.
inline ModeGraph make_mode_graph(int num_objects, const std::set<PrimitiveKind>& capabilities) {
  ModeGraph g;
  g.modes.push_back({ModeKind::Free, -1});
  auto add = [&](PrimitiveKind k, int o) {
    if (capabilities.count(k)) g.primitives.push_back({k, o});
  };
  add(PrimitiveKind::Transit, -1);
  for (int o = 0; o < num_objects; ++o) {
    g.modes.push_back({ModeKind::Carry, o});
    g.modes.push_back({ModeKind::HoldG, o});
    for (auto k : {PrimitiveKind::Detach, PrimitiveKind::Transfer, PrimitiveKind::Attach,
                   PrimitiveKind::GraspG, PrimitiveKind::ReleaseG})
      add(k, o);
  }
  return g;
}

inline std::set<PrimitiveKind> all_capabilities() {
  return {std::begin(kAllPrimitiveKinds), std::end(kAllPrimitiveKinds)};
}

struct Robot {
  std::string id;
  Config2 start_config;
  Config2 goal_config;
  double radius = 0.05;
  double v_max = 0.5;
  geom::Rect reach;
  std::set<PrimitiveKind> capabilities = all_capabilities();
  ModeGraph mode_graph;

  geom::DiscBody body() const { return {radius, reach}; }
};

struct AssemblyObject {
  std::string id;
  geom::ConvexPolygon footprint;  // object frame
  Pose2 start_pose;
  Pose2 goal_pose;
  /// Candidate robot-center positions in the object frame (theta unused).
  std::vector<Pose2> grasp_offsets;

  geom::Carried carried(std::size_t grasp) const {
    return {footprint, grasp_offsets.at(grasp).position(), start_pose.theta};
  }
};

struct Task {
  std::string id;
  std::vector<Primitive> primitives;
  std::optional<std::vector<int>> eligible_robots;  // robot indices

  bool eligible(int robot) const {
    return !eligible_robots ||
           std::find(eligible_robots->begin(), eligible_robots->end(), robot) !=
               eligible_robots->end();
  }
};

enum class Endpoint { Start, End };

/// (task, primitive index, start|end).
struct TimePoint {
  int task = 0;
  int k = 0;
  Endpoint endpoint = Endpoint::Start;

  friend bool operator==(const TimePoint&, const TimePoint&) = default;
  friend auto operator<=>(const TimePoint&, const TimePoint&) = default;
};

/// time(a) <= time(b).
struct PrecedenceConstraint {
  TimePoint a;
  TimePoint b;

  friend bool operator==(const PrecedenceConstraint&, const PrecedenceConstraint&) = default;
  friend auto operator<=>(const PrecedenceConstraint&, const PrecedenceConstraint&) = default;
};

/// Tunables for roadmap construction and the later stages. Defaults follow
/// the values used in the reference experiments where those are known.
struct PlannerParams {
  int n_samples = 500;
  int k_nearest = 10;
  int connection_k = 20;
  int rrt_max_samples = 3000;
  double rrt_step = 0.05;
  int shortcut_attempts = 100;
  double max_edge_duration = 0.1;
  double collision_resolution = 0.005;
  /// Length of the straight approach/retreat motion of a manipulation.
  double manipulation_distance = 0.05;
  /// Duration of a manipulation edge per primitive kind (seconds).
  std::map<PrimitiveKind, double> manipulation_duration = {{PrimitiveKind::Detach, 0.5},
                                                           {PrimitiveKind::Attach, 0.5},
                                                           {PrimitiveKind::GraspG, 0.5},
                                                           {PrimitiveKind::ReleaseG, 0.5}};

  friend bool operator==(const PlannerParams&, const PlannerParams&) = default;
};

struct Scenario {
  std::vector<Robot> robots;
  std::vector<AssemblyObject> objects;
  geom::Workspace2D workspace;
  std::vector<Task> tasks;
  std::vector<PrecedenceConstraint> precedence;
  std::uint64_t seed = 0;
  PlannerParams params;

  int robot_index(std::string_view id) const {
    for (std::size_t i = 0; i < robots.size(); ++i)
      if (robots[i].id == id) return static_cast<int>(i);
    return -1;
  }
  int object_index(std::string_view id) const {
    for (std::size_t i = 0; i < objects.size(); ++i)
      if (objects[i].id == id) return static_cast<int>(i);
    return -1;
  }
  int task_index(std::string_view id) const {
    for (std::size_t i = 0; i < tasks.size(); ++i)
      if (tasks[i].id == id) return static_cast<int>(i);
    return -1;
  }
  const Primitive& primitive(const TimePoint& tp) const {
    return tasks.at(tp.task).primitives.at(tp.k);
  }
};

inline std::string describe(const Scenario& s, const Primitive& p) {
  std::string out(to_string(p.kind));
  if (p.object >= 0) out += "(" + s.objects.at(p.object).id + ")";
  return out;
}

inline std::string describe(const Scenario& s, const TimePoint& tp) {
  return "(" + s.tasks.at(tp.task).id + "#" + std::to_string(tp.k) + " " +
         describe(s, s.primitive(tp)) + (tp.endpoint == Endpoint::Start ? ",start)" : ",end)");
}

namespace detail {

/// Graph over all primitive endpoints of a scenario; node id = 2*flat(k)+end.
struct TimePointGraph {
  std::vector<int> offset;  // per task, first flat primitive index
  int num_nodes = 0;
  std::vector<std::vector<int>> adj;

  explicit TimePointGraph(const Scenario& s) {
    int flat = 0;
    for (const auto& t : s.tasks) {
      offset.push_back(flat);
      flat += static_cast<int>(t.primitives.size());
    }
    num_nodes = 2 * flat;
    adj.assign(num_nodes, {});
    for (std::size_t p = 0; p < s.tasks.size(); ++p)
      for (std::size_t k = 0; k < s.tasks[p].primitives.size(); ++k)
        add({static_cast<int>(p), static_cast<int>(k), Endpoint::Start},
            {static_cast<int>(p), static_cast<int>(k), Endpoint::End});
  }
  int node(const TimePoint& tp) const {
    return 2 * (offset[tp.task] + tp.k) + (tp.endpoint == Endpoint::End ? 1 : 0);
  }
  void add(const TimePoint& a, const TimePoint& b) { adj[node(a)].push_back(node(b)); }

  bool acyclic() const {
    std::vector<int> indeg(num_nodes, 0);
    for (const auto& out : adj)
      for (int v : out) ++indeg[v];
    std::vector<int> stack;
    for (int v = 0; v < num_nodes; ++v)
      if (indeg[v] == 0) stack.push_back(v);
    int seen = 0;
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      ++seen;
      for (int v : adj[u])
        if (--indeg[v] == 0) stack.push_back(v);
    }
    return seen == num_nodes;
  }

  bool reaches(int from, int to) const {
    std::vector<char> seen(num_nodes, 0);
    std::vector<int> stack{from};
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      if (u == to) return true;
      if (seen[u]) continue;
      seen[u] = 1;
      for (int v : adj[u]) stack.push_back(v);
    }
    return false;
  }
};

inline bool resolves(const Scenario& s, const TimePoint& tp) {
  return tp.task >= 0 && tp.task < static_cast<int>(s.tasks.size()) && tp.k >= 0 &&
         tp.k < static_cast<int>(s.tasks[tp.task].primitives.size());
}

}  // namespace detail

/// Explicit constraints plus (tau_k, end) <= (tau_{k+1}, start) for every pair
/// of consecutive primitives in every task. Sorted and deduplicated.
inline std::vector<PrecedenceConstraint> derive_implicit_precedence(const Scenario& s) {
  std::vector<PrecedenceConstraint> out = s.precedence;
  for (std::size_t p = 0; p < s.tasks.size(); ++p)
    for (std::size_t k = 0; k + 1 < s.tasks[p].primitives.size(); ++k)
      out.push_back({{static_cast<int>(p), static_cast<int>(k), Endpoint::End},
                     {static_cast<int>(p), static_cast<int>(k + 1), Endpoint::Start}});
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  detail::TimePointGraph g(s);
  for (const auto& c : out) {
    if (!detail::resolves(s, c.a) || !detail::resolves(s, c.b))
      throw ValidationError("precedence references a missing primitive");
    g.add(c.a, c.b);
  }
  if (!g.acyclic()) throw CycleError("precedence constraints contain a cycle");
  return out;
}

/// True iff time(a) <= time(b) follows from the constraints (reachability).
inline bool precedence_implies(const Scenario& s, const std::vector<PrecedenceConstraint>& cs,
                               const TimePoint& a, const TimePoint& b) {
  detail::TimePointGraph g(s);
  for (const auto& c : cs) g.add(c.a, c.b);
  return g.reaches(g.node(a), g.node(b));
}

/// Checks every scenario invariant; throws ValidationError naming the first
/// violated one.
inline void validate_scenario(const Scenario& s) {
  auto fail = [](const std::string& what) { throw ValidationError(what); };
  if (s.workspace.bounds.empty()) fail("workspace bounds are empty");
  for (const auto& obs : s.workspace.static_obstacles) {
    if (!obs.is_convex_ccw()) fail("static obstacle is not a convex CCW polygon");
    if (!geom::polygon_in_bounds(obs, s.workspace.bounds)) fail("static obstacle outside bounds");
  }
  std::set<std::string> ids;
  for (const auto& r : s.robots)
    if (!ids.insert(r.id).second) fail("duplicate robot id '" + r.id + "'");
  ids.clear();
  for (const auto& o : s.objects)
    if (!ids.insert(o.id).second) fail("duplicate object id '" + o.id + "'");
  ids.clear();
  for (const auto& t : s.tasks)
    if (!ids.insert(t.id).second) fail("duplicate task id '" + t.id + "'");

  for (const auto& r : s.robots) {
    if (!(r.v_max > 0.0)) fail("robot '" + r.id + "': v_max must be positive");
    if (!(r.radius > 0.0)) fail("robot '" + r.id + "': radius must be positive");
    if (!geom::config_free(s.workspace, r.body(), r.start_config))
      fail("robot '" + r.id + "': start configuration is not collision-free");
    if (!geom::config_free(s.workspace, r.body(), r.goal_config))
      fail("robot '" + r.id + "': goal configuration is not collision-free");
  }
  std::set<int> manipulated;
  for (const auto& t : s.tasks) {
    if (t.primitives.empty()) fail("task '" + t.id + "' has no primitives");
    for (const auto& p : t.primitives) {
      if (p.kind == PrimitiveKind::Transit) {
        if (p.object != -1) fail("task '" + t.id + "': Transit takes no object");
      } else if (p.object < 0 || p.object >= static_cast<int>(s.objects.size())) {
        fail("task '" + t.id + "' references an unknown object");
      } else {
        manipulated.insert(p.object);
      }
      const bool supported = std::any_of(s.robots.begin(), s.robots.end(), [&](const Robot& r) {
        return r.mode_graph.has(p);
      });
      if (!supported)
        fail("task '" + t.id + "': primitive " + describe(s, p) + " is in no robot's mode graph");
    }
    for (std::size_t k = 0; k + 1 < t.primitives.size(); ++k)
      if (end_mode(t.primitives[k]) != start_mode(t.primitives[k + 1]))
        fail("task '" + t.id + "': primitives " + std::to_string(k) + " and " +
             std::to_string(k + 1) + " are not connectable");
    if (!t.primitives.front().mode_changing() || !t.primitives.back().mode_changing())
      fail("task '" + t.id + "' must begin and end with a mode-changing primitive");
    for (std::size_t k = 0; k + 1 < t.primitives.size(); ++k)
      if (!t.primitives[k].mode_changing() && !t.primitives[k + 1].mode_changing())
        fail("task '" + t.id + "' has two consecutive mode-preserving primitives");
    if (t.eligible_robots)
      for (int r : *t.eligible_robots)
        if (r < 0 || r >= static_cast<int>(s.robots.size()))
          fail("task '" + t.id + "' lists an unknown eligible robot");
  }
  for (std::size_t i = 0; i < s.objects.size(); ++i) {
    const auto& o = s.objects[i];
    if (!o.footprint.is_convex_ccw()) fail("object '" + o.id + "': footprint not convex CCW");
    if (std::abs(o.start_pose.theta - o.goal_pose.theta) > 1e-9)
      fail("object '" + o.id + "': start and goal headings must match (translation-only carry)");
    if (manipulated.count(static_cast<int>(i)) && o.grasp_offsets.empty())
      fail("object '" + o.id + "': no grasp offsets for a manipulated object");
  }
  for (const auto& c : s.precedence)
    if (!detail::resolves(s, c.a) || !detail::resolves(s, c.b))
      fail("precedence references a missing primitive");
  derive_implicit_precedence(s);
}

/// Object held along a trajectory segment.
struct CarriedRef {
  int object = -1;
  Pose2 grasp;

  friend bool operator==(const CarriedRef&, const CarriedRef&) = default;
};

struct Waypoint {
  double t = 0.0;
  Config2 c;

  friend bool operator==(const Waypoint&, const Waypoint&) = default;
};

/// Continuous-time path [(t0,c0),...,(tK,cK)]; carried[k] describes segment
/// (k, k+1).
struct TimeStampedPath {
  std::vector<Waypoint> waypoints;
  std::vector<std::optional<CarriedRef>> carried;

  friend bool operator==(const TimeStampedPath&, const TimeStampedPath&) = default;

  bool empty() const { return waypoints.empty(); }
  double start_time() const { return waypoints.front().t; }
  double end_time() const { return waypoints.back().t; }

  /// Position at time t (clamped to the path's time span).
  Config2 at(double t) const {
    if (t <= waypoints.front().t) return waypoints.front().c;
    if (t >= waypoints.back().t) return waypoints.back().c;
    auto it = std::upper_bound(waypoints.begin(), waypoints.end(), t,
                               [](double v, const Waypoint& w) { return v < w.t; });
    const auto& b = *it;
    const auto& a = *(it - 1);
    if (b.t <= a.t) return b.c;
    const double s = (t - a.t) / (b.t - a.t);
    return a.c + (b.c - a.c) * s;
  }

  /// Index of the first velocity-violating segment, if any.
  std::optional<std::size_t> velocity_violation(double v_max) const {
    for (std::size_t k = 1; k < waypoints.size(); ++k) {
      const double dt = waypoints[k].t - waypoints[k - 1].t;
      const double d = distance(waypoints[k].c, waypoints[k - 1].c);
      if (dt < 0.0) return k - 1;
      if (dt == 0.0) {
        if (d > 1e-12) return k - 1;
        continue;
      }
      if (d / dt > v_max + 1e-9) return k - 1;
    }
    return std::nullopt;
  }
};

}  // namespace mmtamp
