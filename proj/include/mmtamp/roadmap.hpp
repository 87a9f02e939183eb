#pragma once

// Per-robot multi-modal roadmaps: manipulation (mode-changing) edges sampled
// from grasp offsets, single-mode roadmaps built from a k-nearest spanner over
// cached Free configurations, RRT-Connect highways between milestones, and
// connection edges between the two.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <queue>
#include <random>
#include <set>
#include <tuple>
#include <vector>

#include "mmtamp/common.hpp"
#include "mmtamp/geometry2d.hpp"
#include "mmtamp/model.hpp"

namespace mmtamp::roadmap {

enum class EdgeKind { mode_changing, spanner, highway, connection, abstraction };

inline std::string_view to_string(EdgeKind k) {
  switch (k) {
    case EdgeKind::mode_changing: return "mode_changing";
    case EdgeKind::spanner: return "spanner";
    case EdgeKind::highway: return "highway";
    case EdgeKind::connection: return "connection";
    case EdgeKind::abstraction: return "abstraction";
  }
  return "?";
}

inline std::optional<EdgeKind> edge_kind_from_string(std::string_view s) {
  for (auto k : {EdgeKind::mode_changing, EdgeKind::spanner, EdgeKind::highway,
                 EdgeKind::connection, EdgeKind::abstraction})
    if (to_string(k) == s) return k;
  return std::nullopt;
}

struct RoadmapVertex {
  int id = -1;
  Config2 config;
  Mode mode;
  int grasp = -1;  // grasp offset index; -1 iff mode is Free
  bool is_milestone = false;

  friend bool operator==(const RoadmapVertex&, const RoadmapVertex&) = default;
};

struct RoadmapEdge {
  int id = -1;
  int s = -1;
  int e = -1;
  double w = 0.0;  // traversal time (seconds)
  Primitive tau;
  int grasp = -1;  // -1 iff tau is Transit
  EdgeKind kind = EdgeKind::spanner;
  int manipulation = -1;  // owning manipulation chain for mode-changing edges

  friend bool operator==(const RoadmapEdge&, const RoadmapEdge&) = default;
};

/// One sampled manipulation trajectory: a chain of mode-changing sub-edges
/// between two milestones. This is the atomic "mode-changing edge" the task
/// assignment reasons about.
struct Manipulation {
  int id = -1;
  Primitive tau;
  int grasp = -1;
  int start_vertex = -1;
  int end_vertex = -1;
  std::vector<int> edges;
  double duration = 0.0;

  friend bool operator==(const Manipulation&, const Manipulation&) = default;
};

/// A smoothed path between two milestones of one mode component, stored as
/// forward and backward sub-edge chains over shared vertices.
struct Highway {
  int from = -1;
  int to = -1;
  std::vector<int> vertices;  // from ... to
  std::vector<int> forward;
  std::vector<int> backward;  // to ... from
  std::vector<int> corners;   // waypoints of the smoothed path (incl. endpoints)
  double duration = 0.0;

  friend bool operator==(const Highway&, const Highway&) = default;
};

/// Mode plus grasp: the key of a connected single-mode roadmap.
struct Component {
  Mode mode;
  int grasp = -1;

  friend bool operator==(const Component&, const Component&) = default;
  friend auto operator<=>(const Component&, const Component&) = default;
};

struct MultiModalRoadmap {
  int robot = -1;
  std::vector<RoadmapVertex> vertices;
  std::vector<RoadmapEdge> edges;
  std::vector<Manipulation> manipulations;
  std::vector<Highway> highways;
  int start_vertex = -1;
  int goal_vertex = -1;
  /// (primitive, object) pairs this robot has no feasible manipulation for.
  std::vector<Primitive> infeasible;

  friend bool operator==(const MultiModalRoadmap&, const MultiModalRoadmap&) = default;

  Component component(int v) const { return {vertices[v].mode, vertices[v].grasp}; }

  std::vector<std::vector<int>> out_edges() const {
    std::vector<std::vector<int>> out(vertices.size());
    for (const auto& e : edges) out[e.s].push_back(e.id);
    return out;
  }
  std::vector<std::vector<int>> in_edges() const {
    std::vector<std::vector<int>> in(vertices.size());
    for (const auto& e : edges) in[e.e].push_back(e.id);
    return in;
  }

  std::size_t spanner_vertex_count() const {
    std::set<int> vs;
    for (const auto& e : edges)
      if (e.kind == EdgeKind::spanner) {
        vs.insert(e.s);
        vs.insert(e.e);
      }
    return vs.size();
  }

  std::uint64_t hash() const {
    std::uint64_t h = hash_mix(0x5eed, static_cast<std::uint64_t>(robot));
    for (const auto& v : vertices) {
      h = hash_double(hash_double(h, v.config.x), v.config.y);
      h = hash_mix(hash_mix(h, static_cast<std::uint64_t>(v.mode.kind)),
                   static_cast<std::uint64_t>(v.mode.object + 1));
      h = hash_mix(hash_mix(h, static_cast<std::uint64_t>(v.grasp + 1)), v.is_milestone);
    }
    for (const auto& e : edges) {
      h = hash_mix(hash_mix(h, static_cast<std::uint64_t>(e.s)), static_cast<std::uint64_t>(e.e));
      h = hash_double(h, e.w);
      h = hash_mix(h, static_cast<std::uint64_t>(e.kind));
    }
    return h;
  }
};

// ---------------------------------------------------------------------------
// Geometry of roadmap elements.

inline std::optional<geom::Carried> vertex_carried(const Scenario& s, const RoadmapVertex& v) {
  if (v.mode.kind != ModeKind::Carry) return std::nullopt;
  return s.objects.at(v.mode.object).carried(v.grasp);
}

/// Object moved along an edge: Detach, Transfer and Attach drag the object
/// with the robot; GraspG/ReleaseG approach an object that stays put.
inline std::optional<geom::Carried> edge_carried(const Scenario& s, const RoadmapEdge& e) {
  switch (e.tau.kind) {
    case PrimitiveKind::Detach:
    case PrimitiveKind::Transfer:
    case PrimitiveKind::Attach: return s.objects.at(e.tau.object).carried(e.grasp);
    default: return std::nullopt;
  }
}

inline int carried_object(const RoadmapEdge& e) {
  switch (e.tau.kind) {
    case PrimitiveKind::Detach:
    case PrimitiveKind::Transfer:
    case PrimitiveKind::Attach: return e.tau.object;
    default: return -1;
  }
}

inline int carried_object(const RoadmapVertex& v) {
  return v.mode.kind == ModeKind::Carry ? v.mode.object : -1;
}

// ---------------------------------------------------------------------------
// Builder internals.

namespace detail {

inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t tag, std::uint64_t a = 0,
                                std::uint64_t b = 0, std::uint64_t c = 0) {
  std::uint64_t h = hash_mix(hash_mix(hash_mix(hash_mix(seed, tag), a), b), c);
  return std::mt19937_64(h);
}

/// Incremental roadmap writer with vertex deduplication for milestones.
class Writer {
 public:
  Writer(const Scenario& s, int robot, MultiModalRoadmap& map)
      : scenario_(s), robot_(s.robots.at(robot)), map_(map) {
    map_.robot = robot;
  }

  int vertex(const Config2& c, const Component& comp, bool milestone) {
    if (milestone) {
      const auto key = std::make_tuple(comp, c.x, c.y);
      if (auto it = milestone_ids_.find(key); it != milestone_ids_.end()) return it->second;
      const int id = add_vertex(c, comp, true);
      milestone_ids_.emplace(key, id);
      return id;
    }
    return add_vertex(c, comp, false);
  }

  int add_vertex(const Config2& c, const Component& comp, bool milestone) {
    const int id = static_cast<int>(map_.vertices.size());
    map_.vertices.push_back({id, c, comp.mode, comp.grasp, milestone});
    return id;
  }

  int edge(int s, int e, double w, const Primitive& tau, int grasp, EdgeKind kind,
           int manipulation = -1) {
    const int id = static_cast<int>(map_.edges.size());
    map_.edges.push_back({id, s, e, w, tau, grasp, kind, manipulation});
    return id;
  }

  double travel_time(const Config2& a, const Config2& b) const {
    return distance(a, b) / robot_.v_max;
  }

  /// Adds a straight motion as a chain of sub-edges no longer than the
  /// maximum edge duration. Intermediate vertices are created in `mid`.
  /// Returns the edge ids in order and appends intermediate vertex ids.
  std::vector<int> chain(int s, int e, double w, const Primitive& tau, int grasp, EdgeKind kind,
                         const Component& mid, std::vector<int>* mids = nullptr,
                         int manipulation = -1) {
    const double max_w = scenario_.params.max_edge_duration;
    const int n = std::max(1, static_cast<int>(std::ceil(w / max_w - 1e-9)));
    std::vector<int> ids;
    int prev = s;
    const Config2 a = map_.vertices[s].config, b = map_.vertices[e].config;
    for (int i = 1; i <= n; ++i) {
      int next = e;
      if (i < n) {
        next = add_vertex(a + (b - a) * (static_cast<double>(i) / n), mid, false);
        if (mids) mids->push_back(next);
      }
      ids.push_back(edge(prev, next, w / n, tau, grasp, kind, manipulation));
      prev = next;
    }
    return ids;
  }

  /// Straight bidirectional motion sharing intermediate vertices.
  void bichain(int s, int e, const Primitive& tau, int grasp, EdgeKind kind, const Component& comp,
               std::vector<int>* fwd = nullptr, std::vector<int>* bwd = nullptr,
               std::vector<int>* mids = nullptr) {
    const Config2 a = map_.vertices[s].config, b = map_.vertices[e].config;
    const double w = travel_time(a, b);
    std::vector<int> local_mids;
    auto f = chain(s, e, w, tau, grasp, kind, comp, &local_mids);
    std::vector<int> rev_nodes{e};
    for (auto it = local_mids.rbegin(); it != local_mids.rend(); ++it) rev_nodes.push_back(*it);
    rev_nodes.push_back(s);
    const double sub = w / static_cast<double>(f.size());
    std::vector<int> b_ids;
    for (std::size_t i = 0; i + 1 < rev_nodes.size(); ++i)
      b_ids.push_back(edge(rev_nodes[i], rev_nodes[i + 1], sub, tau, grasp, kind));
    if (fwd) fwd->insert(fwd->end(), f.begin(), f.end());
    if (bwd) bwd->insert(bwd->begin(), b_ids.begin(), b_ids.end());
    if (mids) mids->insert(mids->end(), local_mids.begin(), local_mids.end());
  }

  const Scenario& scenario() const { return scenario_; }
  const Robot& robot() const { return robot_; }
  MultiModalRoadmap& map() { return map_; }

 private:
  const Scenario& scenario_;
  const Robot& robot_;
  MultiModalRoadmap& map_;
  std::map<std::tuple<Component, double, double>, int> milestone_ids_;
};

inline std::optional<geom::Carried> component_carried(const Scenario& s, const Component& c) {
  if (c.mode.kind != ModeKind::Carry) return std::nullopt;
  return s.objects.at(c.mode.object).carried(c.grasp);
}

inline bool motion_ok(const Scenario& s, const Robot& r, const Config2& a, const Config2& b,
                      const std::optional<geom::Carried>& carried) {
  return geom::motion_free(s.workspace, r.body(), a, b, carried ? &*carried : nullptr);
}

inline bool config_ok(const Scenario& s, const Robot& r, const Config2& c,
                      const std::optional<geom::Carried>& carried) {
  return geom::config_free(s.workspace, r.body(), c, carried ? &*carried : nullptr);
}

/// k nearest of `query` among `pts` (excluding index `self`), ties by index.
inline std::vector<int> k_nearest(const std::vector<Config2>& pts, const Config2& query, int k,
                                  int self = -1) {
  std::vector<std::pair<double, int>> d;
  d.reserve(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i)
    if (static_cast<int>(i) != self) d.emplace_back(distance(pts[i], query), static_cast<int>(i));
  const auto kk = std::min<std::size_t>(static_cast<std::size_t>(std::max(k, 0)), d.size());
  std::partial_sort(d.begin(), d.begin() + static_cast<long>(kk), d.end());
  std::vector<int> out;
  for (std::size_t i = 0; i < kk; ++i) out.push_back(d[i].second);
  return out;
}

}  // namespace detail

/// Free configurations and k-nearest pairs sampled once per robot and shared
/// by every single-mode spanner of that robot.
struct ConfigCache {
  std::vector<Config2> configs;
  std::vector<std::pair<int, int>> knn_pairs;  // i < j
  std::vector<char> free_pair;                 // Free-mode validity per pair
};

inline ConfigCache build_config_cache(const Scenario& s, int robot) {
  const Robot& r = s.robots.at(robot);
  ConfigCache cache;
  auto rng = detail::make_rng(s.seed, 0x50524d, static_cast<std::uint64_t>(robot));
  for (int i = 0; i < s.params.n_samples; ++i) {
    try {
      cache.configs.push_back(geom::sample_free_config(s.workspace, r.body(), nullptr, rng));
    } catch (const SamplingExhausted&) {
      break;
    }
  }
  std::set<std::pair<int, int>> pairs;
  for (std::size_t i = 0; i < cache.configs.size(); ++i)
    for (int j : detail::k_nearest(cache.configs, cache.configs[i], s.params.k_nearest,
                                   static_cast<int>(i)))
      pairs.emplace(std::min<int>(static_cast<int>(i), j), std::max<int>(static_cast<int>(i), j));
  cache.knn_pairs.assign(pairs.begin(), pairs.end());
  for (const auto& [i, j] : cache.knn_pairs)
    cache.free_pair.push_back(
        detail::motion_ok(s, r, cache.configs[i], cache.configs[j], std::nullopt));
  return cache;
}

// ---------------------------------------------------------------------------
// Mode-changing edges.

/// Primitive kinds and objects a robot may have to manipulate: mode-changing
/// primitives that appear in a task the robot is eligible for.
inline std::vector<Primitive> relevant_manipulations(const Scenario& s, int robot) {
  std::set<Primitive> out;
  const Robot& r = s.robots.at(robot);
  for (const auto& t : s.tasks) {
    if (!t.eligible(robot)) continue;
    for (const auto& p : t.primitives)
      if (p.mode_changing() && r.mode_graph.has(p)) out.insert(p);
  }
  return {out.begin(), out.end()};
}

struct ManipulationGeometry {
  Config2 from;
  Config2 to;
  Component from_comp;
  Component to_comp;
  Component mid_comp;
};

/// Straight approach/retreat motion of a manipulation for one grasp.
inline ManipulationGeometry manipulation_geometry(const Scenario& s, const Primitive& p,
                                                  int grasp) {
  const auto& obj = s.objects.at(p.object);
  const Config2 g = obj.grasp_offsets.at(grasp).position();
  const double d = s.params.manipulation_distance;
  auto unit = [](Config2 v) {
    const double n = v.norm();
    return n > 0 ? v * (1.0 / n) : Config2{0.0, 1.0};
  };
  const Component free{{ModeKind::Free, -1}, -1};
  const Component carry{{ModeKind::Carry, p.object}, grasp};
  const Component hold{{ModeKind::HoldG, p.object}, grasp};
  switch (p.kind) {
    case PrimitiveKind::Detach: {
      const Config2 at = obj.start_pose.apply(g);
      const Config2 away = at + unit(obj.start_pose.rotate(g)) * d;
      return {at, away, free, carry, carry};
    }
    case PrimitiveKind::Attach: {
      const Config2 at = obj.goal_pose.apply(g);
      const Config2 away = at + unit(obj.goal_pose.rotate(g)) * d;
      return {away, at, carry, free, carry};
    }
    case PrimitiveKind::GraspG: {
      const Config2 at = obj.goal_pose.apply(g);
      const Config2 away = at + unit(obj.goal_pose.rotate(g)) * d;
      return {away, at, free, hold, hold};
    }
    case PrimitiveKind::ReleaseG: {
      const Config2 at = obj.goal_pose.apply(g);
      const Config2 away = at + unit(obj.goal_pose.rotate(g)) * d;
      return {at, away, hold, free, hold};
    }
    default: break;
  }
  throw Error("manipulation_geometry: not a mode-changing primitive");
}

/// Samples one manipulation chain per (relevant primitive, grasp) whose
/// motion is statically free; records primitives with none as infeasible.
inline void sample_mode_changing_edges(detail::Writer& w) {
  const Scenario& s = w.scenario();
  const Robot& r = w.robot();
  auto& map = w.map();
  for (const auto& p : relevant_manipulations(s, map.robot)) {
    bool any = false;
    const auto& obj = s.objects.at(p.object);
    for (int g = 0; g < static_cast<int>(obj.grasp_offsets.size()); ++g) {
      const auto geo = manipulation_geometry(s, p, g);
      const auto from_c = detail::component_carried(s, geo.from_comp);
      const auto to_c = detail::component_carried(s, geo.to_comp);
      const bool drags = p.kind == PrimitiveKind::Detach || p.kind == PrimitiveKind::Attach;
      const auto moving = drags ? std::optional<geom::Carried>(obj.carried(g)) : std::nullopt;
      if (!detail::config_ok(s, r, geo.from, from_c) || !detail::config_ok(s, r, geo.to, to_c))
        continue;
      if (!detail::motion_ok(s, r, geo.from, geo.to, moving)) continue;
      const double min_w = w.travel_time(geo.from, geo.to);
      const double dur = std::max(s.params.manipulation_duration.at(p.kind), min_w);
      const int a = w.vertex(geo.from, geo.from_comp, true);
      const int b = w.vertex(geo.to, geo.to_comp, true);
      Manipulation m;
      m.id = static_cast<int>(map.manipulations.size());
      m.tau = p;
      m.grasp = g;
      m.start_vertex = a;
      m.end_vertex = b;
      m.duration = dur;
      m.edges = w.chain(a, b, dur, p, g, EdgeKind::mode_changing, geo.mid_comp, nullptr, m.id);
      map.manipulations.push_back(std::move(m));
      any = true;
    }
    if (!any) map.infeasible.push_back(p);
  }
}

// ---------------------------------------------------------------------------
// Highways.

namespace detail {

struct RrtTree {
  std::vector<Config2> nodes;
  std::vector<int> parent;

  int nearest(const Config2& q) const {
    int best = 0;
    double bd = kInf;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const double d = distance(nodes[i], q);
      if (d < bd) {
        bd = d;
        best = static_cast<int>(i);
      }
    }
    return best;
  }
  std::vector<Config2> path_to_root(int i) const {
    std::vector<Config2> p;
    for (; i >= 0; i = parent[i]) p.push_back(nodes[i]);
    return p;
  }
};

}  // namespace detail

/// RRT-Connect between two configurations followed by random shortcutting
/// and a greedy visibility pass. Returns the waypoint list or nullopt.
template <class Rng>
std::optional<std::vector<Config2>> rrt_connect(const Scenario& s, const Robot& r,
                                                const std::optional<geom::Carried>& carried,
                                                const Config2& a, const Config2& b, Rng& rng) {
  const auto& P = s.params;
  auto free_motion = [&](const Config2& x, const Config2& y) {
    return detail::motion_ok(s, r, x, y, carried);
  };
  if (free_motion(a, b)) return std::vector<Config2>{a, b};

  detail::RrtTree ta{{a}, {-1}}, tb{{b}, {-1}};
  const geom::Rect box = s.workspace.bounds.intersection(r.reach);
  std::uniform_real_distribution<double> ux(box.xmin, box.xmax), uy(box.ymin, box.ymax);
  auto extend = [&](detail::RrtTree& t, const Config2& q) -> int {
    const int n = t.nearest(q);
    const Config2 from = t.nodes[n];
    const double d = distance(from, q);
    const Config2 to = d <= P.rrt_step ? q : from + (q - from) * (P.rrt_step / d);
    if (!free_motion(from, to)) return -1;
    t.nodes.push_back(to);
    t.parent.push_back(n);
    return static_cast<int>(t.nodes.size()) - 1;
  };
  auto connect = [&](detail::RrtTree& t, const Config2& q) -> int {
    int last = -1;
    for (;;) {
      const int i = extend(t, q);
      if (i < 0) return -1;
      last = i;
      if (distance(t.nodes[i], q) < 1e-12) return last;
    }
  };

  std::optional<std::vector<Config2>> path;
  bool a_side = true;
  for (int it = 0; it < P.rrt_max_samples && !path; ++it) {
    auto& t1 = a_side ? ta : tb;
    auto& t2 = a_side ? tb : ta;
    const Config2 q{ux(rng), uy(rng)};
    const int i = extend(t1, q);
    if (i >= 0) {
      const int j = connect(t2, t1.nodes[i]);
      if (j >= 0) {
        auto p1 = t1.path_to_root(i);
        auto p2 = t2.path_to_root(j);
        std::reverse(p1.begin(), p1.end());
        p1.insert(p1.end(), p2.begin() + 1, p2.end());
        if (!a_side) std::reverse(p1.begin(), p1.end());
        path = std::move(p1);
      }
    }
    a_side = !a_side;
  }
  if (!path) return std::nullopt;

  auto& pts = *path;
  for (int k = 0; k < P.shortcut_attempts && pts.size() > 2; ++k) {
    std::uniform_int_distribution<std::size_t> ui(0, pts.size() - 1);
    std::size_t i = ui(rng), j = ui(rng);
    if (i > j) std::swap(i, j);
    if (j < i + 2) continue;
    if (free_motion(pts[i], pts[j]))
      pts.erase(pts.begin() + static_cast<long>(i) + 1, pts.begin() + static_cast<long>(j));
  }
  std::vector<Config2> pulled{pts.front()};
  for (std::size_t i = 0; i + 1 < pts.size();) {
    std::size_t j = pts.size() - 1;
    while (j > i + 1 && !free_motion(pts[i], pts[j])) --j;
    pulled.push_back(pts[j]);
    i = j;
  }
  return pulled;
}

inline double path_length(const std::vector<Config2>& pts) {
  double d = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) d += distance(pts[i - 1], pts[i]);
  return d;
}

/// Adds a highway between two vertices of the same component. Returns the
/// highway index or -1 if no path was found.
inline int add_highway(detail::Writer& w, int from, int to, std::uint64_t tag) {
  const Scenario& s = w.scenario();
  auto& map = w.map();
  const Component comp = map.component(from);
  const auto carried = detail::component_carried(s, comp);
  auto rng = detail::make_rng(s.seed, 0x485759, static_cast<std::uint64_t>(map.robot), tag);
  const auto pts = rrt_connect(s, w.robot(), carried, map.vertices[from].config,
                               map.vertices[to].config, rng);
  if (!pts) return -1;
  const auto tau = *preserving_primitive(comp.mode);
  Highway h;
  h.from = from;
  h.to = to;
  h.vertices.push_back(from);
  h.corners.push_back(from);
  std::vector<std::vector<int>> bwd_segments;
  int prev = from;
  for (std::size_t i = 1; i < pts->size(); ++i) {
    const int next = (i + 1 == pts->size()) ? to : w.add_vertex((*pts)[i], comp, false);
    std::vector<int> mids, f, b;
    w.bichain(prev, next, tau, comp.grasp, EdgeKind::highway, comp, &f, &b, &mids);
    h.vertices.insert(h.vertices.end(), mids.begin(), mids.end());
    h.vertices.push_back(next);
    h.corners.push_back(next);
    h.forward.insert(h.forward.end(), f.begin(), f.end());
    bwd_segments.push_back(b);
    prev = next;
  }
  for (auto it = bwd_segments.rbegin(); it != bwd_segments.rend(); ++it)
    h.backward.insert(h.backward.end(), it->begin(), it->end());
  h.duration = path_length(*pts) / w.robot().v_max;
  map.highways.push_back(std::move(h));
  return static_cast<int>(map.highways.size()) - 1;
}

// ---------------------------------------------------------------------------
// Roadmap assembly.

inline void add_start_goal(detail::Writer& w) {
  const Robot& r = w.robot();
  const Component free{{ModeKind::Free, -1}, -1};
  w.map().start_vertex = w.vertex(r.start_config, free, true);
  w.map().goal_vertex = w.vertex(r.goal_config, free, true);
}

/// Milestone pairs that task assignment may need a highway for: within Free,
/// from every place a robot enters Free (start, Attach/ReleaseG ends) to every
/// place it leaves Free (goal, Detach/GraspG starts); within Carry(o, g), from
/// Detach ends to Attach starts of the same grasp.
inline std::vector<std::pair<int, int>> highway_pairs(const MultiModalRoadmap& map) {
  std::set<int> free_in{map.start_vertex}, free_out{map.goal_vertex};
  std::map<Component, std::set<int>> carry_in, carry_out;
  for (const auto& m : map.manipulations) {
    switch (m.tau.kind) {
      case PrimitiveKind::Attach:
      case PrimitiveKind::ReleaseG: free_in.insert(m.end_vertex); break;
      case PrimitiveKind::Detach:
      case PrimitiveKind::GraspG: free_out.insert(m.start_vertex); break;
      default: break;
    }
    if (m.tau.kind == PrimitiveKind::Detach) carry_in[map.component(m.end_vertex)].insert(m.end_vertex);
    if (m.tau.kind == PrimitiveKind::Attach) carry_out[map.component(m.start_vertex)].insert(m.start_vertex);
  }
  std::set<std::pair<int, int>> pairs;  // unordered, stored (min, max)
  for (int a : free_in)
    for (int b : free_out)
      if (a != b) pairs.emplace(std::min(a, b), std::max(a, b));
  for (const auto& [comp, ins] : carry_in)
    for (int a : ins)
      for (int b : carry_out[comp])
        if (a != b) pairs.emplace(std::min(a, b), std::max(a, b));
  return {pairs.begin(), pairs.end()};
}

/// Roadmap used for task assignment: manipulation chains plus highways, no
/// spanner vertices.
inline MultiModalRoadmap build_assignment_roadmap(const Scenario& s, int robot) {
  MultiModalRoadmap map;
  detail::Writer w(s, robot, map);
  add_start_goal(w);
  sample_mode_changing_edges(w);
  for (const auto& [a, b] : highway_pairs(map))
    add_highway(w, a, b, hash_mix(static_cast<std::uint64_t>(a), static_cast<std::uint64_t>(b)));
  return map;
}

/// Adds a k-nearest spanner for one component over the cached Free
/// configurations that remain valid in that component, then links the given
/// anchor vertices (milestones, highway corners) to their nearest spanner
/// vertices with connection edges. Returns the number of spanner vertices.
inline std::size_t add_spanner(detail::Writer& w, const ConfigCache& cache, const Component& comp,
                               const std::vector<int>& anchors) {
  const Scenario& s = w.scenario();
  const Robot& r = w.robot();
  auto& map = w.map();
  const auto carried = detail::component_carried(s, comp);
  const auto tau = *preserving_primitive(comp.mode);
  std::vector<int> vid(cache.configs.size(), -1);
  std::vector<Config2> pts;
  std::vector<int> pts_vid;
  for (std::size_t i = 0; i < cache.configs.size(); ++i) {
    if (carried && !detail::config_ok(s, r, cache.configs[i], carried)) continue;
    vid[i] = w.add_vertex(cache.configs[i], comp, false);
    pts.push_back(cache.configs[i]);
    pts_vid.push_back(vid[i]);
  }
  for (std::size_t k = 0; k < cache.knn_pairs.size(); ++k) {
    const auto [i, j] = cache.knn_pairs[k];
    if (vid[i] < 0 || vid[j] < 0 || !cache.free_pair[k]) continue;
    if (carried && !detail::motion_ok(s, r, cache.configs[i], cache.configs[j], carried)) continue;
    w.bichain(vid[i], vid[j], tau, comp.grasp, EdgeKind::spanner, comp);
  }
  for (int a : anchors) {
    const Config2 c = map.vertices[a].config;
    for (int n : detail::k_nearest(pts, c, s.params.connection_k)) {
      if (!detail::motion_ok(s, r, c, pts[n], carried)) continue;
      w.bichain(a, pts_vid[n], tau, comp.grasp, EdgeKind::connection, comp);
    }
  }
  return pts.size();
}

/// Shortest traversal times from `source` over the given roadmap, restricted
/// to edges whose endpoints both lie in the source's component.
inline std::vector<double> component_dijkstra(const MultiModalRoadmap& map,
                                              const std::vector<std::vector<int>>& out,
                                              int source, std::vector<int>* parent_edge = nullptr) {
  std::vector<double> dist(map.vertices.size(), kInf);
  if (parent_edge) parent_edge->assign(map.vertices.size(), -1);
  const Component comp = map.component(source);
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  dist[source] = 0.0;
  pq.emplace(0.0, source);
  while (!pq.empty()) {
    const auto [d, u] = pq.top();
    pq.pop();
    if (d > dist[u]) continue;
    for (int eid : out[u]) {
      const auto& e = map.edges[eid];
      if (e.kind == EdgeKind::mode_changing) continue;
      if (map.component(e.e) != comp) continue;
      const double nd = d + e.w;
      if (nd < dist[e.e]) {
        dist[e.e] = nd;
        if (parent_edge) (*parent_edge)[e.e] = eid;
        pq.emplace(nd, e.e);
      }
    }
  }
  return dist;
}

/// A long move the path finder must realize on the full roadmap: vertices
/// are ids in the assignment roadmap.
struct LongMove {
  int from = -1;
  int to = -1;
};

/// Result of building a full roadmap: the roadmap and the id map from the
/// assignment roadmap's vertices (and manipulations) into it.
struct FullRoadmap {
  MultiModalRoadmap map;
  std::map<int, int> vertex_from_assignment;
  std::map<int, int> manipulation_from_assignment;
};

/// Roadmap for path finding: Free spanner, spanners for the Carry components
/// the robot's moves pass through, the manipulation chains it uses, the
/// highway routes that realize its long moves, and connection edges.
inline FullRoadmap build_full_roadmap(const Scenario& s, int robot, const MultiModalRoadmap& amap,
                                      const ConfigCache& cache,
                                      const std::vector<int>& used_manipulations,
                                      const std::vector<LongMove>& moves) {
  FullRoadmap full;
  auto& map = full.map;
  detail::Writer w(s, robot, map);
  auto& vmap = full.vertex_from_assignment;
  auto copy_vertex = [&](int av) {
    if (auto it = vmap.find(av); it != vmap.end()) return it->second;
    const auto& v = amap.vertices.at(av);
    const int id = v.is_milestone ? w.vertex(v.config, {v.mode, v.grasp}, true)
                                  : w.add_vertex(v.config, {v.mode, v.grasp}, false);
    vmap.emplace(av, id);
    return id;
  };
  auto copy_edge = [&](int ae, int manipulation = -1) {
    const auto& e = amap.edges.at(ae);
    return w.edge(copy_vertex(e.s), copy_vertex(e.e), e.w, e.tau, e.grasp, e.kind, manipulation);
  };
  map.start_vertex = copy_vertex(amap.start_vertex);
  map.goal_vertex = copy_vertex(amap.goal_vertex);

  for (int mid : used_manipulations) {
    const auto& m = amap.manipulations.at(mid);
    Manipulation c = m;
    c.id = static_cast<int>(map.manipulations.size());
    c.start_vertex = copy_vertex(m.start_vertex);
    c.end_vertex = copy_vertex(m.end_vertex);
    c.edges.clear();
    for (int e : m.edges) c.edges.push_back(copy_edge(e, c.id));
    full.manipulation_from_assignment.emplace(mid, c.id);
    map.manipulations.push_back(std::move(c));
  }

  // Highway edges realizing each long move's shortest route.
  const auto out = amap.out_edges();
  std::set<int> used_highways;
  std::map<int, int> edge_to_highway;
  for (std::size_t h = 0; h < amap.highways.size(); ++h) {
    for (int e : amap.highways[h].forward) edge_to_highway[e] = static_cast<int>(h);
    for (int e : amap.highways[h].backward) edge_to_highway[e] = static_cast<int>(h);
  }
  std::set<Component> components{Component{{ModeKind::Free, -1}, -1}};
  for (const auto& mv : moves) {
    components.insert(amap.component(mv.from));
    if (mv.from == mv.to) continue;
    std::vector<int> parent;
    const auto dist = component_dijkstra(amap, out, mv.from, &parent);
    if (!std::isfinite(dist[mv.to]))
      throw DisconnectedMode("robot '" + s.robots[robot].id + "': no route between milestones");
    for (int v = mv.to; v != mv.from; v = amap.edges[parent[v]].s)
      used_highways.insert(edge_to_highway.at(parent[v]));
  }
  std::map<Component, std::vector<int>> anchors;
  for (int h : used_highways) {
    const auto& hw = amap.highways[h];
    Highway c;
    c.from = copy_vertex(hw.from);
    c.to = copy_vertex(hw.to);
    for (int v : hw.vertices) c.vertices.push_back(copy_vertex(v));
    for (int v : hw.corners) c.corners.push_back(copy_vertex(v));
    for (int e : hw.forward) c.forward.push_back(copy_edge(e));
    for (int e : hw.backward) c.backward.push_back(copy_edge(e));
    c.duration = hw.duration;
    for (int v : c.corners) anchors[map.component(v)].push_back(v);
    map.highways.push_back(std::move(c));
  }
  for (const auto& [av, fv] : vmap)
    if (map.vertices[fv].is_milestone) anchors[map.component(fv)].push_back(fv);
  for (const auto& comp : components) {
    if (comp.mode.kind == ModeKind::HoldG) continue;
    auto& a = anchors[comp];
    std::sort(a.begin(), a.end());
    a.erase(std::unique(a.begin(), a.end()), a.end());
    add_spanner(w, cache, comp, a);
  }
  return full;
}

}  // namespace mmtamp::roadmap
