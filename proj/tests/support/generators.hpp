#pragma once

// Random scenarios and search queries for tests.

#include <random>

#include "mmtamp/pbsat/rsipp.hpp"
#include "mmtamp/scenario_io.hpp"

#ifndef MMTAMP_SOURCE_DIR
#define MMTAMP_SOURCE_DIR "."
#endif

namespace testsupport {

using namespace mmtamp;

inline std::string source_path(const std::string& rel) { return std::string(MMTAMP_SOURCE_DIR) + "/" + rel; }

inline Scenario canonical() { return load_scenario(source_path("scenarios/canonical.json")); }
inline Scenario ten_objects() { return load_scenario(source_path("scenarios/three_robots_ten_objects.json")); }

inline geom::ConvexPolygon box(double hx, double hy) {
  return {{{-hx, -hy}, {hx, -hy}, {hx, hy}, {-hx, hy}}};
}

/// Places objects and robots on distinct cells of a grid so that no two
/// object poses (start or goal) overlap and every grasp disc stays clear.
struct Grid {
  int cols, rows;
  double cw, ch;

  Config2 center(int cell) const {
    return {(cell % cols + 0.5) * cw, (cell / cols + 0.5) * ch};
  }
};

struct ScenarioShape {
  int robots = 2;
  int objects = 2;
  int cols = 4;
  int rows = 3;
  double cell_w = 0.5;
  double cell_h = 0.4;
  int max_grasps = 4;   // grasps per object, sampled in [1, max_grasps]
  double hold_probability = 0.0;
  int extra_orderings = 1;
  int n_samples = 120;
};

inline Scenario random_scenario(std::uint64_t seed, const ScenarioShape& sh) {
  std::mt19937_64 rng(seed);
  auto uni = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  auto coin = [&](double p) { return std::bernoulli_distribution(p)(rng); };
  const Grid g{sh.cols, sh.rows, sh.cell_w, sh.cell_h};
  std::vector<int> cells(static_cast<std::size_t>(g.cols * g.rows));
  std::iota(cells.begin(), cells.end(), 0);
  std::shuffle(cells.begin(), cells.end(), rng);
  std::size_t next = 0;
  auto take = [&] {
    if (next >= cells.size()) throw Error("grid too small");
    return g.center(cells[next++]);
  };

  Scenario s;
  s.seed = seed;
  s.workspace.bounds = {0.0, 0.0, g.cols * g.cw, g.rows * g.ch};
  s.params.n_samples = sh.n_samples;
  s.params.k_nearest = 8;
  s.params.connection_k = 8;
  s.params.rrt_max_samples = 2000;
  s.params.shortcut_attempts = 40;
  for (int r = 0; r < sh.robots; ++r) {
    Robot rb;
    rb.id = "r" + std::to_string(r);
    rb.radius = 0.04;
    rb.v_max = 0.5;
    rb.start_config = rb.goal_config = take();
    rb.reach = s.workspace.bounds;
    rb.mode_graph = make_mode_graph(sh.objects, rb.capabilities);
    s.robots.push_back(rb);
  }
  const std::vector<Pose2> grasps = {{-0.14, 0.0, 0.0}, {0.14, 0.0, 0.0}, {0.0, 0.1, 0.0}, {0.0, -0.1, 0.0}};
  for (int o = 0; o < sh.objects; ++o) {
    AssemblyObject ob;
    ob.id = "o" + std::to_string(o);
    ob.footprint = box(0.08, 0.04);
    const auto a = take(), b = take();
    ob.start_pose = {a.x, a.y, 0.0};
    ob.goal_pose = {b.x, b.y, 0.0};
    auto gs = grasps;
    std::shuffle(gs.begin(), gs.end(), rng);
    gs.resize(static_cast<std::size_t>(uni(1, std::min<int>(sh.max_grasps, 4))));
    ob.grasp_offsets = gs;
    s.objects.push_back(ob);
  }
  for (int o = 0; o < sh.objects; ++o) {
    Task t;
    t.id = "place_o" + std::to_string(o);
    t.primitives = {{PrimitiveKind::Detach, o}, {PrimitiveKind::Transfer, o}, {PrimitiveKind::Attach, o}};
    s.tasks.push_back(t);
  }
  // assembly order: random earlier-placed objects must be attached first
  std::vector<int> order(static_cast<std::size_t>(sh.objects));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  for (int i = 0; i < sh.extra_orderings && sh.objects > 1; ++i) {
    int a = uni(0, sh.objects - 2), b = uni(a + 1, sh.objects - 1);
    s.precedence.push_back({{order[a], 2, Endpoint::End}, {order[b], 2, Endpoint::Start}});
  }
  if (sh.objects >= 2 && sh.robots >= 2 && coin(sh.hold_probability)) {
    // one robot holds order[0] while order[1] is attached
    const int held = order[0], placed = order[1];
    Task h;
    h.id = "hold_o" + std::to_string(held);
    h.primitives = {{PrimitiveKind::GraspG, held}, {PrimitiveKind::ReleaseG, held}};
    s.tasks.push_back(h);
    const int ht = static_cast<int>(s.tasks.size()) - 1;
    s.precedence.push_back({{held, 2, Endpoint::End}, {ht, 0, Endpoint::Start}});
    s.precedence.push_back({{ht, 0, Endpoint::End}, {placed, 2, Endpoint::Start}});
    s.precedence.push_back({{placed, 2, Endpoint::End}, {ht, 1, Endpoint::Start}});
  }
  std::sort(s.precedence.begin(), s.precedence.end());
  s.precedence.erase(std::unique(s.precedence.begin(), s.precedence.end()), s.precedence.end());
  validate_scenario(s);
  return s;
}

/// 2 robots, up to 3 tasks, at most 2 grasps per object. Some draws force
/// the holding and the attaching task onto one robot, which no schedule
/// can satisfy.
inline Scenario tiny_instance(std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x7469);
  ScenarioShape sh;
  sh.robots = 2;
  sh.objects = std::uniform_int_distribution<int>(1, 2)(rng);
  sh.cols = 4;
  sh.rows = 2;
  sh.max_grasps = 2;
  sh.hold_probability = sh.objects == 2 ? 0.5 : 0.0;
  sh.n_samples = 60;
  Scenario s = random_scenario(seed, sh);
  if (std::bernoulli_distribution(0.2)(rng)) {
    const int r = std::uniform_int_distribution<int>(0, 1)(rng);
    for (auto& t : s.tasks) t.eligible_robots = std::vector<int>{r};
  }
  validate_scenario(s);
  return s;
}

inline Scenario medium_scenario(std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x6d6564);
  ScenarioShape sh;
  sh.robots = std::uniform_int_distribution<int>(2, 3)(rng);
  sh.objects = std::uniform_int_distribution<int>(4, 10)(rng);
  sh.cols = 6;
  sh.rows = sh.objects * 2 + sh.robots > 18 ? 4 : 3;
  sh.max_grasps = 2;
  sh.hold_probability = 0.3;
  sh.extra_orderings = 2;
  sh.n_samples = 150;
  return random_scenario(seed, sh);
}

/// A roadmap on up to `n` vertices with integer-millisecond edge durations.
inline roadmap::MultiModalRoadmap random_graph(std::mt19937_64& rng, int n) {
  roadmap::MultiModalRoadmap m;
  m.robot = 0;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < n; ++i) {
    roadmap::RoadmapVertex v;
    v.id = i;
    v.config = {u(rng), u(rng)};
    v.mode = {ModeKind::Free, -1};
    m.vertices.push_back(v);
  }
  auto add = [&](int a, int b) {
    roadmap::RoadmapEdge e;
    e.id = static_cast<int>(m.edges.size());
    e.s = a;
    e.e = b;
    e.w = std::max(1.0, std::round(distance(m.vertices[a].config, m.vertices[b].config) * 1000.0)) / 1000.0;
    e.tau = {PrimitiveKind::Transit, -1};
    e.kind = roadmap::EdgeKind::spanner;
    m.edges.push_back(e);
  };
  std::set<std::pair<int, int>> seen;
  for (int a = 0; a < n; ++a) {
    std::vector<std::pair<double, int>> d;
    for (int b = 0; b < n; ++b)
      if (b != a) d.push_back({distance(m.vertices[a].config, m.vertices[b].config), b});
    std::sort(d.begin(), d.end());
    for (int k = 0; k < std::min<int>(3, static_cast<int>(d.size())); ++k) {
      const int b = d[k].second;
      if (!seen.insert({std::min(a, b), std::max(a, b)}).second) continue;
      add(a, b);
      add(b, a);
    }
  }
  m.start_vertex = 0;
  m.goal_vertex = n - 1;
  return m;
}

/// Random reservations on integer milliseconds.
inline pbsat::ReservationTable random_reservations(std::mt19937_64& rng, const roadmap::MultiModalRoadmap& m,
                                                   int start, double t0) {
  pbsat::ReservationTable rt(static_cast<int>(m.vertices.size()), static_cast<int>(m.edges.size()));
  std::uniform_int_distribution<int> ms(0, 3000), len(50, 600);
  std::bernoulli_distribution pick(0.3);
  for (std::size_t v = 0; v < m.vertices.size(); ++v)
    for (int k = 0; k < 2; ++k)
      if (pick(rng)) {
        const double lo = ms(rng) / 1000.0, hi = lo + len(rng) / 1000.0;
        if (static_cast<int>(v) == start && lo <= t0 && t0 < hi) continue;
        rt.reserve_vertex(static_cast<int>(v), lo, hi);
      }
  for (std::size_t e = 0; e < m.edges.size(); ++e)
    if (pick(rng)) {
      const double lo = ms(rng) / 1000.0;
      rt.reserve_edge(static_cast<int>(e), lo, lo + len(rng) / 1000.0);
    }
  rt.finalize();
  return rt;
}

}  // namespace testsupport
