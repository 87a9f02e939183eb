#include <gtest/gtest.h>

#include <queue>
#include <sstream>

#include "mmtamp/pipeline.hpp"
#include "mmtamp/validate/oracles.hpp"
#include "support/generators.hpp"

using namespace mmtamp;
using namespace mmtamp::assign;

namespace {

struct Solved {
  Scenario s;
  std::vector<roadmap::MultiModalRoadmap> maps;
  CollisionSet pi;
  AssignmentProblem ap;
  Assignment a;

  std::vector<const roadmap::MultiModalRoadmap*> ptrs() const { return pointers(maps); }
};

std::unique_ptr<Solved> prepare(Scenario s, bool annotate = true) {
  auto out = std::make_unique<Solved>();
  out->s = std::move(s);
  out->maps = stage_roadmaps(out->s);
  if (annotate) {
    out->pi = stage_annotate(out->s, out->maps, 1);
  } else {
    out->pi.index = ConditionIndex(out->ptrs(), static_cast<int>(out->s.objects.size()));
    out->pi.finalize();
  }
  out->ap = build_assignment_problem(out->s, out->ptrs(), out->pi);
  return out;
}

std::unique_ptr<Solved> solve(Scenario s, bool annotate = true) {
  auto out = prepare(std::move(s), annotate);
  out->a = solve_assignment(out->s, out->ptrs(), out->ap, {});
  return out;
}

const Solved& canonical_solved() {
  static const auto c = solve(testsupport::canonical());
  return *c;
}

// Plain Dijkstra over the non-manipulation edges of v's (mode, grasp) component.
std::vector<double> component_distances(const roadmap::MultiModalRoadmap& m, int src) {
  std::vector<double> d(m.vertices.size(), kInf);
  using Q = std::pair<double, int>;
  std::priority_queue<Q, std::vector<Q>, std::greater<>> q;
  d[src] = 0.0;
  q.push({0.0, src});
  while (!q.empty()) {
    auto [dv, v] = q.top();
    q.pop();
    if (dv > d[v]) continue;
    for (const auto& e : m.edges) {
      if (e.s != v || e.manipulation >= 0 || m.component(e.e) != m.component(src)) continue;
      if (dv + e.w < d[e.e]) {
        d[e.e] = dv + e.w;
        q.push({d[e.e], e.e});
      }
    }
  }
  return d;
}

// Shortest start-to-goal route of a plan roadmap that skips the direct link.
double shortest_through_tasks(const PlanRoadmap& pr) {
  std::vector<double> d(pr.vertices.size(), kInf);
  using Q = std::pair<double, int>;
  std::priority_queue<Q, std::vector<Q>, std::greater<>> q;
  d[PlanRoadmap::kStart] = 0.0;
  q.push({0.0, PlanRoadmap::kStart});
  while (!q.empty()) {
    auto [dv, v] = q.top();
    q.pop();
    if (dv > d[v]) continue;
    for (const auto& e : pr.edges) {
      if (e.s != v || (e.s == PlanRoadmap::kStart && e.e == PlanRoadmap::kGoal)) continue;
      if (dv + e.w < d[e.e]) {
        d[e.e] = dv + e.w;
        q.push({d[e.e], e.e});
      }
    }
  }
  return d[PlanRoadmap::kGoal];
}

int count_family(const MilpModel& m, int f) {
  int n = 0;
  for (const auto& r : m.rows) n += r.family == f;
  return n;
}

int count_paths(const TaskRoadmap& tr, int K) {
  std::vector<std::vector<int>> out(tr.nodes.size());
  for (const auto& e : tr.edges) out[e.s].push_back(e.e);
  std::function<int(int)> walk = [&](int v) {
    if (tr.nodes[v].k == K - 1 && tr.nodes[v].end) return 1;
    int n = 0;
    for (int w : out[v]) n += walk(w);
    return n;
  };
  int n = 0;
  for (int r : tr.roots) n += walk(r);
  return n;
}

}  // namespace

TEST(TaskRoadmap, HoldTaskPathCountBoundedByGraspProduct) {
  const Scenario s = testsupport::canonical();
  const auto map = roadmap::build_assignment_roadmap(s, 0);
  ComponentDistances dist(map);
  const int hb = s.task_index("hold_B");
  const auto tr = build_task_roadmap(s, map, hb, dist);
  ASSERT_FALSE(tr.empty());
  int grasp = 0, release = 0;
  for (const auto& m : map.manipulations) {
    grasp += m.tau.kind == PrimitiveKind::GraspG;
    release += m.tau.kind == PrimitiveKind::ReleaseG;
  }
  const int paths = count_paths(tr, 2);
  EXPECT_GT(paths, 0);
  EXPECT_LE(paths, grasp * release);
}

TEST(TaskRoadmap, UnreachableObjectIsEmpty) {
  Scenario s = testsupport::canonical();
  s.robots[0].reach = geom::Rect{0.0, 0.0, 0.9, 1.0};
  const auto map = roadmap::build_assignment_roadmap(s, 0);
  ComponentDistances dist(map);
  EXPECT_TRUE(build_task_roadmap(s, map, s.task_index("place_R"), dist).empty());
  EXPECT_FALSE(build_task_roadmap(s, map, s.task_index("place_B"), dist).empty());
}

TEST(TaskRoadmap, AssemblyPathWeightsAgainstDijkstra) {
  const Scenario s = testsupport::canonical();
  const auto map = roadmap::build_assignment_roadmap(s, 1);
  ComponentDistances dist(map);
  const int pb = s.task_index("place_B");
  std::vector<TaskRoadmap> trs;
  for (int p = 0; p < static_cast<int>(s.tasks.size()); ++p) trs.push_back(build_task_roadmap(s, map, p, dist));
  for (const auto& e : trs[pb].edges) {
    if (e.kind != TREdgeKind::abstraction) continue;
    const int a = trs[pb].nodes[e.s].vertex, b = trs[pb].nodes[e.e].vertex;
    EXPECT_NEAR(e.w, component_distances(map, a)[b], 1e-9);
  }
  const auto pr = build_plan_roadmap(s, map, trs, dist);
  const auto paths = enumerate_task_paths(s, pr, pb);
  ASSERT_FALSE(paths.empty());
  for (const auto& tp : paths) {
    double mc = 0.0;
    for (int k = 0; k < 3; ++k)
      if (is_mode_changing(s.tasks[pb].primitives[k].kind)) mc += tp.duration[k];
    EXPECT_GE(tp.weight, mc - 1e-12);
  }
  for (std::size_t i = 1; i < paths.size(); ++i) EXPECT_LE(paths[i - 1].weight, paths[i].weight);
}

TEST(PlanRoadmap, OneTaskOneRoute) {
  Scenario s = testsupport::canonical();
  s.tasks.resize(1);
  s.precedence.clear();
  const auto map = roadmap::build_assignment_roadmap(s, 0);
  ComponentDistances dist(map);
  std::vector<TaskRoadmap> trs{build_task_roadmap(s, map, 0, dist)};
  const auto pr = build_plan_roadmap(s, map, trs, dist);
  // every route through the task enters at a root and leaves at a leaf
  for (const auto& e : pr.edges) {
    if (e.kind != PlanEdgeKind::link) continue;
    const bool from_start = e.s == PlanRoadmap::kStart, to_goal = e.e == PlanRoadmap::kGoal;
    EXPECT_TRUE(from_start || to_goal);
  }
  const auto paths = enumerate_task_paths(s, pr, 0);
  for (const auto& tp : paths) {
    EXPECT_TRUE(std::isfinite(pr.link_weight(PlanRoadmap::kStart, tp.root)));
    EXPECT_TRUE(std::isfinite(pr.link_weight(tp.leaf, PlanRoadmap::kGoal)));
  }
  if (paths.size() == 1) {
    int routes = 0;
    for (int r : pr.roots[0])
      for (int l : pr.leaves[0]) routes += std::isfinite(pr.link_weight(PlanRoadmap::kStart, r)) &&
                                          std::isfinite(pr.link_weight(l, PlanRoadmap::kGoal));
    EXPECT_EQ(routes, 1);
  }
}

TEST(PlanRoadmap, LinksInBothOrdersNeverWithinATask) {
  const Scenario s = testsupport::canonical();
  const auto map = roadmap::build_assignment_roadmap(s, 0);
  ComponentDistances dist(map);
  std::vector<TaskRoadmap> trs;
  for (int p = 0; p < static_cast<int>(s.tasks.size()); ++p) trs.push_back(build_task_roadmap(s, map, p, dist));
  const auto pr = build_plan_roadmap(s, map, trs, dist);
  std::set<std::pair<int, int>> orders;
  for (const auto& e : pr.edges) {
    if (e.kind != PlanEdgeKind::link) continue;
    const int a = pr.vertices[e.s].task, b = pr.vertices[e.e].task;
    if (a >= 0 && b >= 0) {
      EXPECT_NE(a, b);
      orders.insert({a, b});
    }
    // link weight is the free-space travel time between the two configurations
    EXPECT_NEAR(e.w, component_distances(map, pr.vertices[e.s].vertex)[pr.vertices[e.e].vertex], 1e-9);
  }
  const int pb = s.task_index("place_B"), pr_ = s.task_index("place_R");
  EXPECT_TRUE(orders.count({pb, pr_}));
  EXPECT_TRUE(orders.count({pr_, pb}));
}

TEST(Milp, CanonicalSizes) {
  const auto& c = canonical_solved();
  const auto& m = c.ap.model;
  int edge_vars = 0;
  for (const auto& row : m.A)
    for (int v : row) edge_vars += v >= 0;
  EXPECT_EQ(m.num_binary(), edge_vars + static_cast<int>(m.pairs.size()));
  EXPECT_GT(m.pairs.size(), 0u);
  EXPECT_EQ(count_family(m, 7), 2 * static_cast<int>(m.pairs.size()));
  EXPECT_GT(m.num_constraints(), 0);
  double H = 1.0;
  for (const auto& pr : c.ap.plan_roadmaps)
    for (const auto& e : pr.edges) H += e.w;
  EXPECT_NEAR(m.H, H, 1e-9 * H);
}

TEST(Milp, NoCollisionsNoDisjunctions) {
  const auto c = prepare(testsupport::canonical(), false);
  EXPECT_EQ(count_family(c->ap.model, 7), 0);
  EXPECT_TRUE(c->ap.model.pairs.empty());
}

TEST(Milp, EmptyTaskSet) {
  Scenario s = testsupport::canonical();
  s.tasks.clear();
  s.precedence.clear();
  const auto c = prepare(s, false);
  std::set<int> families;
  for (const auto& r : c->ap.model.rows) families.insert(r.family);
  for (int f : families) EXPECT_TRUE(f <= 3 || f == 6) << f;  // (6) only as makespan dominance
  const auto lp = to_lp(c->ap.model);
  EXPECT_NE(lp.find("Minimize\n obj: t\n"), std::string::npos);
  const auto a = solve_assignment(c->s, c->ptrs(), c->ap, {});
  EXPECT_NEAR(a.makespan, 0.0, 1e-9);  // start == goal for both robots
}

TEST(Milp, SingleTaskSingleRobotForcesItsPath) {
  Scenario s = testsupport::canonical();
  s.robots.resize(1);
  s.tasks.resize(1);
  s.precedence.clear();
  auto c = prepare(s, false);
  const auto& pr = c->ap.plan_roadmaps[0];
  const double expect = shortest_through_tasks(pr);
  c->a = solve_assignment(c->s, c->ptrs(), c->ap, {});
  EXPECT_NEAR(c->a.makespan, expect, 1e-6);
  if (c->ap.paths[0][0].size() == 1) {
    for (int e : c->ap.paths[0][0][0].edges) EXPECT_EQ(c->a.x[c->ap.model.A[0][e]], 1.0);
  }
}

TEST(Milp, LpExportDeclaresBinariesAndRoundTrips) {
  const auto& m = canonical_solved().ap.model;
  std::istringstream in(to_lp(m));
  std::string line, section;
  int constraints = 0, binaries = 0;
  std::set<std::string> names;
  while (std::getline(in, line)) {
    if (line == "Subject To" || line == "Bounds" || line == "Binaries" || line == "End") {
      section = line;
      continue;
    }
    if (section == "Subject To" && line.rfind(" c", 0) == 0) ++constraints;
    if (section == "Binaries") {
      ++binaries;
      names.insert(line.substr(1));
    }
  }
  EXPECT_EQ(constraints, m.num_constraints());
  EXPECT_EQ(binaries, m.num_binary());
  EXPECT_EQ(names.size(), static_cast<std::size_t>(binaries));
  EXPECT_THROW(export_lp(m, "/nonexistent-dir/model.lp"), IoError);
}

TEST(Milp, UnassignableTaskIsEncodingError) {
  Scenario s = testsupport::canonical();
  s.robots[0].reach = geom::Rect{0.0, 0.0, 1.3, 1.0};
  s.robots[1].reach = geom::Rect{1.0, 0.5, 2.0, 1.0};
  s.tasks = {s.tasks[1]};
  s.precedence.clear();
  const auto maps = stage_roadmaps(s);
  const auto pi = stage_annotate(s, maps, 1);
  EXPECT_THROW(build_assignment_problem(s, pointers(maps), pi), EncodingError);
}

TEST(Solve, CanonicalHoldAndAttachOnDifferentRobots) {
  const auto& c = canonical_solved();
  EXPECT_TRUE(c.a.optimal);
  int hold = -1, place_r = -1;
  for (int r = 0; r < 2; ++r)
    for (const auto& it : c.a.routes[r]) {
      if (it.task == c.s.task_index("hold_B")) hold = r;
      if (it.task == c.s.task_index("place_R")) place_r = r;
    }
  ASSERT_GE(hold, 0);
  ASSERT_GE(place_r, 0);
  EXPECT_NE(hold, place_r);
}

TEST(Solve, CanonicalMatchesBruteForce) {
  const auto& c = canonical_solved();
  const double want = validate::brute_force_assignment_oracle(c.s, c.ptrs(), c.pi);
  EXPECT_NEAR(c.a.makespan, want, 1e-6);
}

TEST(Solve, SolutionSatisfiesEveryFamily) {
  const auto& c = canonical_solved();
  const auto rep = check_solution(c.ap.model, c.a.x);
  EXPECT_TRUE(rep.ok()) << (rep.symbolic_violations.empty() ? "" : rep.symbolic_violations.front());
  EXPECT_NEAR(c.a.x[c.ap.model.t], c.a.makespan, 1e-9);
}

TEST(Solve, ExactlyOneRobotPerTask) {
  const auto& c = canonical_solved();
  std::vector<int> count(c.s.tasks.size(), 0);
  for (const auto& route : c.a.routes)
    for (const auto& it : route) ++count[it.task];
  for (int n : count) EXPECT_EQ(n, 1);
}

TEST(Solve, IncumbentsNonIncreasing) {
  int solved = 0;
  for (std::uint64_t seed = 1; seed <= 12 && solved < 6; ++seed) {
    std::unique_ptr<Solved> c;
    try {
      c = solve(testsupport::tiny_instance(seed));
    } catch (const Error&) {
      continue;
    }
    ++solved;
    const auto& inc = c->a.stats.incumbents;
    ASSERT_FALSE(inc.empty());
    for (std::size_t i = 1; i < inc.size(); ++i) {
      EXPECT_LE(inc[i].makespan, inc[i - 1].makespan);
      EXPECT_GE(inc[i].node, inc[i - 1].node);
    }
    EXPECT_NEAR(inc.back().makespan, c->a.makespan, 1e-12);
  }
  EXPECT_GE(solved, 3);
}

TEST(Solve, TinyInstancesMatchBruteForce) {
  int compared = 0;
  for (std::uint64_t seed = 100; seed < 112; ++seed) {
    const Scenario s = testsupport::tiny_instance(seed);
    std::unique_ptr<Solved> c;
    try {
      c = prepare(s);
    } catch (const Error&) {
      continue;
    }
    double want;
    try {
      want = validate::brute_force_assignment_oracle(c->s, c->ptrs(), c->pi);
    } catch (const SizeLimit&) {
      continue;
    }
    ++compared;
    if (!std::isfinite(want)) {
      EXPECT_THROW(solve_assignment(c->s, c->ptrs(), c->ap, {}), Infeasible) << seed;
      continue;
    }
    const auto a = solve_assignment(c->s, c->ptrs(), c->ap, {});
    EXPECT_NEAR(a.makespan, want, 1e-6) << seed;
  }
  EXPECT_GE(compared, 6);
}

TEST(Solve, HoldAndAttachOnOneRobotIsInfeasible) {
  Scenario s = testsupport::canonical();
  for (auto& t : s.tasks) t.eligible_robots = std::vector<int>{0};
  const auto c = prepare(s);
  EXPECT_FALSE(std::isfinite(validate::brute_force_assignment_oracle(c->s, c->ptrs(), c->pi)));
  EXPECT_THROW(solve_assignment(c->s, c->ptrs(), c->ap, {}), Infeasible);
}

TEST(Solve, RelaxationBoundBelowMakespan) {
  const auto& c = canonical_solved();
  const double lb = relaxation_bound(c.s, c.ptrs(), c.ap, c.a.routes);
  EXPECT_LE(lb, c.a.makespan + 1e-9);
  EXPECT_GT(lb, 0.0);
}

TEST(Solve, AssignmentJsonRoundTrip) {
  const auto& c = canonical_solved();
  const auto j = assignment_to_json(c.s, c.ap, c.a);
  const auto b = assignment_from_json(c.s, c.ap, j);
  EXPECT_EQ(b.routes, c.a.routes);
  EXPECT_EQ(b.x, c.a.x);
  EXPECT_EQ(assignment_to_json(c.s, c.ap, b), j);
}

TEST(Subplans, CanonicalHandCount) {
  const auto& c = canonical_solved();
  const auto g = extract_subplans(c.s, c.ptrs(), c.ap, c.a);
  int expect = 0;
  for (const auto& route : c.a.routes) {
    expect += 1;  // final transit to the goal
    for (const auto& it : route) {
      const auto& prims = c.s.tasks[it.task].primitives;
      int mc = 0, mp = 0, adjacent = 0;
      for (std::size_t k = 0; k < prims.size(); ++k) {
        const bool m = is_mode_changing(prims[k].kind);
        mc += m;
        mp += !m;
        if (m && k > 0 && is_mode_changing(prims[k - 1].kind)) ++adjacent;
      }
      // link transit, one long per mode-preserving primitive, and a mode
      // subplan on each side of every manipulation (shared when adjacent)
      expect += 1 + mp + mc + 2 * mc - adjacent;
    }
  }
  EXPECT_EQ(g.size(), expect);
  EXPECT_EQ(g.size(), 24);
}

TEST(Subplans, ChainsAndOrders) {
  const auto& c = canonical_solved();
  const auto g = extract_subplans(c.s, c.ptrs(), c.ap, c.a);
  for (int r = 0; r < 2; ++r) {
    const auto& seq = g.by_robot[r];
    ASSERT_FALSE(seq.empty());
    EXPECT_EQ(g.subplans[seq.front()].start_vertex, c.maps[r].start_vertex);
    EXPECT_EQ(g.subplans[seq.back()].goal_vertex, c.maps[r].goal_vertex);
    for (std::size_t i = 0; i < seq.size(); ++i) {
      const auto& sp = g.subplans[seq[i]];
      EXPECT_EQ(sp.index, static_cast<int>(i));
      EXPECT_EQ(sp.robot, r);
      if (sp.kind == SubplanKind::Mode) EXPECT_EQ(sp.start_vertex, sp.goal_vertex);
      if (i > 0) {
        EXPECT_EQ(g.subplans[seq[i - 1]].goal_vertex, sp.start_vertex);
        EXPECT_LE(g.subplans[seq[i - 1]].planned_end, sp.planned_end + 1e-9);
      }
    }
  }
  // each primitive occurrence is realized exactly once
  std::map<std::pair<int, int>, int> seen;
  for (const auto& sp : g.subplans)
    if (sp.task >= 0 && sp.kind != SubplanKind::Mode) ++seen[{sp.task, sp.k}];
  for (int p = 0; p < static_cast<int>(c.s.tasks.size()); ++p)
    for (int k = 0; k < static_cast<int>(c.s.tasks[p].primitives.size()); ++k) EXPECT_EQ((seen[{p, k}]), 1);
  // the schedule witnesses every ordering, so the order relation is acyclic
  for (const auto& o : g.precedence)
    EXPECT_LE(g.subplans[o.a].planned_end, g.subplans[o.b].planned_end + 1e-6);
}

TEST(Subplans, IdleRobotGetsOneTransit) {
  Scenario s = testsupport::canonical();
  s.tasks.resize(1);
  s.precedence.clear();
  s.tasks[0].eligible_robots = std::vector<int>{1};
  const auto c = solve(s);
  const auto g = extract_subplans(c->s, c->ptrs(), c->ap, c->a);
  ASSERT_EQ(g.by_robot[0].size(), 1u);
  const auto& sp = g.subplans[g.by_robot[0][0]];
  EXPECT_EQ(sp.kind, SubplanKind::Long);
  EXPECT_EQ(sp.tau.kind, PrimitiveKind::Transit);
  EXPECT_EQ(sp.start_vertex, c->maps[0].start_vertex);
  EXPECT_EQ(sp.goal_vertex, c->maps[0].goal_vertex);
}
