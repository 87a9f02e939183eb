#include <gtest/gtest.h>

#include "mmtamp/annotate.hpp"
#include "support/generators.hpp"

using namespace mmtamp;
using namespace mmtamp::roadmap;
using testsupport::canonical;

namespace {

json canonical_json() { return read_json_file(testsupport::source_path("scenarios/canonical.json")); }

std::vector<const MultiModalRoadmap*> ptrs(const std::vector<MultiModalRoadmap>& m) {
  std::vector<const MultiModalRoadmap*> out;
  for (const auto& x : m) out.push_back(&x);
  return out;
}

std::vector<MultiModalRoadmap> assignment_maps(const Scenario& s) {
  std::vector<MultiModalRoadmap> out;
  for (int r = 0; r < static_cast<int>(s.robots.size()); ++r) out.push_back(build_assignment_roadmap(s, r));
  return out;
}

int count_manipulations(const MultiModalRoadmap& m, PrimitiveKind k, int object) {
  int n = 0;
  for (const auto& x : m.manipulations) n += x.tau == Primitive{k, object};
  return n;
}

/// Every cross-robot and robot-object condition pair checked directly.
std::set<std::pair<int, int>> all_pairs_oracle(const Scenario& s, const std::vector<const MultiModalRoadmap*>& maps,
                                               const ConditionIndex& idx, bool mode_changing_only) {
  std::vector<int> conds;
  for (int r = 0; r < static_cast<int>(maps.size()); ++r) {
    for (const auto& e : maps[r]->edges)
      if (!mode_changing_only || e.kind == EdgeKind::mode_changing) conds.push_back(idx.edge(r, e.id));
    if (!mode_changing_only)
      for (const auto& v : maps[r]->vertices) conds.push_back(idx.vertex(r, v.id));
  }
  std::set<std::pair<int, int>> out;
  std::vector<geom::SweptArea> area;
  for (int c : conds) area.push_back(condition_area(s, maps, idx, c));
  for (std::size_t i = 0; i < conds.size(); ++i)
    for (std::size_t j = i + 1; j < conds.size(); ++j) {
      if (idx.decode(conds[i]).robot == idx.decode(conds[j]).robot) continue;
      if (geom::areas_overlap(area[i], area[j]))
        out.emplace(std::min(conds[i], conds[j]), std::max(conds[i], conds[j]));
    }
  for (int o = 0; o < static_cast<int>(s.objects.size()); ++o)
    for (Pole p : {Pole::Start, Pole::Goal}) {
      const int oc = idx.object(o, p);
      const auto oa = condition_area(s, maps, idx, oc);
      for (int c : conds)
        if (geom::areas_overlap(condition_area(s, maps, idx, c, o), oa)) out.emplace(std::min(c, oc), std::max(c, oc));
    }
  return out;
}

}  // namespace

TEST(ModeChangingEdges, OnePerReachableGrasp) {
  auto j = canonical_json();
  j["objects"][0]["start"] = json::array({0.5, 0.4, 0.0});
  j["objects"][0]["grasps"] = json::array({json::array({-0.16, 0.0, 0.0}), json::array({0.16, 0.0, 0.0}),
                                           json::array({0.0, 0.11, 0.0}), json::array({0.0, -0.11, 0.0})});
  const Scenario s = scenario_from_json(j);
  const auto m = build_assignment_roadmap(s, 0);
  EXPECT_GE(count_manipulations(m, PrimitiveKind::Detach, 0), 4);
  for (const auto& x : m.manipulations) {
    EXPECT_TRUE(m.vertices[x.start_vertex].is_milestone);
    EXPECT_TRUE(m.vertices[x.end_vertex].is_milestone);
    EXPECT_LE(x.edges.size(), 3u * 1 + 10);  // a short straight chain
  }
}

TEST(ModeChangingEdges, UnreachableObjectMarkedInfeasible) {
  auto j = canonical_json();
  j["robots"][0]["reach"] = json::array({0.0, 0.0, 0.9, 1.0});
  const Scenario s = scenario_from_json(j);
  const auto m = build_assignment_roadmap(s, 0);
  const int R = s.object_index("R");
  EXPECT_EQ(count_manipulations(m, PrimitiveKind::Detach, R), 0);
  EXPECT_NE(std::find(m.infeasible.begin(), m.infeasible.end(), Primitive{PrimitiveKind::Detach, R}), m.infeasible.end());
}

TEST(ModeChangingEdges, BlockedGraspSkipped) {
  // B's bottom grasp at its start would put the retreat outside the workspace
  const Scenario s = canonical();
  const auto m = build_assignment_roadmap(s, 0);
  for (const auto& x : m.manipulations)
    if (x.tau == Primitive{PrimitiveKind::Detach, 0}) EXPECT_NE(x.grasp, 2);
  EXPECT_EQ(count_manipulations(m, PrimitiveKind::Detach, 0), 2);
}

TEST(AssignmentRoadmap, EdgeInvariants) {
  const Scenario s = canonical();
  for (int r = 0; r < 2; ++r) {
    const auto m = build_assignment_roadmap(s, r);
    EXPECT_EQ(m.vertices[m.start_vertex].mode.kind, ModeKind::Free);
    EXPECT_EQ(m.vertices[m.goal_vertex].mode.kind, ModeKind::Free);
    const double v = s.robots[r].v_max;
    for (const auto& e : m.edges) {
      EXPECT_GE(e.w, distance(m.vertices[e.s].config, m.vertices[e.e].config) / v - kTimeEps);
      EXPECT_LE(e.w, s.params.max_edge_duration + kTimeEps);
      EXPECT_EQ(e.grasp < 0, e.tau.kind == PrimitiveKind::Transit);
      if (e.kind == EdgeKind::mode_changing) {
        EXPECT_EQ(m.vertices[e.s].mode == start_mode(e.tau) || m.vertices[e.s].mode.kind != ModeKind::Free, true);
      } else {
        EXPECT_EQ(m.component(e.s), m.component(e.e));
      }
      EXPECT_EQ(m.vertices[e.s].grasp < 0, m.vertices[e.s].mode.kind == ModeKind::Free);
    }
    EXPECT_EQ(m.spanner_vertex_count(), 0u);
  }
}

TEST(AssignmentRoadmap, HighwayNearStraightLine) {
  const Scenario s = canonical();  // no obstacles
  for (int r = 0; r < 2; ++r) {
    const auto m = build_assignment_roadmap(s, r);
    ASSERT_FALSE(m.highways.empty());
    for (const auto& h : m.highways) {
      const double lb = distance(m.vertices[h.from].config, m.vertices[h.to].config) / s.robots[r].v_max;
      EXPECT_GE(h.duration, lb - 1e-9);
      EXPECT_LE(h.duration, 1.05 * lb + 1e-9);
    }
  }
}

TEST(AssignmentRoadmap, HighwayBoundAroundObstacle) {
  auto j = canonical_json();
  j["workspace"]["obstacles"] = json::array({json::array({json::array({0.95, 0.0}), json::array({1.05, 0.0}),
                                                           json::array({1.05, 0.3}), json::array({0.95, 0.3})})});
  const Scenario s = scenario_from_json(j);
  for (int r = 0; r < 2; ++r) {
    const auto m = build_assignment_roadmap(s, r);
    const auto body = s.robots[r].body();
    for (const auto& h : m.highways) {
      const auto a = m.vertices[h.from].config, b = m.vertices[h.to].config;
      const auto c = vertex_carried(s, m.vertices[h.from]);
      if (geom::motion_free(s.workspace, body, a, b, c ? &*c : nullptr))
        EXPECT_LE(h.duration, 1.5 * distance(a, b) / s.robots[r].v_max + 1e-9);
    }
    // statically free at 5 mm
    for (const auto& e : m.edges) {
      const auto a = m.vertices[e.s].config, b = m.vertices[e.e].config;
      const auto c = edge_carried(s, e);
      const int n = std::max(1, static_cast<int>(std::ceil(distance(a, b) / 0.005)));
      for (int k = 0; k <= n; ++k) {
        const Config2 p = a + (b - a) * (static_cast<double>(k) / n);
        EXPECT_TRUE(geom::config_free(s.workspace, body, p, c ? &*c : nullptr));
      }
    }
  }
}

TEST(AssignmentRoadmap, NothingReachable) {
  auto j = canonical_json();
  for (auto& t : j["tasks"]) t["eligible_robots"] = json::array({"right"});
  const Scenario s = scenario_from_json(j);
  const auto m = build_assignment_roadmap(s, 0);
  EXPECT_TRUE(m.manipulations.empty());
  for (const auto& v : m.vertices) EXPECT_EQ(v.mode.kind, ModeKind::Free);
  EXPECT_EQ(m.start_vertex, m.goal_vertex);  // start == goal in the fixture
}

TEST(AssignmentRoadmap, Deterministic) {
  const Scenario s = canonical();
  EXPECT_EQ(build_assignment_roadmap(s, 0).hash(), build_assignment_roadmap(s, 0).hash());
  EXPECT_EQ(build_assignment_roadmap(s, 1), build_assignment_roadmap(s, 1));
  Scenario t = s;
  t.seed = 43;
  EXPECT_NE(build_full_roadmap(t, 0, build_assignment_roadmap(t, 0), build_config_cache(t, 0), {}, {}).map.hash(),
            build_full_roadmap(s, 0, build_assignment_roadmap(s, 0), build_config_cache(s, 0), {}, {}).map.hash());
}

namespace {

struct Move {
  std::vector<int> used;
  std::vector<LongMove> moves;
};

/// Detach(o) then Attach(o) with the same grasp, joined by one Transfer.
Move transfer_of(const MultiModalRoadmap& m, int o) {
  for (const auto& d : m.manipulations) {
    if (d.tau != Primitive{PrimitiveKind::Detach, o}) continue;
    for (const auto& a : m.manipulations)
      if (a.tau == Primitive{PrimitiveKind::Attach, o} && a.grasp == d.grasp)
        return {{d.id, a.id}, {{d.end_vertex, a.start_vertex}}};
  }
  return {};
}

std::set<Component> components_of(const MultiModalRoadmap& m) {
  std::set<Component> out;
  for (std::size_t v = 0; v < m.vertices.size(); ++v) out.insert(m.component(static_cast<int>(v)));
  return out;
}

}  // namespace

TEST(FullRoadmap, NothingAssignedIsFreeOnly) {
  const Scenario s = canonical();
  const auto am = build_assignment_roadmap(s, 0);
  const auto full = build_full_roadmap(s, 0, am, build_config_cache(s, 0), {}, {});
  for (const auto& c : components_of(full.map)) EXPECT_EQ(c.mode.kind, ModeKind::Free);
  EXPECT_GT(full.map.spanner_vertex_count(), 0u);
  EXPECT_GE(full.map.vertices.size() - 2, full.map.spanner_vertex_count());
}

TEST(FullRoadmap, OneTransferAddsOneCarryComponent) {
  const Scenario s = canonical();
  const auto am = build_assignment_roadmap(s, 0);
  const auto mv = transfer_of(am, 0);
  ASSERT_FALSE(mv.used.empty());
  const auto full = build_full_roadmap(s, 0, am, build_config_cache(s, 0), mv.used, mv.moves);
  int carry = 0;
  for (const auto& c : components_of(full.map)) carry += c.mode.kind == ModeKind::Carry;
  EXPECT_EQ(carry, 1);
  // the full roadmap is a superset of spanner samples on top of the assignment roadmap
  EXPECT_GE(full.map.vertices.size(), am.spanner_vertex_count() + full.map.spanner_vertex_count());
  EXPECT_GT(full.map.vertices.size(), full.map.spanner_vertex_count());
}

TEST(FullRoadmap, CarryComponentsKeyedByGrasp) {
  const Scenario s = canonical();
  const auto am = build_assignment_roadmap(s, 0);
  std::vector<int> used;
  std::vector<LongMove> moves;
  for (const auto& d : am.manipulations)
    for (const auto& a : am.manipulations)
      if (d.tau == Primitive{PrimitiveKind::Detach, 0} && a.tau == Primitive{PrimitiveKind::Attach, 0} &&
          d.grasp == a.grasp) {
        used.push_back(d.id);
        used.push_back(a.id);
        moves.push_back({d.end_vertex, a.start_vertex});
      }
  ASSERT_GE(moves.size(), 2u);
  const auto full = build_full_roadmap(s, 0, am, build_config_cache(s, 0), used, moves);
  std::set<int> grasps;
  for (const auto& c : components_of(full.map))
    if (c.mode == Mode{ModeKind::Carry, 0}) grasps.insert(c.grasp);
  EXPECT_GE(grasps.size(), 2u);
  for (const auto& e : full.map.edges)
    if (e.kind != EdgeKind::mode_changing) EXPECT_EQ(full.map.component(e.s), full.map.component(e.e));
}

TEST(FullRoadmap, NoSamplesMeansHighwaysOnly) {
  Scenario s = canonical();
  s.params.n_samples = 0;
  const auto am = build_assignment_roadmap(s, 0);
  const auto mv = transfer_of(am, 0);
  const auto full = build_full_roadmap(s, 0, am, build_config_cache(s, 0), mv.used, mv.moves);
  EXPECT_EQ(full.map.spanner_vertex_count(), 0u);
  EXPECT_FALSE(full.map.highways.empty());
}

TEST(FullRoadmap, SharedConfigurationsReduceChecks) {
  const Scenario s = canonical();
  std::vector<MultiModalRoadmap> maps;
  std::vector<std::size_t> free_spanner;
  for (int r = 0; r < 2; ++r) {
    const auto am = build_assignment_roadmap(s, r);
    const auto cache = build_config_cache(s, r);
    const auto mv = transfer_of(am, 0);
    auto full = build_full_roadmap(s, r, am, cache, mv.used, mv.moves);
    // Carry(B) junctions are cached Free configurations or highway vertices;
    // everything else is an interior point of a subdivided edge or manipulation
    std::set<Config2> cached(cache.configs.begin(), cache.configs.end());
    std::set<int> on_highway;
    for (const auto& h : full.map.highways) on_highway.insert(h.vertices.begin(), h.vertices.end());
    std::vector<int> out_degree(full.map.vertices.size(), 0);
    for (const auto& e : full.map.edges) out_degree[e.s] += e.kind != EdgeKind::mode_changing;
    std::size_t junctions = 0, reused = 0;
    for (const auto& v : full.map.vertices) {
      if (v.mode.kind != ModeKind::Carry || v.is_milestone || on_highway.count(v.id)) continue;
      if (cached.count(v.config)) {
        ++reused;
        continue;
      }
      junctions += out_degree[v.id] != 0 && out_degree[v.id] != 2;
    }
    EXPECT_GT(reused, 0u);
    EXPECT_EQ(junctions, 0u);
    maps.push_back(std::move(full.map));
  }
  const auto pi = annotate_collisions(s, ptrs(maps));
  std::size_t conds0 = maps[0].vertices.size() + maps[0].edges.size();
  std::size_t conds1 = maps[1].vertices.size() + maps[1].edges.size();
  const std::size_t naive = conds0 * conds1 + (conds0 + conds1) * 2 * s.objects.size();
  EXPECT_LT(pi.exact_checks, naive);
}

TEST(Annotation, MatchesAllPairsOracleOnAssignmentRoadmaps) {
  const Scenario s = canonical();
  const auto maps = assignment_maps(s);
  for (bool mc : {true, false}) {
    AnnotationOptions opt;
    opt.mode_changing_only = mc;
    const auto pi = annotate_collisions(s, ptrs(maps), opt);
    const auto oracle = all_pairs_oracle(s, ptrs(maps), pi.index, mc);
    const std::set<std::pair<int, int>> got(pi.pairs.begin(), pi.pairs.end());
    EXPECT_EQ(got, oracle) << "mode_changing_only=" << mc;
    EXPECT_FALSE(got.empty());
  }
}

TEST(Annotation, MatchesAllPairsOracleOnSmallFullRoadmaps) {
  Scenario s = canonical();
  s.params.n_samples = 25;
  s.params.connection_k = 3;
  std::vector<MultiModalRoadmap> maps;
  for (int r = 0; r < 2; ++r) {
    const auto am = build_assignment_roadmap(s, r);
    const auto mv = transfer_of(am, r);
    maps.push_back(build_full_roadmap(s, r, am, build_config_cache(s, r), mv.used, mv.moves).map);
  }
  const auto pi = annotate_collisions(s, ptrs(maps));
  const auto oracle = all_pairs_oracle(s, ptrs(maps), pi.index, false);
  const std::set<std::pair<int, int>> got(pi.pairs.begin(), pi.pairs.end());
  EXPECT_EQ(got, oracle);
}

TEST(Annotation, ThreadCountDoesNotChangeResult) {
  const Scenario s = canonical();
  const auto maps = assignment_maps(s);
  AnnotationOptions one, three;
  three.threads = 3;
  const auto a = annotate_collisions(s, ptrs(maps), one);
  const auto b = annotate_collisions(s, ptrs(maps), three);
  EXPECT_EQ(a.pairs, b.pairs);
  EXPECT_EQ(a.neighbors, b.neighbors);
}

TEST(Annotation, DisjointRegionsHaveNoRobotPairs) {
  auto j = canonical_json();
  j["robots"][0]["reach"] = json::array({0.0, 0.0, 0.8, 1.0});
  j["robots"][1]["reach"] = json::array({1.2, 0.0, 2.0, 1.0});
  j["tasks"] = json::array({json::object({{"id", "hold_B"}, {"primitives", json::array({"GraspG(B)", "ReleaseG(B)"})}})});
  j["precedence"] = json::array();
  j["objects"][0]["goal"] = json::array({0.5, 0.5, 0.0});
  const Scenario s = scenario_from_json(j);
  const auto maps = assignment_maps(s);
  const auto pi = annotate_collisions(s, ptrs(maps));
  for (const auto& [a, b] : pi.pairs) {
    const auto ca = pi.index.decode(a), cb = pi.index.decode(b);
    EXPECT_TRUE(ca.type == Condition::Type::Object || cb.type == Condition::Type::Object);
  }
}

TEST(Annotation, VertexOnGoalFootprint) {
  const Scenario s = canonical();
  const auto maps = assignment_maps(s);
  const auto pi = annotate_collisions(s, ptrs(maps));
  const int B = s.object_index("B");
  // the Attach(B) end milestone sits on B's goal footprint's grasp point: B's
  // own footprint is excluded, but the other robot's such vertex is not
  bool found = false;
  for (int r = 0; r < 2; ++r)
    for (const auto& v : maps[r].vertices)
      if (s.objects[B].footprint.transformed(s.objects[B].goal_pose).contains(v.config) ||
          geom::capsule_polygon_overlap({v.config, v.config, s.robots[r].radius},
                                        s.objects[B].footprint.transformed(s.objects[B].goal_pose)))
        if (roadmap::carried_object(v) != B) {
          EXPECT_TRUE(pi.contains(pi.index.vertex(r, v.id), pi.index.object(B, Pole::Goal)));
          found = true;
        }
  EXPECT_TRUE(found);
}

TEST(Annotation, SampledMembershipMatchesDirectCheck) {
  const Scenario s = canonical();
  const auto maps = assignment_maps(s);
  const auto p = ptrs(maps);
  const auto pi = annotate_collisions(s, p);
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> c0(0, pi.index.object_base() - 1), any(0, pi.index.size() - 1);
  int positives = 0;
  for (int i = 0; i < 20000; ++i) {
    const int a = c0(rng), b = any(rng);
    const auto ca = pi.index.decode(a), cb = pi.index.decode(b);
    if (cb.type != Condition::Type::Object && ca.robot == cb.robot) {
      EXPECT_FALSE(pi.contains(a, b));
      continue;
    }
    const int excl = cb.type == Condition::Type::Object ? cb.index : -1;
    const bool direct = geom::areas_overlap(condition_area(s, p, pi.index, a, excl), condition_area(s, p, pi.index, b));
    EXPECT_EQ(pi.contains(a, b), direct);
    EXPECT_EQ(pi.contains(a, b), pi.contains(b, a));
    positives += direct;
  }
  EXPECT_GT(positives, 0);
}
