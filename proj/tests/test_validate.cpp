#include <gtest/gtest.h>

#include "mmtamp/pipeline.hpp"
#include "mmtamp/validate/oracles.hpp"
#include "support/generators.hpp"

using namespace mmtamp;
using namespace mmtamp::validate;

namespace {

const PipelineRun& canonical_run() {
  static const PipelineRun run = run_pipeline(testsupport::canonical(), {});
  return run;
}

Scenario no_tasks() {
  Scenario s = testsupport::canonical();
  s.tasks.clear();
  s.precedence.clear();
  return s;
}

SolutionSubplan transit(int robot, std::vector<Waypoint> w) {
  SolutionSubplan g;
  g.robot = robot;
  g.index = 0;
  g.kind = "long";
  g.tau = {PrimitiveKind::Transit, -1};
  g.mode = {ModeKind::Free, -1};
  g.path.waypoints = std::move(w);
  g.path.carried.assign(g.path.waypoints.size(), std::nullopt);
  return g;
}

// both robots visit (1.0, 0.85) and come back; the right one starts `delay` later
Solution meet(const Scenario& s, double delay) {
  const Config2 mid{1.0, 0.85};
  const Config2 l = s.robots[0].start_config, r = s.robots[1].start_config;
  Solution sol;
  sol.subplans.push_back(transit(0, {{0.0, l}, {1.6, mid}, {3.2, l}}));
  sol.subplans.push_back(transit(1, {{0.0, r}, {delay, r}, {delay + 1.6, mid}, {delay + 3.2, r}}));
  sol.makespan = delay + 3.2;
  return sol;
}

}  // namespace

TEST(Validate, PipelineSolutionIsClean) {
  const auto& run = canonical_run();
  ASSERT_TRUE(run.plan && run.plan->result.success);
  const auto rep = validate_plan(testsupport::canonical(), run.plan->solution);
  EXPECT_TRUE(rep.ok) << format_report(rep);
  EXPECT_TRUE(rep.violations.empty());
}

TEST(Validate, SolutionJsonRoundTripStillValidates) {
  const auto& run = canonical_run();
  ASSERT_TRUE(run.plan);
  const Scenario s = testsupport::canonical();
  const auto j = solution_to_json(s, run.plan->solution);
  const auto back = solution_from_json(s, j);
  EXPECT_EQ(solution_to_json(s, back), j);
  EXPECT_TRUE(validate_plan(s, back).ok);
}

TEST(Validate, DoubleSpeedIsVelocityViolation) {
  const auto& run = canonical_run();
  ASSERT_TRUE(run.plan);
  Solution fast = run.plan->solution;
  for (auto& g : fast.subplans)
    for (auto& w : g.path.waypoints) w.t *= 0.5;
  const auto rep = validate_plan(testsupport::canonical(), fast);
  EXPECT_FALSE(rep.ok);
  EXPECT_GT(rep.count(ViolationKind::velocity), 0u);
}

TEST(Validate, MissingAttachIsIncomplete) {
  const auto& run = canonical_run();
  ASSERT_TRUE(run.plan);
  const Scenario s = testsupport::canonical();
  Solution sol = run.plan->solution;
  const int pr = s.task_index("place_R");
  std::erase_if(sol.subplans, [&](const SolutionSubplan& g) { return g.task == pr && g.k == 2; });
  const auto rep = validate_plan(s, sol);
  EXPECT_FALSE(rep.ok);
  EXPECT_GT(rep.count(ViolationKind::task_completion), 0u);
}

TEST(Validate, HeadOnMeetingCollides) {
  const Scenario s = no_tasks();
  const auto rep = validate_plan(s, meet(s, 0.0));
  EXPECT_FALSE(rep.ok);
  EXPECT_EQ(rep.count(ViolationKind::pairwise_collision), 1u);
  EXPECT_EQ(rep.count(ViolationKind::velocity), 0u);
  EXPECT_EQ(rep.count(ViolationKind::chain), 0u);
}

TEST(Validate, StaggeredMeetingIsClean) {
  const Scenario s = no_tasks();
  const auto rep = validate_plan(s, meet(s, 4.0));
  EXPECT_TRUE(rep.ok) << format_report(rep);
}

TEST(Validate, ObstacleCrossingIsStatic) {
  Scenario s = no_tasks();
  s.workspace.static_obstacles.push_back(geom::ConvexPolygon::box(0.6, 0.85, 0.05, 0.05));
  const auto rep = validate_plan(s, meet(s, 4.0));
  EXPECT_EQ(rep.count(ViolationKind::static_collision), 1u);
}

TEST(Validate, BrokenChainReported) {
  const Scenario s = no_tasks();
  Solution sol = meet(s, 4.0);
  sol.subplans[1].path.waypoints.back().c = {1.7, 0.85};
  const auto rep = validate_plan(s, sol);
  EXPECT_GT(rep.count(ViolationKind::chain), 0u);
}

TEST(Validate, ReportJsonListsViolations) {
  const Scenario s = no_tasks();
  const auto rep = validate_plan(s, meet(s, 0.0));
  const auto j = report_to_json(rep);
  EXPECT_EQ(j["ok"], false);
  ASSERT_EQ(j["violations"].size(), rep.violations.size());
  EXPECT_EQ(j["violations"][0]["kind"], "pairwise_collision");
}

TEST(Oracles, TooLargeInstanceIsSizeLimit) {
  const Scenario s = testsupport::canonical();
  const auto maps = stage_roadmaps(s);
  const auto pi = stage_annotate(s, maps, 1);
  OracleLimits lim;
  lim.max_tasks = 2;
  EXPECT_THROW(brute_force_assignment_oracle(s, pointers(maps), pi, lim), SizeLimit);
}

TEST(Oracles, TimeExpandedSearchOnALine) {
  roadmap::MultiModalRoadmap m;
  for (int i = 0; i < 3; ++i) {
    roadmap::RoadmapVertex v;
    v.id = i;
    v.config = {static_cast<double>(i), 0.0};
    m.vertices.push_back(v);
  }
  for (int i = 0; i < 2; ++i) {
    roadmap::RoadmapEdge e;
    e.id = i;
    e.s = i;
    e.e = i + 1;
    e.w = 0.5;
    m.edges.push_back(e);
  }
  pbsat::ReservationTable rt(3, 2);
  rt.finalize();
  EXPECT_NEAR(*time_expanded_astar_oracle(m, nullptr, 0, 2, rt, 0.0, 0.0, 1e-3, 10.0), 1.0, 1e-9);
  EXPECT_NEAR(*time_expanded_astar_oracle(m, nullptr, 0, 2, rt, 0.0, 2.5, 1e-3, 10.0), 2.5, 1e-9);
  EXPECT_FALSE(time_expanded_astar_oracle(m, nullptr, 2, 0, rt, 0.0, 0.0, 1e-3, 10.0));
  pbsat::ReservationTable blocked(3, 2);
  blocked.reserve_vertex(1, 0.0, 2.0);
  blocked.finalize();
  EXPECT_NEAR(*time_expanded_astar_oracle(m, nullptr, 0, 2, blocked, 0.0, 0.0, 1e-3, 10.0), 2.5, 1e-9);
}
