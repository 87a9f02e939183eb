#include <gtest/gtest.h>

#include <unistd.h>

#include <filesystem>

#include "support/generators.hpp"

using namespace mmtamp;
using testsupport::canonical;

namespace {

json canonical_json() { return read_json_file(testsupport::source_path("scenarios/canonical.json")); }

std::string temp_file(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("mmtamp_" + std::to_string(::getpid()) + "_" + name)).string();
}

}  // namespace

TEST(Scenario, LoadsCanonical) {
  const Scenario s = canonical();
  EXPECT_EQ(s.robots.size(), 2u);
  EXPECT_EQ(s.objects.size(), 2u);
  EXPECT_EQ(s.tasks.size(), 3u);
  EXPECT_EQ(s.seed, 42u);
  EXPECT_EQ(s.params.n_samples, 150);
}

TEST(Scenario, UnknownObjectIsRejected) {
  auto j = canonical_json();
  j["tasks"][0]["primitives"][0] = "Detach(Z)";
  EXPECT_THROW(scenario_from_json(j), ValidationError);
}

TEST(Scenario, CyclicPrecedenceIsRejected) {
  auto j = canonical_json();
  j["precedence"] = json::array({json::array({json::array({"place_B", 2, "end"}), json::array({"place_R", 0, "start"})}),
                                 json::array({json::array({"place_R", 2, "end"}), json::array({"place_B", 0, "start"})})});
  EXPECT_THROW(scenario_from_json(j), CycleError);
}

TEST(Scenario, MissingFormatIsParseError) {
  auto j = canonical_json();
  j.erase("format");
  EXPECT_THROW(scenario_from_json(j), ParseError);
  EXPECT_THROW(scenario_from_json(json::parse("[1, 2]")), ParseError);
}

TEST(Scenario, MalformedFileIsParseError) {
  const auto path = temp_file("bad.json");
  write_text_file(path, "{ \"format\": 1, ");
  EXPECT_THROW(load_scenario(path), ParseError);
  std::filesystem::remove(path);
}

TEST(Scenario, InvariantViolationsNamed) {
  auto j = canonical_json();
  j["robots"][1]["id"] = "left";
  try {
    scenario_from_json(j);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("duplicate robot id"), std::string::npos);
  }
  j = canonical_json();
  j["robots"][0]["v_max"] = 0.0;
  EXPECT_THROW(scenario_from_json(j), ValidationError);
  j = canonical_json();
  j["tasks"][0]["primitives"] = json::array({"Detach(B)", "Transfer(R)", "Attach(B)"});
  EXPECT_THROW(scenario_from_json(j), ValidationError);
  j = canonical_json();
  j["robots"][0]["start"] = json::array({0.01, 0.5});  // disc crosses the boundary
  EXPECT_THROW(scenario_from_json(j), ValidationError);
}

TEST(Scenario, RoundTrip) {
  const Scenario s = canonical();
  const auto path = temp_file("rt.json");
  save_scenario(s, path);
  const Scenario t = load_scenario(path);
  std::filesystem::remove(path);
  EXPECT_EQ(scenario_to_json(s), scenario_to_json(t));
  ASSERT_EQ(s.robots.size(), t.robots.size());
  for (std::size_t i = 0; i < s.robots.size(); ++i) {
    EXPECT_EQ(s.robots[i].id, t.robots[i].id);
    EXPECT_EQ(s.robots[i].start_config, t.robots[i].start_config);
    EXPECT_EQ(s.robots[i].reach, t.robots[i].reach);
    EXPECT_EQ(s.robots[i].capabilities, t.robots[i].capabilities);
  }
  for (std::size_t i = 0; i < s.objects.size(); ++i) {
    EXPECT_EQ(s.objects[i].footprint, t.objects[i].footprint);
    EXPECT_EQ(s.objects[i].grasp_offsets, t.objects[i].grasp_offsets);
    EXPECT_EQ(s.objects[i].goal_pose, t.objects[i].goal_pose);
  }
  EXPECT_EQ(s.precedence, t.precedence);
  EXPECT_EQ(s.params, t.params);
  EXPECT_EQ(s.seed, t.seed);
}

TEST(ModeGraph, TopologyPerObject) {
  const auto g = make_mode_graph(2, all_capabilities());
  for (int o = 0; o < 2; ++o) {
    EXPECT_TRUE(g.has({PrimitiveKind::Detach, o}));
    EXPECT_TRUE(g.has({PrimitiveKind::Transfer, o}));
    EXPECT_EQ(start_mode({PrimitiveKind::Detach, o}), (Mode{ModeKind::Free, -1}));
    EXPECT_EQ(end_mode({PrimitiveKind::Detach, o}), (Mode{ModeKind::Carry, o}));
    EXPECT_EQ(start_mode({PrimitiveKind::Attach, o}), (Mode{ModeKind::Carry, o}));
    EXPECT_EQ(end_mode({PrimitiveKind::Attach, o}), (Mode{ModeKind::Free, -1}));
    EXPECT_EQ(end_mode({PrimitiveKind::GraspG, o}), (Mode{ModeKind::HoldG, o}));
    EXPECT_EQ(end_mode({PrimitiveKind::ReleaseG, o}), (Mode{ModeKind::Free, -1}));
  }
  EXPECT_TRUE(is_mode_changing(PrimitiveKind::GraspG));
  EXPECT_FALSE(is_mode_changing(PrimitiveKind::Transfer));
  EXPECT_FALSE(is_mode_changing(PrimitiveKind::Transit));
  const auto limited = make_mode_graph(1, {PrimitiveKind::Transit, PrimitiveKind::GraspG, PrimitiveKind::ReleaseG});
  EXPECT_FALSE(limited.has({PrimitiveKind::Detach, 0}));
  EXPECT_TRUE(limited.has({PrimitiveKind::GraspG, 0}));
}

TEST(Precedence, ChainOfThreeAddsTwo) {
  Scenario s = canonical();
  s.precedence.clear();
  s.tasks.resize(1);
  EXPECT_EQ(derive_implicit_precedence(s).size(), 2u);
}

TEST(Precedence, CountsWithoutExplicit) {
  Scenario s = canonical();
  s.precedence.clear();
  EXPECT_EQ(derive_implicit_precedence(s).size(), 5u);  // 2 + 2 + 1
}

TEST(Precedence, CanonicalClosure) {
  const Scenario s = canonical();
  const auto all = derive_implicit_precedence(s);
  const int pb = s.task_index("place_B"), hb = s.task_index("hold_B"), pr = s.task_index("place_R");
  EXPECT_TRUE(precedence_implies(s, all, {pb, 2, Endpoint::End}, {hb, 0, Endpoint::Start}));
  EXPECT_TRUE(precedence_implies(s, all, {hb, 0, Endpoint::End}, {pr, 2, Endpoint::Start}));
  EXPECT_TRUE(precedence_implies(s, all, {pr, 2, Endpoint::End}, {hb, 1, Endpoint::Start}));
  EXPECT_FALSE(precedence_implies(s, all, {hb, 1, Endpoint::End}, {pr, 2, Endpoint::Start}));
}

TEST(Precedence, Idempotent) {
  Scenario s = canonical();
  const auto once = derive_implicit_precedence(s);
  s.precedence = once;
  EXPECT_EQ(derive_implicit_precedence(s), once);
}

TEST(Precedence, TotalOrderWithinTask) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const Scenario s = testsupport::random_scenario(seed, {});
    const auto all = derive_implicit_precedence(s);
    for (int p = 0; p < static_cast<int>(s.tasks.size()); ++p) {
      const int K = static_cast<int>(s.tasks[p].primitives.size());
      for (int a = 0; a < K; ++a)
        for (int b = a + 1; b < K; ++b) {
          EXPECT_TRUE(precedence_implies(s, all, {p, a, Endpoint::End}, {p, b, Endpoint::Start}));
          EXPECT_FALSE(precedence_implies(s, all, {p, b, Endpoint::Start}, {p, a, Endpoint::End}));
        }
    }
  }
}

TEST(TimeStampedPath, VelocityCheck) {
  TimeStampedPath p;
  p.waypoints = {{0.0, {0.0, 0.0}}, {1.0, {0.5, 0.0}}, {1.5, {1.0, 0.0}}};
  p.carried.assign(2, std::nullopt);
  EXPECT_EQ(p.velocity_violation(0.99), std::optional<std::size_t>(1));
  EXPECT_FALSE(p.velocity_violation(1.0).has_value());
  EXPECT_EQ(p.at(1.25).x, 0.75);
}
