#pragma once

// PBS-AT paths as time-stamped continuous paths.

#include "mmtamp/pbsat/pbs_at.hpp"
#include "mmtamp/solution.hpp"

namespace mmtamp::pbsat {

inline std::optional<CarriedRef> carried_ref(const Scenario& s, int object, int grasp) {
  if (object < 0) return std::nullopt;
  return CarriedRef{object, s.objects.at(object).grasp_offsets.at(grasp)};
}

inline TimeStampedPath timestamped(const Scenario& s, const roadmap::MultiModalRoadmap& map,
                                   const Path& p) {
  TimeStampedPath out;
  for (std::size_t i = 0; i < p.steps.size(); ++i) {
    const auto& st = p.steps[i];
    const auto& v = map.vertices[st.vertex];
    if (i > 0) {
      const auto& e = map.edges[p.edges[i - 1]];
      out.carried.push_back(carried_ref(s, roadmap::carried_object(e), e.grasp));
    }
    out.waypoints.push_back({st.arrive, v.config});
    if (st.depart > st.arrive) {
      out.carried.push_back(carried_ref(s, roadmap::carried_object(v), v.grasp));
      out.waypoints.push_back({st.depart, v.config});
    }
  }
  return out;
}

inline Solution to_solution(const PbsProblem& pb, const PbsResult& res) {
  const auto& s = *pb.scenario;
  Solution sol;
  sol.makespan = res.makespan;
  for (std::size_t i = 0; i < pb.tasks.size(); ++i) {
    const auto& t = pb.tasks[i];
    SolutionSubplan g;
    g.robot = t.robot;
    g.index = t.index;
    g.kind = std::string(assign::to_string(t.kind));
    g.tau = t.tau;
    g.mode = t.mode;
    g.task = t.task;
    g.k = t.k;
    g.path = timestamped(s, *pb.maps[t.robot], res.paths.at(i));
    sol.subplans.push_back(std::move(g));
  }
  return sol;
}

}  // namespace mmtamp::pbsat
