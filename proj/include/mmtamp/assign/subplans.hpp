#pragma once

// Subplan sequences per robot and the end-time precedence between them.

#include "mmtamp/assign/solver.hpp"
#include "mmtamp/solution.hpp"

namespace mmtamp::assign {

enum class SubplanKind { Mode, ModeChanging, Long };

inline std::string_view to_string(SubplanKind k) {
  switch (k) {
    case SubplanKind::Mode: return "mode";
    case SubplanKind::ModeChanging: return "mode_changing";
    case SubplanKind::Long: return "long";
  }
  return "?";
}

inline std::optional<SubplanKind> subplan_kind_from_string(std::string_view s) {
  for (auto k : {SubplanKind::Mode, SubplanKind::ModeChanging, SubplanKind::Long})
    if (to_string(k) == s) return k;
  return std::nullopt;
}

struct Subplan {
  int id = -1;
  int robot = -1;
  int index = -1;  // position in the robot's sequence
  SubplanKind kind = SubplanKind::Mode;
  Primitive tau;   // Transit/Transfer/HoldG for long and mode subplans realizing a primitive
  Mode mode;       // mode the robot is in (start mode for mode-changing)
  int task = -1;   // -1 for link transits and plain mode subplans
  int k = -1;
  int start_vertex = -1;  // assignment-roadmap vertex
  int goal_vertex = -1;
  int manipulation = -1;  // assignment-roadmap manipulation for mode-changing subplans
  double planned_end = 0.0;

  friend bool operator==(const Subplan&, const Subplan&) = default;
};

/// end(a) <= end(b)
struct SubplanOrder {
  int a = -1, b = -1;

  friend bool operator==(const SubplanOrder&, const SubplanOrder&) = default;
  friend auto operator<=>(const SubplanOrder&, const SubplanOrder&) = default;
};

struct SubplanSet {
  std::vector<Subplan> subplans;
  std::vector<std::vector<int>> by_robot;
  std::vector<SubplanOrder> precedence;  // mapped from the task precedence
  std::map<TimePoint, int> of_timepoint;

  int size() const { return static_cast<int>(subplans.size()); }
};

inline SubplanSet extract_subplans(const Scenario& s,
                                   const std::vector<const roadmap::MultiModalRoadmap*>& maps,
                                   const AssignmentProblem& ap, const Assignment& a) {
  SubplanSet out;
  const int N = static_cast<int>(s.robots.size());
  out.by_robot.resize(N);
  const auto& m = ap.model;
  auto tT = [&](int p, int k, bool end) { return a.x.at(m.tT[p][k][end ? 1 : 0]); };
  for (int r = 0; r < N; ++r) {
    const auto& map = *maps[r];
    const auto& pr = ap.plan_roadmaps[r];
    auto& seq = out.by_robot[r];
    auto push = [&](Subplan g) {
      g.id = static_cast<int>(out.subplans.size());
      g.robot = r;
      g.index = static_cast<int>(seq.size());
      seq.push_back(g.id);
      out.subplans.push_back(g);
      return g.id;
    };
    auto mode_at = [&](int v, Mode md, double end) {
      Subplan g;
      g.kind = SubplanKind::Mode;
      g.mode = md;
      g.tau = preserving_primitive(md).value_or(Primitive{});
      g.start_vertex = g.goal_vertex = v;
      g.planned_end = end;
      return push(g);
    };
    auto transit = [&](int from, int to, double end) {
      Subplan g;
      g.kind = SubplanKind::Long;
      g.tau = {PrimitiveKind::Transit, -1};
      g.mode = {ModeKind::Free, -1};
      g.start_vertex = from;
      g.goal_vertex = to;
      g.planned_end = end;
      return push(g);
    };
    int cur = map.start_vertex;
    for (const auto& it : a.routes[r]) {
      const auto& c = ap.paths[r][it.task][it.path];
      const int p = it.task;
      const auto& prims = s.tasks[p].primitives;
      const int K = static_cast<int>(prims.size());
      const int root = pr.vertices[c.root].vertex;
      transit(cur, root, tT(p, 0, false));
      int last_kind_mode = -1;  // id of the last emitted subplan if it is a mode subplan
      int v = root;
      for (int k = 0; k < K; ++k) {
        const auto& tau = prims[k];
        if (tau.mode_changing()) {
          const auto& mp = map.manipulations.at(c.manipulation[k]);
          const int before = last_kind_mode >= 0 ? last_kind_mode
                                                 : mode_at(mp.start_vertex, start_mode(tau), tT(p, k, false));
          out.of_timepoint[{p, k, Endpoint::Start}] = before;
          Subplan g;
          g.kind = SubplanKind::ModeChanging;
          g.tau = tau;
          g.mode = start_mode(tau);
          g.task = p;
          g.k = k;
          g.start_vertex = mp.start_vertex;
          g.goal_vertex = mp.end_vertex;
          g.manipulation = mp.id;
          g.planned_end = tT(p, k, true);
          out.of_timepoint[{p, k, Endpoint::End}] = push(g);
          v = mp.end_vertex;
          last_kind_mode = -1;
        } else {
          const int next_start = map.manipulations.at(c.manipulation[k + 1]).start_vertex;
          const int prev = out.by_robot[r].back();
          out.of_timepoint[{p, k, Endpoint::Start}] = prev;
          if (next_start == v) {
            // realized by waiting in place
            const int id = mode_at(v, start_mode(tau), tT(p, k, true));
            out.subplans[id].task = p;
            out.subplans[id].k = k;
            out.of_timepoint[{p, k, Endpoint::End}] = id;
            last_kind_mode = id;
          } else {
            out.of_timepoint[{p, k, Endpoint::Start}] = mode_at(v, start_mode(tau), tT(p, k, false));
            Subplan g;
            g.kind = SubplanKind::Long;
            g.tau = tau;
            g.mode = start_mode(tau);
            g.task = p;
            g.k = k;
            g.start_vertex = v;
            g.goal_vertex = next_start;
            g.planned_end = tT(p, k, true);
            out.of_timepoint[{p, k, Endpoint::End}] = push(g);
            last_kind_mode = -1;
          }
          v = next_start;
        }
      }
      mode_at(v, {ModeKind::Free, -1}, tT(p, K - 1, true));
      cur = v;
    }
    transit(cur, map.goal_vertex, a.x.at(m.tn[r][PlanRoadmap::kGoal]));
  }
  std::set<SubplanOrder> pre;
  for (const auto& c : m.precedence) {
    const int i = out.of_timepoint.at(c.a), j = out.of_timepoint.at(c.b);
    if (i != j) pre.insert({i, j});
  }
  out.precedence.assign(pre.begin(), pre.end());
  return out;
}

/// Long moves and used manipulations of one robot, for building its full roadmap.
inline std::vector<roadmap::LongMove> long_moves(const SubplanSet& g, int robot) {
  std::vector<roadmap::LongMove> out;
  for (int id : g.by_robot.at(robot)) {
    const auto& x = g.subplans[id];
    if (x.kind == SubplanKind::Long) out.push_back({x.start_vertex, x.goal_vertex});
  }
  return out;
}

inline std::vector<int> used_manipulations(const SubplanSet& g, int robot) {
  std::vector<int> out;
  for (int id : g.by_robot.at(robot)) {
    const auto& x = g.subplans[id];
    if (x.kind == SubplanKind::ModeChanging) out.push_back(x.manipulation);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// ---------------------------------------------------------------------------
// Serialization.

inline json assignment_to_json(const Scenario& s, const AssignmentProblem& ap, const Assignment& a) {
  json routes = json::array();
  for (std::size_t r = 0; r < a.routes.size(); ++r) {
    json items = json::array();
    for (const auto& it : a.routes[r])
      items.push_back({{"task", s.tasks[it.task].id},
                       {"path", it.path},
                       {"edges", ap.paths[r][it.task][it.path].edges}});
    routes.push_back({{"robot", s.robots[r].id}, {"tasks", items}});
  }
  json incs = json::array();
  for (const auto& i : a.stats.incumbents) incs.push_back({{"node", i.node}, {"makespan", i.makespan}});
  return {{"format", 1},
          {"makespan", a.makespan},
          {"optimal", a.optimal},
          {"nodes", a.stats.nodes},
          {"incumbents", incs},
          {"routes", routes},
          {"x", a.x}};
}

inline Assignment assignment_from_json(const Scenario& s, const AssignmentProblem& ap, const json& j) {
  Assignment a;
  try {
    a.makespan = j.at("makespan").get<double>();
    a.optimal = j.at("optimal").get<bool>();
    a.stats.nodes = j.value("nodes", std::int64_t{0});
    for (const auto& i : j.value("incumbents", json::array()))
      a.stats.incumbents.push_back({0.0, i.at("makespan").get<double>(), i.at("node").get<std::int64_t>()});
    a.routes.assign(s.robots.size(), {});
    for (const auto& r : j.at("routes")) {
      const int ri = s.robot_index(r.at("robot").get<std::string>());
      if (ri < 0) throw ValidationError("assignment names an unknown robot");
      for (const auto& it : r.at("tasks")) {
        const int p = s.task_index(it.at("task").get<std::string>());
        if (p < 0) throw ValidationError("assignment names an unknown task");
        const int c = it.at("path").get<int>();
        if (c < 0 || c >= static_cast<int>(ap.paths[ri][p].size()))
          throw ValidationError("assignment path index out of range");
        a.routes[ri].push_back({p, c});
      }
    }
    a.x = j.at("x").get<std::vector<double>>();
    if (a.x.size() != ap.model.vars.size()) throw ValidationError("assignment vector size mismatch");
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed assignment: ") + e.what());
  }
  return a;
}

inline json subplans_to_json(const Scenario& s, const SubplanSet& g) {
  json xs = json::array();
  for (const auto& x : g.subplans)
    xs.push_back({{"robot", s.robots[x.robot].id},
                  {"index", x.index},
                  {"kind", std::string(to_string(x.kind))},
                  {"primitive", io::subplan_primitive(s, x.mode, x.tau)},
                  {"mode", x.mode.kind == ModeKind::Free
                               ? std::string("Free")
                               : std::string(to_string(x.mode.kind)) + "(" + s.objects[x.mode.object].id + ")"},
                  {"task", x.task >= 0 ? json(s.tasks[x.task].id) : json(nullptr)},
                  {"k", x.k},
                  {"start", x.start_vertex},
                  {"goal", x.goal_vertex},
                  {"manipulation", x.manipulation},
                  {"planned_end", x.planned_end}});
  json pre = json::array();
  for (const auto& o : g.precedence) pre.push_back({o.a, o.b});
  return {{"format", 1}, {"subplans", xs}, {"precedence", pre}};
}

}  // namespace mmtamp::assign
