#pragma once

// Time-stamped plan: one continuous path per subplan.

#include "mmtamp/scenario_io.hpp"

namespace mmtamp {

struct SolutionSubplan {
  int robot = -1;
  int index = -1;
  std::string kind;  // mode, mode_changing, long
  Primitive tau;
  Mode mode;
  int task = -1;  // -1 unless the subplan realizes a task primitive
  int k = -1;
  TimeStampedPath path;

  friend bool operator==(const SolutionSubplan&, const SolutionSubplan&) = default;
};

struct Solution {
  std::vector<SolutionSubplan> subplans;
  double makespan = 0.0;
  json stats = json::object();

  /// Subplans of robot r in sequence order.
  std::vector<const SolutionSubplan*> of_robot(int r) const {
    std::vector<const SolutionSubplan*> out;
    for (const auto& g : subplans)
      if (g.robot == r) out.push_back(&g);
    std::sort(out.begin(), out.end(),
              [](const SolutionSubplan* a, const SolutionSubplan* b) { return a->index < b->index; });
    return out;
  }
};

namespace io {

inline json mode_string(const Scenario& s, const Mode& m) {
  if (m.kind == ModeKind::Free) return "Free";
  return std::string(to_string(m.kind)) + "(" + s.objects.at(m.object).id + ")";
}

inline Mode parse_mode(const Scenario& s, const std::string& text) {
  const auto open = text.find('(');
  const auto kind = mode_kind_from_string(text.substr(0, open));
  if (!kind) throw ParseError("unknown mode '" + text + "'");
  Mode m{*kind, -1};
  if (open != std::string::npos) {
    const auto close = text.find(')', open);
    if (close == std::string::npos) throw ParseError("unterminated mode '" + text + "'");
    m.object = s.object_index(text.substr(open + 1, close - open - 1));
    if (m.object < 0) throw ValidationError("mode references unknown object in '" + text + "'");
  }
  return m;
}

/// Primitive label of a subplan; null for waits in a mode without a
/// preserving primitive (HoldG).
inline json subplan_primitive(const Scenario& s, const Mode& mode, const Primitive& tau) {
  if (mode.kind == ModeKind::HoldG && !tau.mode_changing()) return nullptr;
  return primitive_to_string(s, tau);
}

}  // namespace io

inline json solution_to_json(const Scenario& s, const Solution& sol) {
  json gs = json::array();
  for (const auto& g : sol.subplans) {
    json wp = json::array();
    for (const auto& w : g.path.waypoints) wp.push_back({w.t, w.c.x, w.c.y});
    json carried = json::array();
    for (const auto& c : g.path.carried) {
      if (!c)
        carried.push_back(nullptr);
      else
        carried.push_back({{"object", s.objects.at(c->object).id}, {"grasp", io::to_json(c->grasp)}});
    }
    gs.push_back({{"robot", s.robots.at(g.robot).id},
                  {"index", g.index},
                  {"kind", g.kind},
                  {"primitive", io::subplan_primitive(s, g.mode, g.tau)},
                  {"mode", io::mode_string(s, g.mode)},
                  {"task", g.task >= 0 ? json(s.tasks.at(g.task).id) : json(nullptr)},
                  {"k", g.k},
                  {"path", wp},
                  {"carried", carried}});
  }
  return {{"format", 1}, {"makespan", sol.makespan}, {"subplans", gs}, {"stats", sol.stats}};
}

inline Solution solution_from_json(const Scenario& s, const json& j) {
  Solution sol;
  try {
    if (j.at("format").get<int>() != 1) throw ParseError("unsupported solution format");
    sol.makespan = j.at("makespan").get<double>();
    sol.stats = j.value("stats", json::object());
    for (const auto& g : j.at("subplans")) {
      SolutionSubplan x;
      x.robot = s.robot_index(g.at("robot").get<std::string>());
      if (x.robot < 0) throw ValidationError("solution names an unknown robot");
      x.index = g.at("index").get<int>();
      x.kind = g.at("kind").get<std::string>();
      if (!g.at("primitive").is_null()) x.tau = io::primitive_from(s, g.at("primitive").get<std::string>());
      x.mode = io::parse_mode(s, g.at("mode").get<std::string>());
      if (!g.at("task").is_null()) {
        x.task = s.task_index(g.at("task").get<std::string>());
        if (x.task < 0) throw ValidationError("solution names an unknown task");
      }
      x.k = g.at("k").get<int>();
      for (const auto& w : g.at("path"))
        x.path.waypoints.push_back({w.at(0).get<double>(), {w.at(1).get<double>(), w.at(2).get<double>()}});
      for (const auto& c : g.at("carried")) {
        if (c.is_null()) {
          x.path.carried.push_back(std::nullopt);
        } else {
          const int o = s.object_index(c.at("object").get<std::string>());
          if (o < 0) throw ValidationError("solution carries an unknown object");
          x.path.carried.push_back(CarriedRef{o, io::pose_from(c.at("grasp"))});
        }
      }
      if (x.path.waypoints.empty()) throw ValidationError("solution subplan has an empty path");
      if (x.path.carried.size() + 1 != x.path.waypoints.size())
        throw ValidationError("solution carried list does not match its path");
      sol.subplans.push_back(std::move(x));
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed solution: ") + e.what());
  }
  return sol;
}

}  // namespace mmtamp
