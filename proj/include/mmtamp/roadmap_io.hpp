#pragma once

// Roadmap and Π serialization.

#include "mmtamp/annotate.hpp"
#include "mmtamp/scenario_io.hpp"

namespace mmtamp {

namespace io {

inline json mode_to_json(const Scenario& s, const Mode& m) {
  if (m.kind == ModeKind::Free) return "Free";
  return std::string(to_string(m.kind)) + "(" + s.objects.at(m.object).id + ")";
}

inline Mode mode_from(const Scenario& s, const std::string& text) {
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
  if (!m.valid()) throw ParseError("invalid mode '" + text + "'");
  return m;
}

}  // namespace io

inline json roadmap_to_json(const Scenario& s, const roadmap::MultiModalRoadmap& m) {
  json vs = json::array();
  for (const auto& v : m.vertices)
    vs.push_back({v.config.x, v.config.y, io::mode_to_json(s, v.mode), v.grasp, v.is_milestone});
  json es = json::array();
  for (const auto& e : m.edges)
    es.push_back({e.s, e.e, e.w, io::primitive_to_string(s, e.tau), e.grasp,
                  std::string(roadmap::to_string(e.kind)), e.manipulation});
  json ms = json::array();
  for (const auto& x : m.manipulations)
    ms.push_back({{"primitive", io::primitive_to_string(s, x.tau)},
                  {"grasp", x.grasp},
                  {"start", x.start_vertex},
                  {"end", x.end_vertex},
                  {"edges", x.edges},
                  {"duration", x.duration}});
  json hs = json::array();
  for (const auto& h : m.highways)
    hs.push_back({{"from", h.from},
                  {"to", h.to},
                  {"vertices", h.vertices},
                  {"forward", h.forward},
                  {"backward", h.backward},
                  {"corners", h.corners},
                  {"duration", h.duration}});
  json inf = json::array();
  for (const auto& p : m.infeasible) inf.push_back(io::primitive_to_string(s, p));
  return {{"robot", s.robots.at(m.robot).id},
          {"start", m.start_vertex},
          {"goal", m.goal_vertex},
          {"vertices", vs},
          {"edges", es},
          {"manipulations", ms},
          {"highways", hs},
          {"infeasible", inf}};
}

inline roadmap::MultiModalRoadmap roadmap_from_json(const Scenario& s, const json& j) {
  roadmap::MultiModalRoadmap m;
  try {
    m.robot = s.robot_index(j.at("robot").get<std::string>());
    if (m.robot < 0) throw ValidationError("roadmap for unknown robot");
    m.start_vertex = j.at("start").get<int>();
    m.goal_vertex = j.at("goal").get<int>();
    for (const auto& v : j.at("vertices")) {
      roadmap::RoadmapVertex x;
      x.id = static_cast<int>(m.vertices.size());
      x.config = {v.at(0).get<double>(), v.at(1).get<double>()};
      x.mode = io::mode_from(s, v.at(2).get<std::string>());
      x.grasp = v.at(3).get<int>();
      x.is_milestone = v.at(4).get<bool>();
      m.vertices.push_back(x);
    }
    for (const auto& e : j.at("edges")) {
      roadmap::RoadmapEdge x;
      x.id = static_cast<int>(m.edges.size());
      x.s = e.at(0).get<int>();
      x.e = e.at(1).get<int>();
      x.w = e.at(2).get<double>();
      x.tau = io::primitive_from(s, e.at(3).get<std::string>());
      x.grasp = e.at(4).get<int>();
      const auto kind = roadmap::edge_kind_from_string(e.at(5).get<std::string>());
      if (!kind) throw ParseError("unknown edge kind");
      x.kind = *kind;
      x.manipulation = e.at(6).get<int>();
      m.edges.push_back(x);
    }
    for (const auto& x : j.at("manipulations")) {
      roadmap::Manipulation y;
      y.id = static_cast<int>(m.manipulations.size());
      y.tau = io::primitive_from(s, x.at("primitive").get<std::string>());
      y.grasp = x.at("grasp").get<int>();
      y.start_vertex = x.at("start").get<int>();
      y.end_vertex = x.at("end").get<int>();
      y.edges = x.at("edges").get<std::vector<int>>();
      y.duration = x.at("duration").get<double>();
      m.manipulations.push_back(std::move(y));
    }
    for (const auto& x : j.at("highways")) {
      roadmap::Highway h;
      h.from = x.at("from").get<int>();
      h.to = x.at("to").get<int>();
      h.vertices = x.at("vertices").get<std::vector<int>>();
      h.forward = x.at("forward").get<std::vector<int>>();
      h.backward = x.at("backward").get<std::vector<int>>();
      h.corners = x.at("corners").get<std::vector<int>>();
      h.duration = x.at("duration").get<double>();
      m.highways.push_back(std::move(h));
    }
    for (const auto& p : j.at("infeasible"))
      m.infeasible.push_back(io::primitive_from(s, p.get<std::string>()));
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed roadmap: ") + e.what());
  }
  const int nv = static_cast<int>(m.vertices.size());
  for (const auto& e : m.edges)
    if (e.s < 0 || e.s >= nv || e.e < 0 || e.e >= nv) throw ValidationError("edge endpoint out of range");
  return m;
}

/// Roadmaps plus Π. Condition ids follow ConditionIndex's layout.
inline json roadmaps_to_json(const Scenario& s, const std::vector<roadmap::MultiModalRoadmap>& maps,
                             const CollisionSet* pi) {
  json rs = json::array();
  for (const auto& m : maps) rs.push_back(roadmap_to_json(s, m));
  json out = {{"format", 1}, {"roadmaps", rs}};
  if (pi) {
    json flat = json::array();
    for (const auto& [a, b] : pi->pairs) {
      flat.push_back(a);
      flat.push_back(b);
    }
    out["collisions"] = flat;
    out["exact_checks"] = pi->exact_checks;
  }
  return out;
}

struct RoadmapBundle {
  std::vector<roadmap::MultiModalRoadmap> maps;
  std::optional<CollisionSet> pi;

  std::vector<const roadmap::MultiModalRoadmap*> pointers() const {
    std::vector<const roadmap::MultiModalRoadmap*> p;
    for (const auto& m : maps) p.push_back(&m);
    return p;
  }
};

inline RoadmapBundle roadmaps_from_json(const Scenario& s, const json& j) {
  RoadmapBundle b;
  try {
    for (const auto& r : j.at("roadmaps")) b.maps.push_back(roadmap_from_json(s, r));
    if (j.contains("collisions")) {
      CollisionSet pi;
      pi.index = ConditionIndex(b.pointers(), static_cast<int>(s.objects.size()));
      const auto& flat = j.at("collisions");
      if (flat.size() % 2) throw ParseError("collision list has odd length");
      for (std::size_t i = 0; i < flat.size(); i += 2) {
        const int a = flat[i].get<int>(), c = flat[i + 1].get<int>();
        if (a < 0 || c < 0 || a >= pi.index.size() || c >= pi.index.size())
          throw ValidationError("collision references unknown condition");
        pi.pairs.emplace_back(std::min(a, c), std::max(a, c));
      }
      pi.exact_checks = j.value("exact_checks", std::size_t{0});
      pi.finalize();
      b.pi = std::move(pi);
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed roadmap file: ") + e.what());
  }
  return b;
}

}  // namespace mmtamp
