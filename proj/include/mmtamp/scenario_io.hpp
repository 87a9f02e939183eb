#pragma once

// JSON scenario files (format 1).

#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

#include "mmtamp/model.hpp"

namespace mmtamp {

using json = nlohmann::json;

namespace io {

inline json to_json(const Config2& c) { return json::array({c.x, c.y}); }
inline json to_json(const Pose2& p) { return json::array({p.x, p.y, p.theta}); }
inline json to_json(const geom::Rect& r) { return json::array({r.xmin, r.ymin, r.xmax, r.ymax}); }
inline json to_json(const geom::ConvexPolygon& p) {
  json a = json::array();
  for (const auto& q : p.pts) a.push_back(to_json(q));
  return a;
}

inline Config2 config_from(const json& j) {
  if (!j.is_array() || j.size() != 2) throw ParseError("expected [x, y]");
  return {j.at(0).get<double>(), j.at(1).get<double>()};
}
inline Pose2 pose_from(const json& j) {
  if (!j.is_array() || j.size() != 3) throw ParseError("expected [x, y, theta]");
  return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}
inline geom::Rect rect_from(const json& j) {
  if (!j.is_array() || j.size() != 4) throw ParseError("expected [xmin, ymin, xmax, ymax]");
  return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>(),
          j.at(3).get<double>()};
}
inline geom::ConvexPolygon polygon_from(const json& j) {
  if (!j.is_array()) throw ParseError("expected polygon vertex list");
  geom::ConvexPolygon p;
  for (const auto& q : j) p.pts.push_back(config_from(q));
  return p;
}

inline std::string primitive_to_string(const Scenario& s, const Primitive& p) {
  return describe(s, p);
}

/// Parses "Kind" or "Kind(object_id)".
inline Primitive primitive_from(const Scenario& s, const std::string& text) {
  const auto open = text.find('(');
  const std::string kind_name = text.substr(0, open);
  const auto kind = primitive_kind_from_string(kind_name);
  if (!kind) throw ParseError("unknown primitive kind '" + kind_name + "'");
  Primitive p{*kind, -1};
  if (open != std::string::npos) {
    const auto close = text.find(')', open);
    if (close == std::string::npos) throw ParseError("unterminated primitive '" + text + "'");
    const std::string obj = text.substr(open + 1, close - open - 1);
    p.object = s.object_index(obj);
    if (p.object < 0) throw ValidationError("primitive references unknown object '" + obj + "'");
  } else if (*kind != PrimitiveKind::Transit) {
    throw ParseError("primitive '" + text + "' needs an object");
  }
  return p;
}

inline json timepoint_to_json(const Scenario& s, const TimePoint& tp) {
  return json::array(
      {s.tasks.at(tp.task).id, tp.k, tp.endpoint == Endpoint::Start ? "start" : "end"});
}

inline TimePoint timepoint_from(const Scenario& s, const json& j) {
  if (!j.is_array() || j.size() != 3) throw ParseError("expected [task_id, k, start|end]");
  const auto task_id = j.at(0).get<std::string>();
  TimePoint tp;
  tp.task = s.task_index(task_id);
  if (tp.task < 0) throw ValidationError("precedence references unknown task '" + task_id + "'");
  tp.k = j.at(1).get<int>();
  const auto end = j.at(2).get<std::string>();
  if (end == "start")
    tp.endpoint = Endpoint::Start;
  else if (end == "end")
    tp.endpoint = Endpoint::End;
  else
    throw ParseError("timepoint endpoint must be 'start' or 'end'");
  return tp;
}

inline json params_to_json(const PlannerParams& p) {
  json d = json::object();
  for (const auto& [k, v] : p.manipulation_duration) d[std::string(to_string(k))] = v;
  return {{"n_samples", p.n_samples},
          {"k_nearest", p.k_nearest},
          {"connection_k", p.connection_k},
          {"rrt_max_samples", p.rrt_max_samples},
          {"rrt_step", p.rrt_step},
          {"shortcut_attempts", p.shortcut_attempts},
          {"max_edge_duration", p.max_edge_duration},
          {"collision_resolution", p.collision_resolution},
          {"manipulation_distance", p.manipulation_distance},
          {"manipulation_duration", d}};
}

inline PlannerParams params_from(const json& j) {
  PlannerParams p;
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("n_samples", p.n_samples);
  get("k_nearest", p.k_nearest);
  get("connection_k", p.connection_k);
  get("rrt_max_samples", p.rrt_max_samples);
  get("rrt_step", p.rrt_step);
  get("shortcut_attempts", p.shortcut_attempts);
  get("max_edge_duration", p.max_edge_duration);
  get("collision_resolution", p.collision_resolution);
  get("manipulation_distance", p.manipulation_distance);
  if (j.contains("manipulation_duration")) {
    for (const auto& [name, v] : j.at("manipulation_duration").items()) {
      const auto k = primitive_kind_from_string(name);
      if (!k || !is_mode_changing(*k)) throw ParseError("bad manipulation kind '" + name + "'");
      p.manipulation_duration[*k] = v.get<double>();
    }
  }
  return p;
}

}  // namespace io

inline json scenario_to_json(const Scenario& s) {
  json robots = json::array();
  for (const auto& r : s.robots) {
    json caps = json::array();
    for (auto k : r.capabilities) caps.push_back(std::string(to_string(k)));
    robots.push_back({{"id", r.id},
                      {"start", io::to_json(r.start_config)},
                      {"goal", io::to_json(r.goal_config)},
                      {"radius", r.radius},
                      {"v_max", r.v_max},
                      {"reach", io::to_json(r.reach)},
                      {"capabilities", caps}});
  }
  json objects = json::array();
  for (const auto& o : s.objects) {
    json grasps = json::array();
    for (const auto& g : o.grasp_offsets) grasps.push_back(io::to_json(g));
    objects.push_back({{"id", o.id},
                       {"footprint", io::to_json(o.footprint)},
                       {"start", io::to_json(o.start_pose)},
                       {"goal", io::to_json(o.goal_pose)},
                       {"grasps", grasps}});
  }
  json tasks = json::array();
  for (const auto& t : s.tasks) {
    json prims = json::array();
    for (const auto& p : t.primitives) prims.push_back(io::primitive_to_string(s, p));
    json jt = {{"id", t.id}, {"primitives", prims}};
    if (t.eligible_robots) {
      json el = json::array();
      for (int r : *t.eligible_robots) el.push_back(s.robots.at(r).id);
      jt["eligible_robots"] = el;
    }
    tasks.push_back(jt);
  }
  json prec = json::array();
  for (const auto& c : s.precedence)
    prec.push_back(json::array({io::timepoint_to_json(s, c.a), io::timepoint_to_json(s, c.b)}));
  json obstacles = json::array();
  for (const auto& o : s.workspace.static_obstacles) obstacles.push_back(io::to_json(o));
  return {{"format", 1},
          {"seed", s.seed},
          {"workspace", {{"bounds", io::to_json(s.workspace.bounds)}, {"obstacles", obstacles}}},
          {"robots", robots},
          {"objects", objects},
          {"tasks", tasks},
          {"precedence", prec},
          {"planner", io::params_to_json(s.params)}};
}

/// Builds a Scenario from parsed JSON and checks every invariant.
inline Scenario scenario_from_json(const json& j) {
  Scenario s;
  try {
    if (!j.is_object()) throw ParseError("scenario must be a JSON object");
    if (!j.contains("format")) throw ParseError("missing mandatory 'format' field");
    if (j.at("format").get<int>() != 1) throw ParseError("unsupported scenario format");
    for (const char* key : {"robots", "objects", "workspace", "tasks", "precedence", "seed"})
      if (!j.contains(key)) throw ParseError(std::string("missing key '") + key + "'");
    s.seed = j.at("seed").get<std::uint64_t>();
    const auto& ws = j.at("workspace");
    s.workspace.bounds = io::rect_from(ws.at("bounds"));
    if (ws.contains("obstacles"))
      for (const auto& o : ws.at("obstacles")) s.workspace.static_obstacles.push_back(io::polygon_from(o));
    for (const auto& jo : j.at("objects")) {
      AssemblyObject o;
      o.id = jo.at("id").get<std::string>();
      o.footprint = io::polygon_from(jo.at("footprint"));
      o.start_pose = io::pose_from(jo.at("start"));
      o.goal_pose = io::pose_from(jo.at("goal"));
      if (jo.contains("grasps"))
        for (const auto& g : jo.at("grasps")) o.grasp_offsets.push_back(io::pose_from(g));
      s.objects.push_back(std::move(o));
    }
    for (const auto& jr : j.at("robots")) {
      Robot r;
      r.id = jr.at("id").get<std::string>();
      r.start_config = io::config_from(jr.at("start"));
      r.goal_config = io::config_from(jr.at("goal"));
      r.radius = jr.at("radius").get<double>();
      r.v_max = jr.at("v_max").get<double>();
      r.reach = jr.contains("reach") ? io::rect_from(jr.at("reach")) : s.workspace.bounds;
      if (jr.contains("capabilities")) {
        r.capabilities.clear();
        for (const auto& c : jr.at("capabilities")) {
          const auto k = primitive_kind_from_string(c.get<std::string>());
          if (!k) throw ParseError("unknown capability '" + c.get<std::string>() + "'");
          r.capabilities.insert(*k);
        }
      }
      r.mode_graph = make_mode_graph(static_cast<int>(s.objects.size()), r.capabilities);
      s.robots.push_back(std::move(r));
    }
    for (const auto& jt : j.at("tasks")) {
      Task t;
      t.id = jt.at("id").get<std::string>();
      s.tasks.push_back(t);  // ids must be visible to later lookups
    }
    std::size_t ti = 0;
    for (const auto& jt : j.at("tasks")) {
      Task& t = s.tasks[ti++];
      for (const auto& p : jt.at("primitives"))
        t.primitives.push_back(io::primitive_from(s, p.get<std::string>()));
      if (jt.contains("eligible_robots")) {
        std::vector<int> el;
        for (const auto& r : jt.at("eligible_robots")) {
          const int idx = s.robot_index(r.get<std::string>());
          if (idx < 0) throw ValidationError("task '" + t.id + "' lists unknown robot");
          el.push_back(idx);
        }
        t.eligible_robots = el;
      }
    }
    for (const auto& jc : j.at("precedence")) {
      if (!jc.is_array() || jc.size() != 2) throw ParseError("precedence entry must be [a, b]");
      s.precedence.push_back({io::timepoint_from(s, jc.at(0)), io::timepoint_from(s, jc.at(1))});
    }
    if (j.contains("planner")) s.params = io::params_from(j.at("planner"));
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed scenario: ") + e.what());
  }
  validate_scenario(s);
  return s;
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError("'" + path + "': " + e.what());
  }
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << text;
  if (!out) throw IoError("write failed for '" + path + "'");
}

inline void write_json_file(const std::string& path, const json& j) {
  write_text_file(path, j.dump(1) + "\n");
}

inline Scenario load_scenario(const std::string& path) {
  return scenario_from_json(read_json_file(path));
}

inline void save_scenario(const Scenario& s, const std::string& path) {
  write_json_file(path, scenario_to_json(s));
}

}  // namespace mmtamp
