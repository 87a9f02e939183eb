#pragma once

// Task roadmaps G^T_{n,p}, plan roadmaps G^T_n, and the root-to-leaf task
// paths used as branching units.

#include <algorithm>
#include <functional>
#include <map>
#include <vector>

#include "mmtamp/roadmap.hpp"

namespace mmtamp::assign {

struct TRNode {
  int id = -1;
  int k = -1;        // primitive index within the task
  bool end = false;  // false: start milestone of primitive k, true: end milestone
  int manipulation = -1;
  int vertex = -1;  // assignment-roadmap vertex
};

enum class TREdgeKind { mode_changing, abstraction, junction };

struct TREdge {
  int id = -1;
  int s = -1;
  int e = -1;
  double w = 0.0;
  int k = -1;  // labeled primitive, -1 for junctions
  int manipulation = -1;
  TREdgeKind kind = TREdgeKind::mode_changing;
};

struct TaskRoadmap {
  int robot = -1;
  int task = -1;
  std::vector<TRNode> nodes;
  std::vector<TREdge> edges;
  std::vector<int> roots;
  std::vector<int> leaves;

  bool empty() const { return roots.empty(); }
};

/// Dijkstra distances inside one mode component, cached per source vertex.
class ComponentDistances {
 public:
  explicit ComponentDistances(const roadmap::MultiModalRoadmap& map)
      : map_(map), out_(map.out_edges()) {}

  double operator()(int from, int to) {
    if (from == to) return 0.0;
    if (map_.component(from) != map_.component(to)) return kInf;
    auto it = cache_.find(from);
    if (it == cache_.end())
      it = cache_.emplace(from, roadmap::component_dijkstra(map_, out_, from)).first;
    return it->second[to];
  }

 private:
  const roadmap::MultiModalRoadmap& map_;
  std::vector<std::vector<int>> out_;
  std::map<int, std::vector<double>> cache_;
};

/// All ways robot `map.robot` can complete task `task`: milestones and
/// manipulation chains of its mode-changing primitives, abstraction edges for
/// the mode-preserving ones, and zero-weight junctions between consecutive
/// mode-changing primitives that share a milestone.
inline TaskRoadmap build_task_roadmap(const Scenario& s, const roadmap::MultiModalRoadmap& map,
                                      int task, ComponentDistances& dist) {
  TaskRoadmap tr;
  tr.robot = map.robot;
  tr.task = task;
  const auto& t = s.tasks.at(task);
  if (!t.eligible(map.robot)) return tr;
  const int K = static_cast<int>(t.primitives.size());
  std::vector<std::vector<int>> cand(K);
  for (int k = 0; k < K; ++k) {
    if (!t.primitives[k].mode_changing()) continue;
    for (const auto& m : map.manipulations)
      if (m.tau == t.primitives[k]) cand[k].push_back(m.id);
    if (cand[k].empty()) return tr;
  }
  std::vector<std::map<int, std::pair<int, int>>> node_of(K);  // manip -> (start, end)
  for (int k = 0; k < K; ++k)
    for (int mid : cand[k]) {
      const auto& m = map.manipulations[mid];
      const int a = static_cast<int>(tr.nodes.size());
      tr.nodes.push_back({a, k, false, mid, m.start_vertex});
      tr.nodes.push_back({a + 1, k, true, mid, m.end_vertex});
      node_of[k][mid] = {a, a + 1};
      tr.edges.push_back({static_cast<int>(tr.edges.size()), a, a + 1, m.duration, k, mid,
                          TREdgeKind::mode_changing});
    }
  for (int k = 0; k + 1 < K; ++k) {
    if (t.primitives[k].mode_changing() && t.primitives[k + 1].mode_changing()) {
      for (int m1 : cand[k])
        for (int m2 : cand[k + 1])
          if (map.manipulations[m1].end_vertex == map.manipulations[m2].start_vertex)
            tr.edges.push_back({static_cast<int>(tr.edges.size()), node_of[k][m1].second,
                                node_of[k + 1][m2].first, 0.0, -1, -1, TREdgeKind::junction});
    } else if (!t.primitives[k + 1].mode_changing() && k + 2 < K) {
      for (int m1 : cand[k])
        for (int m2 : cand[k + 2]) {
          const double d =
              dist(map.manipulations[m1].end_vertex, map.manipulations[m2].start_vertex);
          if (!std::isfinite(d)) continue;
          tr.edges.push_back({static_cast<int>(tr.edges.size()), node_of[k][m1].second,
                              node_of[k + 2][m2].first, d, k + 1, -1, TREdgeKind::abstraction});
        }
    }
  }

  // Keep only nodes on some root-to-leaf path, then renumber.
  const int n = static_cast<int>(tr.nodes.size());
  std::vector<std::vector<int>> out(n), in(n);
  for (const auto& e : tr.edges) {
    out[e.s].push_back(e.id);
    in[e.e].push_back(e.id);
  }
  auto flood = [&](std::vector<char>& mark, auto pred, const std::vector<std::vector<int>>& adj,
                   bool forward) {
    std::vector<int> stack;
    for (int v = 0; v < n; ++v)
      if (pred(tr.nodes[v])) {
        mark[v] = 1;
        stack.push_back(v);
      }
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      for (int eid : adj[v]) {
        const int u = forward ? tr.edges[eid].e : tr.edges[eid].s;
        if (!mark[u]) {
          mark[u] = 1;
          stack.push_back(u);
        }
      }
    }
  };
  std::vector<char> from_root(n, 0), to_leaf(n, 0);
  flood(from_root, [](const TRNode& x) { return x.k == 0 && !x.end; }, out, true);
  flood(to_leaf, [K](const TRNode& x) { return x.k == K - 1 && x.end; }, in, false);
  std::vector<int> renum(n, -1);
  TaskRoadmap pruned;
  pruned.robot = tr.robot;
  pruned.task = tr.task;
  for (int v = 0; v < n; ++v)
    if (from_root[v] && to_leaf[v]) {
      renum[v] = static_cast<int>(pruned.nodes.size());
      auto x = tr.nodes[v];
      x.id = renum[v];
      pruned.nodes.push_back(x);
      if (x.k == 0 && !x.end) pruned.roots.push_back(x.id);
      if (x.k == K - 1 && x.end) pruned.leaves.push_back(x.id);
    }
  for (const auto& e : tr.edges)
    if (renum[e.s] >= 0 && renum[e.e] >= 0) {
      auto x = e;
      x.id = static_cast<int>(pruned.edges.size());
      x.s = renum[e.s];
      x.e = renum[e.e];
      pruned.edges.push_back(x);
    }
  return pruned;
}

// ---------------------------------------------------------------------------

enum class PlanEdgeKind { link, mode_changing, abstraction, junction };

struct PlanVertex {
  int id = -1;
  int task = -1;  // -1 for robot start/goal
  int tr_node = -1;
  int k = -1;
  bool end = false;
  int vertex = -1;  // assignment-roadmap vertex
};

struct PlanEdge {
  int id = -1;
  int s = -1;
  int e = -1;
  double w = 0.0;
  int task = -1;  // -1 for links
  int k = -1;     // labeled primitive or -1
  int manipulation = -1;
  PlanEdgeKind kind = PlanEdgeKind::link;
};

/// Composition of one robot's task roadmaps with start/goal and linking
/// edges. Vertex 0 is the robot start, vertex 1 its goal.
struct PlanRoadmap {
  int robot = -1;
  std::vector<PlanVertex> vertices;
  std::vector<PlanEdge> edges;
  std::vector<int> task_offset;  // per task: first plan vertex of its task roadmap, -1 if empty
  std::vector<std::vector<int>> roots, leaves;  // per task, plan vertex ids
  std::map<std::pair<int, int>, int> link;       // (from, to) -> link edge id

  static constexpr int kStart = 0;
  static constexpr int kGoal = 1;

  double link_weight(int from, int to) const {
    auto it = link.find({from, to});
    return it == link.end() ? kInf : edges[it->second].w;
  }
};

inline PlanRoadmap build_plan_roadmap(const Scenario& s, const roadmap::MultiModalRoadmap& map,
                                      const std::vector<TaskRoadmap>& trs, ComponentDistances& dist) {
  PlanRoadmap pr;
  pr.robot = map.robot;
  pr.vertices.push_back({0, -1, -1, -1, false, map.start_vertex});
  pr.vertices.push_back({1, -1, -1, -1, false, map.goal_vertex});
  const int T = static_cast<int>(s.tasks.size());
  pr.task_offset.assign(T, -1);
  pr.roots.assign(T, {});
  pr.leaves.assign(T, {});
  for (int p = 0; p < T; ++p) {
    const auto& tr = trs.at(p);
    if (tr.empty()) continue;
    const int off = static_cast<int>(pr.vertices.size());
    pr.task_offset[p] = off;
    for (const auto& x : tr.nodes)
      pr.vertices.push_back({off + x.id, p, x.id, x.k, x.end, x.vertex});
    for (const auto& e : tr.edges) {
      const auto kind = e.kind == TREdgeKind::mode_changing ? PlanEdgeKind::mode_changing
                        : e.kind == TREdgeKind::abstraction ? PlanEdgeKind::abstraction
                                                            : PlanEdgeKind::junction;
      pr.edges.push_back({static_cast<int>(pr.edges.size()), off + e.s, off + e.e, e.w, p, e.k,
                          e.manipulation, kind});
    }
    for (int r : tr.roots) pr.roots[p].push_back(off + r);
    for (int l : tr.leaves) pr.leaves[p].push_back(off + l);
  }
  auto add_link = [&](int a, int b) {
    const double w = dist(pr.vertices[a].vertex, pr.vertices[b].vertex);
    if (!std::isfinite(w)) return;
    const int id = static_cast<int>(pr.edges.size());
    pr.edges.push_back({id, a, b, w, -1, -1, -1, PlanEdgeKind::link});
    pr.link[{a, b}] = id;
  };
  add_link(PlanRoadmap::kStart, PlanRoadmap::kGoal);
  for (int q = 0; q < T; ++q)
    for (int r : pr.roots[q]) add_link(PlanRoadmap::kStart, r);
  for (int p = 0; p < T; ++p)
    for (int l : pr.leaves[p]) {
      for (int q = 0; q < T; ++q) {
        if (q == p) continue;
        for (int r : pr.roots[q]) add_link(l, r);
      }
      add_link(l, PlanRoadmap::kGoal);
    }
  return pr;
}

/// One root-to-leaf path of a task roadmap, expressed on the plan roadmap.
struct TaskPath {
  int robot = -1;
  int task = -1;
  std::vector<int> edges;          // plan edge ids in order
  std::vector<double> duration;    // per primitive: weight of its labeled edge
  std::vector<int> manipulation;   // per primitive: manipulation id or -1
  std::vector<int> labeled_edge;   // per primitive: plan edge id
  int root = -1;                   // plan vertex
  int leaf = -1;                   // plan vertex
  double weight = 0.0;
};

/// Enumerates all root-to-leaf paths of task p in the plan roadmap, sorted by
/// ascending weight (ties by edge sequence).
inline std::vector<TaskPath> enumerate_task_paths(const Scenario& s, const PlanRoadmap& pr, int p) {
  std::vector<TaskPath> out;
  if (pr.task_offset[p] < 0) return out;
  const int K = static_cast<int>(s.tasks[p].primitives.size());
  std::vector<std::vector<int>> adj(pr.vertices.size());
  for (const auto& e : pr.edges)
    if (e.task == p) adj[e.s].push_back(e.id);
  std::vector<int> stack_edges;
  std::function<void(int)> dfs = [&](int v) {
    const auto& pv = pr.vertices[v];
    if (pv.k == K - 1 && pv.end) {
      TaskPath tp;
      tp.robot = pr.robot;
      tp.task = p;
      tp.edges = stack_edges;
      tp.duration.assign(K, 0.0);
      tp.manipulation.assign(K, -1);
      tp.labeled_edge.assign(K, -1);
      tp.root = pr.edges[stack_edges.front()].s;
      tp.leaf = v;
      for (int eid : stack_edges) {
        const auto& e = pr.edges[eid];
        tp.weight += e.w;
        if (e.k >= 0) {
          tp.duration[e.k] = e.w;
          tp.manipulation[e.k] = e.manipulation;
          tp.labeled_edge[e.k] = eid;
        }
      }
      out.push_back(std::move(tp));
      return;
    }
    for (int eid : adj[v]) {
      stack_edges.push_back(eid);
      dfs(pr.edges[eid].e);
      stack_edges.pop_back();
    }
  };
  for (int r : pr.roots[p]) dfs(r);
  std::stable_sort(out.begin(), out.end(), [](const TaskPath& a, const TaskPath& b) {
    if (a.weight != b.weight) return a.weight < b.weight;
    return a.edges < b.edges;
  });
  return out;
}

}  // namespace mmtamp::assign
