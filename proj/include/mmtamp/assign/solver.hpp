#pragma once

// Depth-first branch-and-bound for the assignment MILP. Branching inserts
// one task (in precedence order) into one robot's route with one root-to-leaf
// path; colliding mode-changing edges left unordered by the schedule are
// then branched as ordering decisions. Bounds come from a simple temporal
// network solved by longest paths.

#include <chrono>
#include <cstdint>
#include <numeric>

#include "mmtamp/assign/milp.hpp"

namespace mmtamp::assign {

struct SolveOptions {
  double time_limit = 300.0;
  std::int64_t node_limit = -1;  // deterministic budget, -1 = none
};

struct Incumbent {
  double time = 0.0;  // seconds since solve start
  double makespan = 0.0;
  std::int64_t node = 0;
};

struct SolveStats {
  std::int64_t nodes = 0;
  std::vector<Incumbent> incumbents;
  double t_first = 0.0;  // t_T
  double t_best = 0.0;   // t_T†
  double t_total = 0.0;  // t_T*
};

struct RouteItem {
  int task = -1;
  int path = -1;  // index into AssignmentProblem::paths[robot][task]

  friend bool operator==(const RouteItem&, const RouteItem&) = default;
};

struct Assignment {
  std::vector<std::vector<RouteItem>> routes;  // [robot]
  std::vector<double> x;                       // MILP variable values
  double makespan = kInf;
  bool optimal = false;
  SolveStats stats;
};

/// Time-point layout shared by the bound and the schedule extraction.
class TimeLayout {
 public:
  TimeLayout(const Scenario& s) : N_(static_cast<int>(s.robots.size())) {
    int flat = 0;
    for (const auto& t : s.tasks) {
      offset_.push_back(flat);
      flat += static_cast<int>(t.primitives.size());
    }
    F_ = flat;
  }
  static constexpr int zero = 0;
  int start(int p, int k) const { return 1 + 2 * (offset_[p] + k); }
  int end(int p, int k) const { return 2 + 2 * (offset_[p] + k); }
  int at(const TimePoint& tp) const {
    return tp.endpoint == Endpoint::Start ? start(tp.task, tp.k) : end(tp.task, tp.k);
  }
  int goal(int r) const { return 1 + 2 * F_ + r; }
  int makespan() const { return 1 + 2 * F_ + N_; }
  int size() const { return 2 + 2 * F_ + N_; }

 private:
  int N_ = 0, F_ = 0;
  std::vector<int> offset_;
};

/// x[b] >= x[a] + w
struct StnArc {
  int a = 0, b = 0;
  double w = 0.0;
};

/// Least solution with all variables >= 0, or nullopt on a positive cycle.
inline std::optional<std::vector<double>> longest_paths(int n, const std::vector<StnArc>& arcs) {
  std::vector<double> x(n, 0.0);
  for (int pass = 0; pass <= n; ++pass) {
    bool changed = false;
    for (const auto& a : arcs)
      if (x[a.a] + a.w > x[a.b] + 1e-12) {
        x[a.b] = x[a.a] + a.w;
        changed = true;
      }
    if (!changed) return x;
  }
  return std::nullopt;
}

namespace detail {

/// Data shared by all nodes of one solve.
struct SolverContext {
  const Scenario& s;
  const std::vector<const roadmap::MultiModalRoadmap*>& maps;
  const AssignmentProblem& ap;
  TimeLayout L;
  int N = 0, T = 0;
  std::vector<StnArc> base;
  std::vector<int> order;                    // task branching order
  std::vector<double> load_increment;        // per task
  std::vector<std::vector<std::vector<std::pair<int, int>>>> partners;  // [r][plan edge] -> (r', e')
  std::vector<std::vector<std::vector<int>>> orders_of;                 // [r][plan edge] -> object orders

  SolverContext(const Scenario& sc, const std::vector<const roadmap::MultiModalRoadmap*>& m,
                const AssignmentProblem& a)
      : s(sc), maps(m), ap(a), L(sc) {
    N = static_cast<int>(s.robots.size());
    T = static_cast<int>(s.tasks.size());
    build_base();
    build_order();
    const auto& mm = ap.model;
    partners.resize(N);
    orders_of.resize(N);
    for (int r = 0; r < N; ++r) {
      partners[r].resize(ap.plan_roadmaps[r].edges.size());
      orders_of[r].resize(ap.plan_roadmaps[r].edges.size());
    }
    for (const auto& pp : mm.pairs) {
      partners[pp.robot_a][pp.edge_a].emplace_back(pp.robot_b, pp.edge_b);
      partners[pp.robot_b][pp.edge_b].emplace_back(pp.robot_a, pp.edge_a);
    }
    for (std::size_t i = 0; i < mm.object_orders.size(); ++i) {
      const auto& o = mm.object_orders[i];
      orders_of[o.robot][o.edge].push_back(static_cast<int>(i));
    }
  }

  Config2 config(int r, int plan_vertex) const {
    return maps[r]->vertices[ap.plan_roadmaps[r].vertices[plan_vertex].vertex].config;
  }
  double euclid(int r, int a, int b) const {
    return distance(config(r, a), config(r, b)) / s.robots[r].v_max;
  }

  void build_base() {
    for (const auto& c : ap.model.precedence) base.push_back({L.at(c.a), L.at(c.b), 0.0});
    for (int p = 0; p < T; ++p) {
      const auto& prims = s.tasks[p].primitives;
      const int K = static_cast<int>(prims.size());
      for (int k = 0; k < K; ++k) {
        double dmin = kInf;
        for (int r = 0; r < N; ++r)
          for (const auto& c : ap.paths[r][p]) dmin = std::min(dmin, c.duration[k]);
        if (std::isfinite(dmin)) base.push_back({L.start(p, k), L.end(p, k), dmin});
        if (!prims[k].mode_changing()) {
          base.push_back({L.end(p, k - 1), L.start(p, k), 0.0});
          base.push_back({L.start(p, k), L.end(p, k - 1), 0.0});
          base.push_back({L.end(p, k), L.start(p, k + 1), 0.0});
          base.push_back({L.start(p, k + 1), L.end(p, k), 0.0});
        }
      }
      double lead = kInf, tail = kInf, inc = kInf;
      for (int r = 0; r < N; ++r)
        for (const auto& c : ap.paths[r][p]) {
          lead = std::min(lead, euclid(r, PlanRoadmap::kStart, c.root));
          tail = std::min(tail, euclid(r, c.leaf, PlanRoadmap::kGoal));
          inc = std::min(inc, std::max(0.0, c.weight - euclid(r, c.root, c.leaf)));
        }
      load_increment.push_back(std::isfinite(inc) ? inc : 0.0);
      if (std::isfinite(lead)) base.push_back({TimeLayout::zero, L.start(p, 0), lead});
      if (std::isfinite(tail)) base.push_back({L.end(p, K - 1), L.makespan(), tail});
    }
    for (int r = 0; r < N; ++r) {
      base.push_back({TimeLayout::zero, L.goal(r),
                      euclid(r, PlanRoadmap::kStart, PlanRoadmap::kGoal)});
      base.push_back({L.goal(r), L.makespan(), 0.0});
    }
  }

  void build_order() {
    std::vector<std::set<int>> succ(T);
    std::vector<int> indeg(T, 0);
    for (const auto& c : ap.model.precedence)
      if (c.a.task != c.b.task && succ[c.a.task].insert(c.b.task).second) ++indeg[c.b.task];
    std::vector<char> done(T, 0);
    for (int step = 0; step < T; ++step) {
      int pick = -1;
      for (int p = 0; p < T && pick < 0; ++p)
        if (!done[p] && indeg[p] == 0) pick = p;
      for (int p = 0; p < T && pick < 0; ++p)
        if (!done[p]) pick = p;  // task-level cycle: fall back to index order
      done[pick] = 1;
      order.push_back(pick);
      for (int q : succ[pick]) --indeg[q];
    }
  }
};

/// x[b] >= x[a] + gap for one side of a (7) pair.
struct Ordering {
  int a = 0, b = 0;
};

struct NodeState {
  std::vector<std::vector<RouteItem>> routes;
  std::vector<Ordering> orderings;
  int depth = 0;  // number of tasks inserted
};

struct Evaluation {
  bool feasible = false;
  double lb = kInf;
  std::vector<double> x;
};

inline Evaluation evaluate(const SolverContext& cx, const NodeState& st, bool complete,
                           bool with_object_orders = true, bool with_orderings = true) {
  Evaluation ev;
  const auto& L = cx.L;
  auto arcs = cx.base;
  double load = 0.0;
  for (int r = 0; r < cx.N; ++r) {
    const auto& pr = cx.ap.plan_roadmaps[r];
    int prev_vertex = PlanRoadmap::kStart;
    int prev_var = TimeLayout::zero;
    double route_lb = 0.0;
    auto link = [&](int from, int to) {
      return complete ? pr.link_weight(from, to) : cx.euclid(r, from, to);
    };
    for (const auto& it : st.routes[r]) {
      const auto& c = cx.ap.paths[r][it.task][it.path];
      const double w = link(prev_vertex, c.root);
      if (!std::isfinite(w)) return ev;
      arcs.push_back({prev_var, L.start(it.task, 0), w});
      route_lb += w + c.weight;
      const int K = static_cast<int>(c.duration.size());
      for (int k = 0; k < K; ++k) {
        arcs.push_back({L.start(it.task, k), L.end(it.task, k), c.duration[k]});
        if (with_object_orders && c.labeled_edge[k] >= 0)
          for (int oi : cx.orders_of[r][c.labeled_edge[k]]) {
            const auto& o = cx.ap.model.object_orders[oi];
            const double gap = cx.ap.model.gap;
            if (o.detach)
              arcs.push_back({L.start(o.task, o.k), L.start(it.task, k), gap});
            else
              arcs.push_back({L.end(it.task, k), L.end(o.task, o.k), gap});
          }
      }
      prev_vertex = c.leaf;
      prev_var = L.end(it.task, K - 1);
    }
    const double w = link(prev_vertex, PlanRoadmap::kGoal);
    if (!std::isfinite(w)) return ev;
    arcs.push_back({prev_var, L.goal(r), w});
    load += route_lb + w;
  }
  if (with_orderings)
    for (const auto& o : st.orderings) arcs.push_back({o.a, o.b, cx.ap.model.gap});
  auto x = longest_paths(L.size(), arcs);
  if (!x) return ev;
  if (!complete) {
    for (std::size_t i = st.depth; i < cx.order.size(); ++i) load += cx.load_increment[cx.order[i]];
  }
  ev.feasible = true;
  ev.lb = std::max((*x)[L.makespan()], load / cx.N);
  ev.x = std::move(*x);
  return ev;
}

/// First (7) pair among chosen edges whose intervals are not separated.
inline std::optional<std::pair<Ordering, Ordering>> violated_pair(const SolverContext& cx,
                                                                   const NodeState& st,
                                                                   const std::vector<double>& x) {
  const auto& L = cx.L;
  std::vector<std::map<int, std::pair<int, int>>> chosen(cx.N);  // plan edge -> (task, k)
  for (int r = 0; r < cx.N; ++r)
    for (const auto& it : st.routes[r]) {
      const auto& c = cx.ap.paths[r][it.task][it.path];
      for (std::size_t k = 0; k < c.labeled_edge.size(); ++k)
        if (c.manipulation[k] >= 0) chosen[r][c.labeled_edge[k]] = {it.task, static_cast<int>(k)};
    }
  const double gap = cx.ap.model.gap;
  for (const auto& pp : cx.ap.model.pairs) {
    auto ia = chosen[pp.robot_a].find(pp.edge_a);
    auto ib = chosen[pp.robot_b].find(pp.edge_b);
    if (ia == chosen[pp.robot_a].end() || ib == chosen[pp.robot_b].end()) continue;
    const auto [pa, ka] = ia->second;
    const auto [pb, kb] = ib->second;
    const int sa = L.start(pa, ka), ea = L.end(pa, ka), sb = L.start(pb, kb), eb = L.end(pb, kb);
    const bool before = x[sb] >= x[ea] + gap - 1e-9;
    const bool after = x[sa] >= x[eb] + gap - 1e-9;
    if (!before && !after) return std::make_pair(Ordering{ea, sb}, Ordering{eb, sa});
  }
  return std::nullopt;
}

}  // namespace detail

/// Schedule times for a complete set of routes. With `relaxed`, only
/// families (1)-(6) apply. Returns nullopt if the network is inconsistent.
inline std::optional<std::vector<double>> schedule_routes(
    const Scenario& s, const std::vector<const roadmap::MultiModalRoadmap*>& maps,
    const AssignmentProblem& ap, const std::vector<std::vector<RouteItem>>& routes, bool relaxed) {
  detail::SolverContext cx(s, maps, ap);
  detail::NodeState st;
  st.routes = routes;
  st.depth = cx.T;
  auto ev = detail::evaluate(cx, st, true, !relaxed, false);
  if (!ev.feasible) return std::nullopt;
  if (!relaxed) {
    // resolve remaining (7) pairs in schedule order
    for (int guard = 0; guard < 10000; ++guard) {
      auto v = detail::violated_pair(cx, st, ev.x);
      if (!v) break;
      st.orderings.push_back(ev.x[v->first.a] <= ev.x[v->second.a] ? v->first : v->second);
      ev = detail::evaluate(cx, st, true, true, true);
      if (!ev.feasible) return std::nullopt;
    }
  }
  return ev.x;
}

/// Makespan of the schedule under (1)-(6) only for fixed routes.
inline double relaxation_bound(const Scenario& s,
                               const std::vector<const roadmap::MultiModalRoadmap*>& maps,
                               const AssignmentProblem& ap,
                               const std::vector<std::vector<RouteItem>>& routes) {
  auto x = schedule_routes(s, maps, ap, routes, true);
  return x ? (*x)[TimeLayout(s).makespan()] : kInf;
}

/// MILP variable vector for routes and a schedule over TimeLayout.
inline std::vector<double> milp_solution(const Scenario& s, const AssignmentProblem& ap,
                                         const std::vector<std::vector<RouteItem>>& routes,
                                         const std::vector<double>& sched) {
  const auto& m = ap.model;
  const TimeLayout L(s);
  std::vector<double> x(m.vars.size(), 0.0);
  for (std::size_t r = 0; r < routes.size(); ++r) {
    const auto& pr = ap.plan_roadmaps[r];
    auto time_of = [&](int v) {
      const auto& pv = pr.vertices[v];
      if (v == PlanRoadmap::kStart) return 0.0;
      if (v == PlanRoadmap::kGoal) return sched[L.goal(static_cast<int>(r))];
      return sched[pv.end ? L.end(pv.task, pv.k) : L.start(pv.task, pv.k)];
    };
    auto use = [&](int eid) {
      const auto& e = pr.edges[eid];
      x[m.A[r][eid]] = 1.0;
      x[m.tn[r][e.s]] = time_of(e.s);
      x[m.tn[r][e.e]] = time_of(e.e);
    };
    int prev = PlanRoadmap::kStart;
    for (const auto& it : routes[r]) {
      const auto& c = ap.paths[r][it.task][it.path];
      use(pr.link.at({prev, c.root}));
      for (int e : c.edges) use(e);
      prev = c.leaf;
    }
    use(pr.link.at({prev, PlanRoadmap::kGoal}));
  }
  for (std::size_t p = 0; p < m.tT.size(); ++p)
    for (std::size_t k = 0; k < m.tT[p].size(); ++k) {
      x[m.tT[p][k][0]] = sched[L.start(static_cast<int>(p), static_cast<int>(k))];
      x[m.tT[p][k][1]] = sched[L.end(static_cast<int>(p), static_cast<int>(k))];
    }
  x[m.t] = sched[L.makespan()];
  for (const auto& pp : m.pairs) {
    if (x[m.A[pp.robot_a][pp.edge_a]] < 0.5 || x[m.A[pp.robot_b][pp.edge_b]] < 0.5) continue;
    const auto& ea = ap.plan_roadmaps[pp.robot_a].edges[pp.edge_a];
    const auto& eb = ap.plan_roadmaps[pp.robot_b].edges[pp.edge_b];
    const bool before = x[m.tn[pp.robot_b][eb.s]] >= x[m.tn[pp.robot_a][ea.e]] + m.gap - 1e-9;
    x[pp.y] = before ? 0.0 : 1.0;
  }
  return x;
}

inline Assignment solve_assignment(const Scenario& s,
                                   const std::vector<const roadmap::MultiModalRoadmap*>& maps,
                                   const AssignmentProblem& ap, const SolveOptions& opt = {}) {
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(clock::now() - t0).count(); };

  detail::SolverContext cx(s, maps, ap);
  Assignment best;
  best.routes.assign(cx.N, {});
  bool stopped = false;
  std::int64_t nodes = 0;

  auto out_of_budget = [&] {
    if (opt.node_limit >= 0 && nodes >= opt.node_limit) return true;
    return opt.time_limit >= 0 && elapsed() > opt.time_limit;
  };

  std::function<void(detail::NodeState&, const detail::Evaluation&)> dfs =
      [&](detail::NodeState& st, const detail::Evaluation& ev) {
        if (stopped) return;
        if (out_of_budget()) {
          stopped = true;
          return;
        }
        ++nodes;
        if (ev.lb >= best.makespan - 1e-9) return;
        struct Child {
          detail::NodeState st;
          detail::Evaluation ev;
          int robot, pos, path;
        };
        std::vector<Child> children;
        if (st.depth == cx.T) {
          auto v = detail::violated_pair(cx, st, ev.x);
          if (!v) {
            best.makespan = ev.x[cx.L.makespan()];
            best.routes = st.routes;
            best.x = milp_solution(s, ap, st.routes, ev.x);
            best.stats.incumbents.push_back({elapsed(), best.makespan, nodes});
            return;
          }
          for (const auto& o : {v->first, v->second}) {
            auto cst = st;
            cst.orderings.push_back(o);
            auto cev = detail::evaluate(cx, cst, true);
            if (cev.feasible) children.push_back({std::move(cst), std::move(cev), 0, 0, 0});
          }
        } else {
          const int p = cx.order[st.depth];
          const bool last = st.depth + 1 == cx.T;
          for (int r = 0; r < cx.N; ++r) {
            const auto& cands = ap.paths[r][p];
            for (std::size_t pos = 0; pos <= st.routes[r].size(); ++pos)
              for (std::size_t c = 0; c < cands.size(); ++c) {
                auto cst = st;
                cst.routes[r].insert(cst.routes[r].begin() + static_cast<long>(pos),
                                     RouteItem{p, static_cast<int>(c)});
                cst.depth = st.depth + 1;
                auto cev = detail::evaluate(cx, cst, last);
                if (cev.feasible)
                  children.push_back({std::move(cst), std::move(cev), r, static_cast<int>(pos),
                                      static_cast<int>(c)});
              }
          }
        }
        std::stable_sort(children.begin(), children.end(), [](const Child& a, const Child& b) {
          if (a.ev.lb != b.ev.lb) return a.ev.lb < b.ev.lb;
          return std::tie(a.robot, a.pos, a.path) < std::tie(b.robot, b.pos, b.path);
        });
        for (auto& ch : children) {
          if (stopped) return;
          dfs(ch.st, ch.ev);
        }
      };

  detail::NodeState root;
  root.routes.assign(cx.N, {});
  auto rev = detail::evaluate(cx, root, cx.T == 0);
  if (rev.feasible) dfs(root, rev);

  best.stats.nodes = nodes;
  best.stats.t_total = elapsed();
  if (!best.stats.incumbents.empty()) {
    best.stats.t_first = best.stats.incumbents.front().time;
    best.stats.t_best = best.stats.incumbents.back().time;
  }
  if (!std::isfinite(best.makespan)) {
    if (stopped) throw TimeLimit("assignment search stopped before finding a feasible solution");
    throw Infeasible("no assignment satisfies the constraints");
  }
  best.optimal = !stopped;
  return best;
}

}  // namespace mmtamp::assign
