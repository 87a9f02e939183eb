#pragma once

// Exhaustive reference solvers for small instances.

#include <queue>
#include <unordered_map>

#include "mmtamp/annotate.hpp"
#include "mmtamp/pbsat/rsipp.hpp"

namespace mmtamp::validate {

struct OracleLimits {
  int max_robots = 2;
  int max_tasks = 3;
  int max_candidates = 4;  // manipulations per robot and primitive
};

namespace oracle_detail {

/// Shortest times from `src` inside its (mode, grasp) component, without
/// mode-changing edges.
inline std::vector<double> single_mode_times(const roadmap::MultiModalRoadmap& m, int src) {
  const int n = static_cast<int>(m.vertices.size());
  std::vector<std::vector<std::pair<int, double>>> adj(n);
  auto same = [&](int a, int b) {
    return m.vertices[a].mode == m.vertices[b].mode && m.vertices[a].grasp == m.vertices[b].grasp;
  };
  for (const auto& e : m.edges)
    if (e.kind != roadmap::EdgeKind::mode_changing && same(e.s, e.e) && same(e.s, src))
      adj[e.s].push_back({e.e, e.w});
  std::vector<double> d(n, kInf);
  std::vector<char> done(n, 0);
  d[src] = 0.0;
  for (;;) {
    int u = -1;
    for (int v = 0; v < n; ++v)
      if (!done[v] && std::isfinite(d[v]) && (u < 0 || d[v] < d[u])) u = v;
    if (u < 0) break;
    done[u] = 1;
    for (auto [v, w] : adj[u]) d[v] = std::min(d[v], d[u] + w);
  }
  return d;
}

struct Option {
  std::vector<int> manip;    // per primitive, -1 for mode-preserving ones
  std::vector<double> dur;   // per primitive
  int first = -1, last = -1; // roadmap vertices
};

/// Longest-path schedule over difference constraints x[b] >= x[a] + w with
/// x >= 0; returns the value of `target` or inf on inconsistency.
inline double schedule(int n, const std::vector<std::tuple<int, int, double>>& arcs, int target) {
  std::vector<double> x(n, 0.0);
  for (int it = 0; it < n + 1; ++it) {
    bool any = false;
    for (const auto& [a, b, w] : arcs)
      if (x[a] + w > x[b] + 1e-12) {
        x[b] = x[a] + w;
        any = true;
      }
    if (!any) return x[target];
  }
  return kInf;
}

}  // namespace oracle_detail

/// Minimum makespan over every task-to-robot assignment, manipulation
/// choice, per-robot task order and ordering of colliding manipulations.
/// Returns inf if nothing is feasible.
inline double brute_force_assignment_oracle(const Scenario& s,
                                            const std::vector<const roadmap::MultiModalRoadmap*>& maps,
                                            const CollisionSet& pi, const OracleLimits& lim = {}) {
  using namespace oracle_detail;
  const int N = static_cast<int>(s.robots.size());
  const int T = static_cast<int>(s.tasks.size());
  if (N > lim.max_robots || T > lim.max_tasks) throw SizeLimit("instance too large for the oracle");
  const double gap = kGapEps;

  // options[r][p]
  std::vector<std::vector<std::vector<Option>>> options(N, std::vector<std::vector<Option>>(T));
  std::vector<std::map<int, std::vector<double>>> times(N);
  auto dist = [&](int r, int a, int b) {
    auto it = times[r].find(a);
    if (it == times[r].end()) it = times[r].emplace(a, single_mode_times(*maps[r], a)).first;
    return it->second[b];
  };
  for (int r = 0; r < N; ++r)
    for (int p = 0; p < T; ++p) {
      const auto& task = s.tasks[p];
      if (!task.eligible(r)) continue;
      const int K = static_cast<int>(task.primitives.size());
      std::vector<std::vector<int>> cand(K);
      bool possible = true;
      for (int k = 0; k < K; ++k) {
        if (!task.primitives[k].mode_changing()) {
          cand[k] = {-1};
          continue;
        }
        for (const auto& m : maps[r]->manipulations)
          if (m.tau == task.primitives[k]) cand[k].push_back(m.id);
        if (static_cast<int>(cand[k].size()) > lim.max_candidates)
          throw SizeLimit("too many candidate manipulations for the oracle");
        possible = possible && !cand[k].empty();
      }
      if (!possible) continue;
      std::vector<int> pick(K, 0);
      for (;;) {
        Option o;
        bool ok = true;
        for (int k = 0; k < K && ok; ++k) {
          o.manip.push_back(cand[k][pick[k]]);
          if (cand[k][pick[k]] >= 0) {
            o.dur.push_back(maps[r]->manipulations[cand[k][pick[k]]].duration);
          } else {
            o.dur.push_back(0.0);
          }
        }
        for (int k = 0; k < K && ok; ++k) {
          if (o.manip[k] >= 0) {
            if (k + 1 < K && o.manip[k + 1] >= 0 &&
                maps[r]->manipulations[o.manip[k]].end_vertex != maps[r]->manipulations[o.manip[k + 1]].start_vertex)
              ok = false;
          } else {
            const double d = dist(r, maps[r]->manipulations[o.manip[k - 1]].end_vertex,
                                  maps[r]->manipulations[o.manip[k + 1]].start_vertex);
            if (!std::isfinite(d)) ok = false;
            o.dur[k] = d;
          }
        }
        if (ok) {
          o.first = maps[r]->manipulations[o.manip.front()].start_vertex;
          o.last = maps[r]->manipulations[o.manip.back()].end_vertex;
          options[r][p].push_back(std::move(o));
        }
        int k = 0;
        while (k < K && ++pick[k] == static_cast<int>(cand[k].size())) pick[k++] = 0;
        if (k == K) break;
      }
    }

  // Time point layout: 2 per primitive, one goal per robot, one makespan.
  std::vector<int> base(T, 0);
  int flat = 0;
  for (int p = 0; p < T; ++p) {
    base[p] = flat;
    flat += static_cast<int>(s.tasks[p].primitives.size());
  }
  const int zero = 0;
  auto S = [&](int p, int k) { return 1 + 2 * (base[p] + k); };
  auto E = [&](int p, int k) { return 2 + 2 * (base[p] + k); };
  auto G = [&](int r) { return 1 + 2 * flat + r; };
  const int MS = 1 + 2 * flat + N;
  const int nvars = MS + 1;

  // Object-pole and edge-edge conflicts of each manipulation, read from Π.
  const auto& idx = pi.index;
  auto manip_objects = [&](int r, int m) {
    std::set<std::pair<int, Pole>> out;
    for (int e : maps[r]->manipulations[m].edges)
      for (int c : pi.neighbors_of(idx.edge(r, e))) {
        const auto cond = idx.decode(c);
        if (cond.type == Condition::Type::Object) out.insert({cond.index, cond.pole});
      }
    return out;
  };
  auto manips_collide = [&](int r1, int m1, int r2, int m2) {
    for (int e1 : maps[r1]->manipulations[m1].edges)
      for (int e2 : maps[r2]->manipulations[m2].edges)
        if (pi.contains(idx.edge(r1, e1), idx.edge(r2, e2))) return true;
    return false;
  };

  std::vector<std::tuple<int, int, double>> fixed;
  for (const auto& c : s.precedence) {
    auto var = [&](const TimePoint& tp) { return tp.endpoint == Endpoint::Start ? S(tp.task, tp.k) : E(tp.task, tp.k); };
    fixed.emplace_back(var(c.a), var(c.b), 0.0);
  }
  for (int p = 0; p < T; ++p)
    for (int k = 0; k + 1 < static_cast<int>(s.tasks[p].primitives.size()); ++k) fixed.emplace_back(E(p, k), S(p, k + 1), 0.0);
  for (int r = 0; r < N; ++r) fixed.emplace_back(G(r), MS, 0.0);

  double best = kInf;
  std::vector<int> robot_of(T, 0);
  for (;;) {
    bool feasible_assignment = true;
    for (int p = 0; p < T; ++p) feasible_assignment = feasible_assignment && !options[robot_of[p]][p].empty();
    if (feasible_assignment) {
      std::vector<int> choice(T, 0);
      for (;;) {
        // per-robot task lists, enumerated over all permutations
        std::vector<std::vector<int>> lists(N);
        for (int p = 0; p < T; ++p) lists[robot_of[p]].push_back(p);
        for (auto& l : lists) std::sort(l.begin(), l.end());
        // base arcs for this choice
        std::vector<std::tuple<int, int, double>> arcs = fixed;
        struct Chosen { int r, p, k, m; };
        std::vector<Chosen> chosen;
        for (int p = 0; p < T; ++p) {
          const int r = robot_of[p];
          const auto& o = options[r][p][choice[p]];
          const int K = static_cast<int>(o.manip.size());
          for (int k = 0; k < K; ++k) {
            arcs.emplace_back(S(p, k), E(p, k), o.dur[k]);
            if (o.manip[k] < 0) {
              arcs.emplace_back(S(p, k), E(p, k - 1), 0.0);
              arcs.emplace_back(E(p, k), S(p, k + 1), 0.0);
              arcs.emplace_back(S(p, k + 1), E(p, k), 0.0);
            } else {
              chosen.push_back({r, p, k, o.manip[k]});
            }
          }
        }
        for (const auto& c : chosen)
          for (const auto& [obj, pole] : manip_objects(c.r, c.m))
            for (int q = 0; q < T; ++q) {
              if (q == c.p) continue;
              const auto& prims = s.tasks[q].primitives;
              for (int k = 0; k < static_cast<int>(prims.size()); ++k) {
                if (prims[k].object != obj) continue;
                if (pole == Pole::Start && prims[k].kind == PrimitiveKind::Detach)
                  arcs.emplace_back(S(q, k), S(c.p, c.k), gap);
                if (pole == Pole::Goal && prims[k].kind == PrimitiveKind::Attach)
                  arcs.emplace_back(E(c.p, c.k), E(q, k), gap);
              }
            }
        std::vector<std::pair<int, int>> disj;
        for (std::size_t i = 0; i < chosen.size(); ++i)
          for (std::size_t j = i + 1; j < chosen.size(); ++j)
            if (chosen[i].r != chosen[j].r && chosen[i].p != chosen[j].p &&
                manips_collide(chosen[i].r, chosen[i].m, chosen[j].r, chosen[j].m))
              disj.emplace_back(static_cast<int>(i), static_cast<int>(j));

        std::vector<std::vector<int>> perm = lists;
        std::function<void(int)> orders = [&](int r) {
          if (r == N) {
            auto a2 = arcs;
            bool ok = true;
            for (int rr = 0; rr < N && ok; ++rr) {
              int prev_v = maps[rr]->start_vertex, prev_t = zero;
              for (int p : perm[rr]) {
                const auto& o = options[rr][p][choice[p]];
                const double w = dist(rr, prev_v, o.first);
                if (!std::isfinite(w)) { ok = false; break; }
                a2.emplace_back(prev_t, S(p, 0), w);
                prev_v = o.last;
                prev_t = E(p, static_cast<int>(o.manip.size()) - 1);
              }
              if (!ok) break;
              const double w = dist(rr, prev_v, maps[rr]->goal_vertex);
              if (!std::isfinite(w)) { ok = false; break; }
              a2.emplace_back(prev_t, G(rr), w);
            }
            if (!ok) return;
            const std::size_t D = disj.size();
            for (std::size_t mask = 0; mask < (std::size_t{1} << D); ++mask) {
              auto a3 = a2;
              for (std::size_t d = 0; d < D; ++d) {
                const auto& x = chosen[disj[d].first];
                const auto& y = chosen[disj[d].second];
                if (mask >> d & 1)
                  a3.emplace_back(E(y.p, y.k), S(x.p, x.k), gap);
                else
                  a3.emplace_back(E(x.p, x.k), S(y.p, y.k), gap);
              }
              best = std::min(best, schedule(nvars, a3, MS));
            }
            return;
          }
          auto& l = perm[r];
          std::sort(l.begin(), l.end());
          do {
            orders(r + 1);
          } while (std::next_permutation(l.begin(), l.end()));
        };
        orders(0);

        int p = 0;
        while (p < T && ++choice[p] == static_cast<int>(options[robot_of[p]][p].size())) choice[p++] = 0;
        if (p == T) break;
      }
    }
    int p = 0;
    while (p < T && ++robot_of[p] == N) robot_of[p++] = 0;
    if (p == T) break;
  }
  return best;
}

/// Earliest end time on a time-expanded graph with wait actions at `tick`
/// resolution. With `pad` the robot may wait at the goal until t_min;
/// otherwise its final move must reach the goal no earlier than t_min. A robot occupies a vertex
/// on [arrive, depart) and must find it free at the arrival instant.
/// Returns nullopt if the goal is unreachable before `horizon`.
inline std::optional<double> time_expanded_astar_oracle(const roadmap::MultiModalRoadmap& map,
                                                        const std::vector<char>* allowed, int start, int goal,
                                                        const pbsat::ReservationTable& rt, double t0, double t_min,
                                                        double tick, double horizon, bool pad = true,
                                                        bool hold_forever = false) {
  const int n = static_cast<int>(map.vertices.size());
  auto to_ticks = [&](double t) { return static_cast<long>(std::llround(t / tick)); };
  auto ceil_ticks = [&](double t) { return static_cast<long>(std::ceil(t / tick - 1e-9)); };
  auto vertex_free = [&](int v, double lo, double hi) {
    for (const auto& r : rt.vertex_reserved(v))
      if (r.lo < hi && lo < r.hi) return false;
    return true;
  };
  auto vertex_free_at = [&](int v, double t) {
    for (const auto& r : rt.vertex_reserved(v))
      if (r.lo <= t && t < r.hi) return false;
    return true;
  };
  auto edge_free = [&](int e, double lo, double hi) {
    for (const auto& r : rt.edge_reserved(e))
      if (r.lo < hi && lo < r.hi) return false;
    return true;
  };
  // heuristic in ticks (floor keeps it admissible)
  std::vector<std::vector<std::pair<int, int>>> in(n);
  std::vector<std::vector<std::pair<int, int>>> out(n);
  for (const auto& e : map.edges)
    if (!allowed || (*allowed)[e.id]) {
      out[e.s].push_back({e.id, e.e});
      in[e.e].push_back({e.id, e.s});
    }
  std::vector<long> h(n, std::numeric_limits<long>::max());
  {
    using It = std::pair<long, int>;
    std::priority_queue<It, std::vector<It>, std::greater<>> pq;
    h[goal] = 0;
    pq.push({0, goal});
    while (!pq.empty()) {
      auto [d, v] = pq.top();
      pq.pop();
      if (d > h[v]) continue;
      for (auto [eid, u] : in[v]) {
        const long nd = d + static_cast<long>(std::floor(map.edges[eid].w / tick + 1e-9));
        if (nd < h[u]) {
          h[u] = nd;
          pq.push({nd, u});
        }
      }
    }
  }
  const long T0 = to_ticks(t0), TM = ceil_ticks(t_min), HZ = ceil_ticks(horizon);
  if (h[start] == std::numeric_limits<long>::max() || !vertex_free_at(start, t0)) return std::nullopt;
  using Node = std::tuple<long, long, int, int>;  // f, t, v, arrived (0 after a wait)
  std::priority_queue<Node, std::vector<Node>, std::greater<>> open;
  std::unordered_map<std::uint64_t, char> seen;
  auto key = [](long t, int v, int arrived) {
    return (static_cast<std::uint64_t>(t) << 21) ^ (static_cast<std::uint64_t>(v) << 1) ^
           static_cast<std::uint64_t>(arrived);
  };
  open.push({T0 + h[start], T0, start, 1});
  while (!open.empty()) {
    auto [f, t, v, arrived] = open.top();
    open.pop();
    if (!seen.emplace(key(t, v, arrived), 1).second) continue;
    const double tt = static_cast<double>(t) * tick;
    if (v == goal && (pad || (t >= TM && arrived))) {
      const long end = std::max(t, TM);
      const double te = static_cast<double>(end) * tick;
      const bool ok = hold_forever ? vertex_free(v, tt, kInf) : (vertex_free(v, tt, te) && vertex_free_at(v, te));
      if (ok) return te;
    }
    if (t >= HZ) continue;
    // wait
    if (vertex_free(v, tt, tt + tick)) open.push({t + 1 + h[v], t + 1, v, 0});
    for (auto [eid, u] : out[v]) {
      const auto& e = map.edges[eid];
      const long dt = ceil_ticks(e.w);
      if (h[u] == std::numeric_limits<long>::max()) continue;
      if (!edge_free(eid, tt, tt + e.w)) continue;
      const double ta = static_cast<double>(t + dt) * tick;
      if (!vertex_free_at(u, ta)) continue;
      open.push({t + dt + h[u], t + dt, u, 1});
    }
  }
  return std::nullopt;
}

}  // namespace mmtamp::validate
