#pragma once

// Reservation tables, safe intervals and the single-subplan SIPP search.

#include <queue>
#include <vector>

#include "mmtamp/roadmap.hpp"

namespace mmtamp::pbsat {

/// Half-open [lo, hi).
struct Interval {
  double lo = 0.0;
  double hi = kInf;

  friend bool operator==(const Interval&, const Interval&) = default;
};

inline bool overlaps(const Interval& a, const Interval& b, double tol = kGeomEps) {
  return a.lo < b.hi - tol && b.lo < a.hi - tol;
}

inline void merge_intervals(std::vector<Interval>& v) {
  std::sort(v.begin(), v.end(), [](const Interval& a, const Interval& b) {
    return a.lo < b.lo || (a.lo == b.lo && a.hi < b.hi);
  });
  std::vector<Interval> out;
  for (const auto& x : v) {
    if (!(x.hi > x.lo)) continue;
    if (!out.empty() && x.lo <= out.back().hi)
      out.back().hi = std::max(out.back().hi, x.hi);
    else
      out.push_back(x);
  }
  v = std::move(out);
}

/// Reserved intervals per vertex (occupancy) and per edge (traversal).
class ReservationTable {
 public:
  ReservationTable() = default;
  ReservationTable(int num_vertices, int num_edges) : vertex_(num_vertices), edge_(num_edges) {}

  void reserve_vertex(int v, double lo, double hi) {
    if (hi > lo) vertex_.at(v).push_back({lo, hi});
  }
  void reserve_edge(int e, double lo, double hi) {
    if (hi > lo) edge_.at(e).push_back({lo, hi});
  }
  void finalize() {
    for (auto& v : vertex_) merge_intervals(v);
    for (auto& e : edge_) merge_intervals(e);
  }

  const std::vector<Interval>& vertex_reserved(int v) const { return vertex_.at(v); }
  const std::vector<Interval>& edge_reserved(int e) const { return edge_.at(e); }
  int num_vertices() const { return static_cast<int>(vertex_.size()); }
  int num_edges() const { return static_cast<int>(edge_.size()); }

  /// Maximal disjoint unreserved intervals of [0, inf), sorted.
  std::vector<Interval> safe_intervals(int v) const {
    std::vector<Interval> out;
    double start = 0.0;
    for (const auto& r : vertex_.at(v)) {
      if (r.lo > start) out.push_back({start, r.lo});
      start = std::max(start, r.hi);
    }
    if (start < kInf) out.push_back({start, kInf});
    return out;
  }

  /// Earliest departure >= d along edge e of duration w whose traversal
  /// [d, d + w) avoids every reservation of e.
  double earliest_departure(int e, double w, double d) const {
    for (const auto& r : edge_.at(e))
      if (d > r.lo - w && d < r.hi) d = r.hi;
    return d;
  }

 private:
  std::vector<std::vector<Interval>> vertex_;
  std::vector<std::vector<Interval>> edge_;
};

struct Step {
  int vertex = -1;
  double arrive = 0.0;
  double depart = 0.0;

  friend bool operator==(const Step&, const Step&) = default;
};

/// Timed walk on one robot's roadmap: edges[i] joins steps[i] and steps[i+1].
struct Path {
  std::vector<Step> steps;
  std::vector<int> edges;

  friend bool operator==(const Path&, const Path&) = default;

  double start() const { return steps.front().arrive; }
  double end() const { return steps.back().depart; }
  double first_departure() const { return steps.front().depart; }
  double arrival() const { return steps.back().arrive; }

  std::uint64_t fingerprint() const {
    std::uint64_t h = 0x9a7b;
    for (const auto& s : steps)
      h = hash_double(hash_double(hash_mix(h, static_cast<std::uint64_t>(s.vertex)), s.arrive), s.depart);
    for (int e : edges) h = hash_mix(h, static_cast<std::uint64_t>(e));
    return h;
  }
};

/// Shortest traversal time to `goal` over allowed edges (reverse Dijkstra).
inline std::vector<double> distances_to(const roadmap::MultiModalRoadmap& map,
                                        const std::vector<char>* allowed, int goal) {
  std::vector<std::vector<int>> in(map.vertices.size());
  for (const auto& e : map.edges)
    if (!allowed || (*allowed)[e.id]) in[e.e].push_back(e.id);
  std::vector<double> d(map.vertices.size(), kInf);
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  d[goal] = 0.0;
  pq.emplace(0.0, goal);
  while (!pq.empty()) {
    const auto [dv, v] = pq.top();
    pq.pop();
    if (dv > d[v]) continue;
    for (int eid : in[v]) {
      const auto& e = map.edges[eid];
      if (dv + e.w < d[e.s]) {
        d[e.s] = dv + e.w;
        pq.emplace(d[e.s], e.s);
      }
    }
  }
  return d;
}

struct SippQuery {
  const roadmap::MultiModalRoadmap* map = nullptr;
  const std::vector<char>* allowed = nullptr;  // per edge; null = all edges
  const ReservationTable* rt = nullptr;
  const std::vector<double>* heuristic = nullptr;  // null = computed
  int start = -1;
  int goal = -1;
  double t0 = 0.0;
  double t_min = 0.0;
  /// true: wait at the goal until t_min; false: arrive no earlier than t_min.
  bool pad = true;
  /// goal interval must be unbounded (robot parks for good)
  bool hold_forever = false;
  double latest_departure = kInf;  // first departure from start
};

/// A goal reached by SIPP: the path (last step departs at its arrival) and
/// the safe interval the goal vertex was reached in.
struct SippGoal {
  Path path;
  Interval interval;
  /// end time after padding: max(arrival, t_min) for padded queries
  double end = 0.0;
};

/// A* over (vertex, safe interval) states; next() yields goal states in
/// order of arrival time.
class Sipp {
 public:
  explicit Sipp(const SippQuery& q) : q_(q) {
    const auto& map = *q_.map;
    if (!q_.heuristic) {
      own_h_ = distances_to(map, q_.allowed, q_.goal);
      h_ = &own_h_;
    } else {
      h_ = q_.heuristic;
    }
    out_.resize(map.vertices.size());
    for (const auto& e : map.edges)
      if (!q_.allowed || (*q_.allowed)[e.id]) out_[e.s].push_back(e.id);
    safe_.resize(map.vertices.size());
    if (!std::isfinite((*h_)[q_.start])) return;
    const auto& si = safe(q_.start);
    for (std::size_t i = 0; i < si.size(); ++i)
      if (si[i].lo <= q_.t0 && q_.t0 < si[i].hi) {
        push(q_.start, static_cast<int>(i), q_.t0, -1, -1, 0.0);
        break;
      }
  }

  std::optional<SippGoal> next() {
    while (!open_.empty()) {
      const auto top = open_.top();
      open_.pop();
      if (states_[top.state].closed || top.g > states_[top.state].g) continue;
      states_[top.state].closed = true;
      expand(top.state);  // may grow states_
      const State st = states_[top.state];
      if (st.v != q_.goal) continue;
      const auto& I = safe(st.v)[st.iv];
      if (q_.hold_forever && std::isfinite(I.hi)) continue;
      double end = st.g;
      if (q_.pad) {
        end = std::max(st.g, q_.t_min);
        if (!(end < I.hi)) continue;
      } else if (st.g < q_.t_min) {
        continue;
      }
      SippGoal out;
      out.path = extract(top.state);
      out.path.steps.back().depart = end;
      out.interval = I;
      out.end = end;
      return out;
    }
    return std::nullopt;
  }

  std::size_t expanded() const { return expanded_; }

 private:
  struct State {
    int v, iv;
    double g;
    int parent, edge;
    double depart;  // departure from parent
    bool closed = false;
  };
  struct Open {
    double f, g;
    int v, iv, state;
    bool operator>(const Open& o) const {
      return std::tie(f, g, v, iv) > std::tie(o.f, o.g, o.v, o.iv);
    }
  };

  const std::vector<Interval>& safe(int v) {
    auto& s = safe_[v];
    if (!s) s = q_.rt ? q_.rt->safe_intervals(v) : std::vector<Interval>{{0.0, kInf}};
    return *s;
  }

  void push(int v, int iv, double g, int parent, int edge, double depart) {
    // an early start on the goal must not shadow a later arrival there
    const bool early_start = parent < 0 && !q_.pad && v == q_.goal && g < q_.t_min;
    auto key = std::make_tuple(v, iv, early_start);
    auto it = index_.find(key);
    if (it != index_.end()) {
      auto& st = states_[it->second];
      if (st.closed || st.g <= g) return;
      st.g = g;
      st.parent = parent;
      st.edge = edge;
      st.depart = depart;
      open_.push({g + (*h_)[v], g, v, iv, it->second});
      return;
    }
    const int id = static_cast<int>(states_.size());
    states_.push_back({v, iv, g, parent, edge, depart});
    index_.emplace(key, id);
    open_.push({g + (*h_)[v], g, v, iv, id});
  }

  void expand(int sid) {
    ++expanded_;
    const State st = states_[sid];
    const Interval I = safe(st.v)[st.iv];
    const bool initial = st.parent < 0;
    for (int eid : out_[st.v]) {
      const auto& e = q_.map->edges[eid];
      if (!std::isfinite((*h_)[e.e])) continue;
      const auto& sj = safe(e.e);
      for (std::size_t j = 0; j < sj.size(); ++j) {
        const auto& J = sj[j];
        if (J.hi <= st.g + e.w) continue;
        if (J.lo - e.w > I.hi) break;
        double d = std::max(st.g, J.lo - e.w);
        if (!q_.pad && e.e == q_.goal) d = std::max(d, q_.t_min - e.w);
        if (q_.rt) d = q_.rt->earliest_departure(eid, e.w, d);
        if (d > I.hi) continue;
        if (initial && d > q_.latest_departure) continue;
        double a = d + e.w;
        if (!q_.pad && e.e == q_.goal) a = std::max(a, q_.t_min);  // rounding of t_min - w + w
        if (a >= J.hi || a < J.lo) continue;
        push(e.e, static_cast<int>(j), a, sid, eid, d);
      }
    }
  }

  Path extract(int sid) const {
    Path p;
    std::vector<int> chain;
    for (int s = sid; s >= 0; s = states_[s].parent) chain.push_back(s);
    std::reverse(chain.begin(), chain.end());
    for (std::size_t i = 0; i < chain.size(); ++i) {
      const auto& st = states_[chain[i]];
      Step step{st.v, st.g, st.g};
      if (i + 1 < chain.size()) {
        step.depart = states_[chain[i + 1]].depart;
        p.edges.push_back(states_[chain[i + 1]].edge);
      }
      p.steps.push_back(step);
    }
    return p;
  }

  SippQuery q_;
  const std::vector<double>* h_ = nullptr;
  std::vector<double> own_h_;
  std::vector<std::vector<int>> out_;
  std::vector<std::optional<std::vector<Interval>>> safe_;
  std::vector<State> states_;
  std::map<std::tuple<int, int, bool>, int> index_;
  std::priority_queue<Open, std::vector<Open>, std::greater<>> open_;
  std::size_t expanded_ = 0;
};

/// Earliest-ending path for a single query, or nullopt.
inline std::optional<SippGoal> rsipp(const SippQuery& q) { return Sipp(q).next(); }

}  // namespace mmtamp::pbsat
