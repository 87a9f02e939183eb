#pragma once

// Priority-based search over subplans with assigned tasks.

#include <chrono>
#include <unordered_set>

#include "mmtamp/annotate.hpp"
#include "mmtamp/assign/subplans.hpp"
#include "mmtamp/pbsat/rsipp.hpp"

namespace mmtamp::pbsat {

/// One subplan on a full roadmap.
struct PathTask {
  int id = -1;
  int robot = -1;
  int index = -1;  // position in the robot's sequence
  assign::SubplanKind kind = assign::SubplanKind::Mode;
  Primitive tau;
  Mode mode;
  int task = -1;
  int k = -1;
  int start = -1;  // full-roadmap vertex
  int goal = -1;
  std::vector<char> allowed;  // per edge of the robot's roadmap
  bool last = false;
  double planned_end = 0.0;
  std::vector<int> predecessors;  // end(pred) <= end(this)
};

struct PbsProblem {
  const Scenario* scenario = nullptr;
  std::vector<const roadmap::MultiModalRoadmap*> maps;  // full roadmaps
  const CollisionSet* pi = nullptr;
  std::vector<PathTask> tasks;
  std::vector<std::vector<int>> by_robot;
  std::vector<assign::SubplanOrder> precedence;
};

/// Maps subplans (on assignment roadmaps) onto full roadmaps.
inline PbsProblem make_problem(const Scenario& s, const std::vector<roadmap::FullRoadmap>& full,
                               const CollisionSet& pi, const assign::SubplanSet& g) {
  PbsProblem pb;
  pb.scenario = &s;
  for (const auto& f : full) pb.maps.push_back(&f.map);
  pb.pi = &pi;
  pb.by_robot = g.by_robot;
  pb.precedence = g.precedence;
  for (const auto& x : g.subplans) {
    const auto& fr = full.at(x.robot);
    const auto& map = fr.map;
    PathTask t;
    t.id = x.id;
    t.robot = x.robot;
    t.index = x.index;
    t.kind = x.kind;
    t.tau = x.tau;
    t.mode = x.mode;
    t.task = x.task;
    t.k = x.k;
    t.start = fr.vertex_from_assignment.at(x.start_vertex);
    t.goal = fr.vertex_from_assignment.at(x.goal_vertex);
    t.planned_end = x.planned_end;
    t.last = x.index + 1 == static_cast<int>(g.by_robot[x.robot].size());
    t.allowed.assign(map.edges.size(), 0);
    if (x.kind == assign::SubplanKind::ModeChanging) {
      for (int e : map.manipulations.at(fr.manipulation_from_assignment.at(x.manipulation)).edges)
        t.allowed[e] = 1;
    } else if (x.kind == assign::SubplanKind::Long) {
      const auto comp = map.component(t.start);
      for (const auto& e : map.edges)
        if (e.kind != roadmap::EdgeKind::mode_changing && map.component(e.s) == comp &&
            map.component(e.e) == comp)
          t.allowed[e.id] = 1;
    }
    pb.tasks.push_back(std::move(t));
  }
  for (const auto& o : g.precedence) pb.tasks[o.b].predecessors.push_back(o.a);
  return pb;
}

struct Activity {
  int condition = -1;
  Interval when;
};

struct Collision {
  int a = -1, b = -1;  // subplan ids, a < b
  Interval when;
};

struct PbsOptions {
  int max_nodes = 2000;
  int max_rsipp_per_plan = 400;
};

struct PbsStats {
  int subplans = 0;        // #g
  int nodes = 0;           // #N
  long long rsipp_calls = 0;  // #rSIPP
  std::size_t used_pairs = 0;
  std::size_t total_pairs = 0;
  double eta = 0.0;
  int livelocks = 0;
  int skipped_intervals = 0;  // junction intervals not tried after a success
  double seconds = 0.0;       // t_P
  std::string failure;        // last failed replanning, empty on success
};

struct PbsResult {
  bool success = false;
  std::vector<Path> paths;  // per subplan
  double makespan = kInf;
  PbsStats stats;
};

namespace detail {

struct PtNode {
  std::vector<std::optional<Path>> paths;
  std::vector<std::vector<Activity>> activity;
  std::vector<std::vector<char>> higher;  // higher[i][j]: j has priority over i
};

class Search {
 public:
  Search(const PbsProblem& pb, const PbsOptions& opt) : pb_(pb), opt_(opt) {
    const auto& s = *pb.scenario;
    n_ = static_cast<int>(pb.tasks.size());
    const int no = static_cast<int>(s.objects.size());
    detacher_.assign(no, -1);
    attacher_.assign(no, -1);
    for (const auto& t : pb.tasks) {
      if (t.kind != assign::SubplanKind::ModeChanging) continue;
      if (t.tau.kind == PrimitiveKind::Detach) detacher_[t.tau.object] = t.id;
      if (t.tau.kind == PrimitiveKind::Attach) attacher_[t.tau.object] = t.id;
    }
    heuristic_.resize(n_);
  }

  PbsResult run() {
    using clock = std::chrono::steady_clock;
    const auto t0 = clock::now();
    PbsResult res;
    res.stats.subplans = n_;
    res.stats.total_pairs = pb_.pi->size();

    PtNode root;
    root.paths.assign(n_, std::nullopt);
    root.activity.assign(n_, {});
    root.higher.assign(n_, std::vector<char>(n_, 0));
    for (const auto& seq : pb_.by_robot)
      for (std::size_t i = 0; i + 1 < seq.size(); ++i) add_order(root, seq[i], seq[i + 1]);
    for (const auto& o : pb_.precedence)
      if (!root.higher[o.a][o.b]) add_order(root, o.a, o.b);
    nodes_ = 1;
    bool ok = true;
    while (ok) {
      const int g = next_unplanned(root);
      if (g < 0) break;
      ok = update_node(root, g);
    }
    std::vector<PtNode> stack;
    if (ok) stack.push_back(std::move(root));
    while (!stack.empty()) {
      PtNode node = std::move(stack.back());
      stack.pop_back();
      const auto c = first_collision(node);
      if (!c) {
        res.success = true;
        res.makespan = 0.0;
        for (int i = 0; i < n_; ++i) {
          res.paths.push_back(*node.paths[i]);
          if (pb_.tasks[i].last) res.makespan = std::max(res.makespan, node.paths[i]->end());
        }
        break;
      }
      if (nodes_ >= opt_.max_nodes) break;
      // child that favors the earlier-ending subplan is explored first
      int first = c->a, second = c->b;
      if (std::make_pair(node.paths[c->b]->end(), c->b) < std::make_pair(node.paths[c->a]->end(), c->a))
        std::swap(first, second);
      std::vector<PtNode> children;
      for (const auto& [hi, lo] : {std::make_pair(first, second), std::make_pair(second, first)}) {
        if (node.higher[hi][lo]) continue;  // would create a cycle
        PtNode child = node;
        add_order(child, hi, lo);
        ++nodes_;
        if (update_node(child, lo)) children.push_back(std::move(child));
        if (nodes_ >= opt_.max_nodes) break;
      }
      for (auto it = children.rbegin(); it != children.rend(); ++it) stack.push_back(std::move(*it));
    }
    res.stats.nodes = nodes_;
    res.stats.rsipp_calls = rsipp_calls_;
    res.stats.used_pairs = used_.size();
    res.stats.eta = res.stats.total_pairs ? static_cast<double>(used_.size()) / res.stats.total_pairs : 0.0;
    res.stats.livelocks = livelocks_;
    res.stats.skipped_intervals = skipped_;
    res.stats.seconds = std::chrono::duration<double>(clock::now() - t0).count();
    if (!res.success) res.stats.failure = nodes_ >= opt_.max_nodes ? "node limit reached; " + failure_ : failure_;
    return res;
  }

  // exposed for tests
  ReservationTable reservation_table(const PtNode& node, int g) { return build_rt(node, g); }

 private:
  const PbsProblem& pb_;
  PbsOptions opt_;
  int n_ = 0;
  int nodes_ = 0;
  long long rsipp_calls_ = 0;
  int livelocks_ = 0;
  int skipped_ = 0;
  int budget_ = 0;
  std::vector<int> detacher_, attacher_;
  std::vector<std::optional<std::vector<double>>> heuristic_;
  std::unordered_set<std::uint64_t> used_;
  std::string failure_;

  void fail(int g, const char* why) {
    const auto& t = pb_.tasks[g];
    const auto& s = *pb_.scenario;
    failure_ = std::string(why) + " at subplan " + std::to_string(g) + " (" + s.robots[t.robot].id + " #" +
               std::to_string(t.index) + " " + std::string(assign::to_string(t.kind)) + " " + describe(s, t.tau) + ")";
  }

  const CollisionSet& pi() const { return *pb_.pi; }

  static void add_order(PtNode& n, int a, int b) {
    const int N = static_cast<int>(n.higher.size());
    std::vector<int> up{a}, down{b};
    for (int x = 0; x < N; ++x) {
      if (n.higher[a][x]) up.push_back(x);
      if (n.higher[x][b]) down.push_back(x);
    }
    for (int y : down)
      for (int x : up) n.higher[y][x] = 1;
  }

  /// Topological key: ancestor count, then planned end, robot, index.
  auto rank_key(const PtNode& n, int g) const {
    int anc = 0;
    for (char c : n.higher[g]) anc += c;
    const auto& t = pb_.tasks[g];
    return std::make_tuple(anc, t.planned_end, t.robot, t.index);
  }

  int next_unplanned(const PtNode& n) const {
    int best = -1;
    for (int g = 0; g < n_; ++g) {
      if (n.paths[g]) continue;
      bool ready = true;
      for (int x = 0; x < n_ && ready; ++x) ready = !(n.higher[g][x] && !n.paths[x]);
      if (!ready) continue;
      if (best < 0 || rank_key(n, g) < rank_key(n, best)) best = g;
    }
    return best;
  }

  std::vector<Activity> activity_of(int g, const Path& p) const {
    const auto& t = pb_.tasks[g];
    const auto& idx = pi().index;
    std::vector<Activity> out;
    for (std::size_t i = 0; i < p.steps.size(); ++i) {
      const auto& st = p.steps[i];
      const double hi = (t.last && i + 1 == p.steps.size()) ? kInf : st.depart;
      if (hi > st.arrive) out.push_back({idx.vertex(t.robot, st.vertex), {st.arrive, hi}});
      if (i < p.edges.size())
        out.push_back({idx.edge(t.robot, p.edges[i]), {st.depart, p.steps[i + 1].arrive}});
    }
    if (t.kind == assign::SubplanKind::ModeChanging) {
      if (t.tau.kind == PrimitiveKind::Detach)
        out.push_back({idx.object(t.tau.object, Pole::Start), {0.0, p.first_departure()}});
      if (t.tau.kind == PrimitiveKind::Attach)
        out.push_back({idx.object(t.tau.object, Pole::Goal), {p.arrival(), kInf}});
    }
    return out;
  }

  bool robot_condition(int c) const { return c < pi().index.object_base(); }

  void mark_used(int a, int b) {
    used_.insert((static_cast<std::uint64_t>(std::min(a, b)) << 32) |
                 static_cast<std::uint64_t>(std::max(a, b)));
  }

  /// Condition ids of robot r touched by `c` in Π.
  template <class F>
  void for_robot_neighbors(int c, int r, F&& f) const {
    for (int n : pi().neighbors_of(c)) {
      const auto cond = pi().index.decode(n);
      if (cond.type != Condition::Type::Object && cond.robot == r) f(n, cond);
    }
  }

  ReservationTable build_rt(const PtNode& node, int g) {
    const auto& t = pb_.tasks[g];
    const auto& map = *pb_.maps[t.robot];
    const auto& idx = pi().index;
    ReservationTable rt(static_cast<int>(map.vertices.size()), static_cast<int>(map.edges.size()));
    auto reserve = [&](int src, const Interval& when) {
      for_robot_neighbors(src, t.robot, [&](int n, const Condition& cond) {
        mark_used(src, n);
        if (cond.type == Condition::Type::Vertex)
          rt.reserve_vertex(cond.index, when.lo, when.hi);
        else
          rt.reserve_edge(cond.index, when.lo, when.hi);
      });
    };
    for (int h = 0; h < n_; ++h) {
      if (h == g || !node.paths[h] || !node.higher[g][h]) continue;
      const bool same = pb_.tasks[h].robot == t.robot;
      for (const auto& a : node.activity[h]) {
        if (same && robot_condition(a.condition)) continue;
        reserve(a.condition, a.when);
      }
    }
    const int no = static_cast<int>(pb_.scenario->objects.size());
    // an object stays at its start unless its Detach is planned with priority
    for (int o = 0; o < no; ++o) {
      const int d = detacher_[o];
      if (d == g) continue;
      if (d < 0 || !node.higher[g][d] || !node.paths[d]) reserve(idx.object(o, Pole::Start), {0.0, kInf});
    }
    rt.finalize();
    return rt;
  }

  double t_min(const PtNode& node, int g) const {
    double tm = 0.0;
    for (int p : pb_.tasks[g].predecessors)
      if (node.paths[p]) tm = std::max(tm, node.paths[p]->end());
    return tm;
  }

  /// Latest first departure for a Detach and earliest arrival for an Attach
  /// given higher-priority activity near the object's poles.
  std::pair<double, double> object_limits(const PtNode& node, int g) {
    const auto& t = pb_.tasks[g];
    double latest = kInf, earliest = 0.0;
    if (t.kind != assign::SubplanKind::ModeChanging) return {latest, earliest};
    const bool det = t.tau.kind == PrimitiveKind::Detach, att = t.tau.kind == PrimitiveKind::Attach;
    if (!det && !att) return {latest, earliest};
    const int pole = pi().index.object(t.tau.object, det ? Pole::Start : Pole::Goal);
    for (int h = 0; h < n_; ++h) {
      if (h == g || !node.paths[h] || !node.higher[g][h]) continue;
      for (const auto& a : node.activity[h]) {
        if (!robot_condition(a.condition) || !pi().contains(a.condition, pole)) continue;
        mark_used(a.condition, pole);
        if (det) latest = std::min(latest, a.when.lo);
        if (att) earliest = std::max(earliest, a.when.hi);
      }
    }
    return {latest, earliest};
  }

  const std::vector<double>& heuristic(int g) {
    auto& h = heuristic_[g];
    if (!h) {
      const auto& t = pb_.tasks[g];
      h = distances_to(*pb_.maps[t.robot], &t.allowed, t.goal);
    }
    return *h;
  }

  void set_path(PtNode& n, int g, std::optional<Path> p) {
    n.activity[g] = p ? activity_of(g, *p) : std::vector<Activity>{};
    n.paths[g] = std::move(p);
  }

  using Plan = std::vector<std::pair<int, Path>>;

  /// Plans seq[pos] from t0 and, recursively, the following
  /// subplans that already have paths or lie within `force_until`.
  std::optional<Plan> rsipp_rec(PtNode& node, const std::vector<int>& seq, std::size_t pos,
                                double t0, std::size_t force_until) {
    if (budget_ <= 0) return std::nullopt;
    --budget_;
    ++rsipp_calls_;
    const int g = seq[pos];
    const auto& t = pb_.tasks[g];
    const auto rt = build_rt(node, g);
    const auto [latest, earliest] = object_limits(node, g);
    SippQuery q;
    q.map = pb_.maps[t.robot];
    q.allowed = &t.allowed;
    q.rt = &rt;
    q.heuristic = &heuristic(g);
    q.start = t.start;
    q.goal = t.goal;
    q.t0 = t0;
    q.t_min = std::max(t_min(node, g), earliest);
    q.pad = t.kind != assign::SubplanKind::ModeChanging;
    q.hold_forever = t.last;
    q.latest_departure = latest;
    if (!std::isfinite(q.t_min)) return std::nullopt;
    Sipp sipp(q);
    const bool has_next = pos + 1 < seq.size();
    while (auto goal = sipp.next()) {
      if (!has_next || !(pos + 1 <= force_until || node.paths[seq[pos + 1]])) {
        return Plan{{g, std::move(goal->path)}};
      }
      // Junction: the next subplan may start at any time in [end, I.ub)
      // that is safe for it.
      std::vector<double> starts{goal->end};
      if (q.pad) {
        const int nx = seq[pos + 1];
        auto saved = node.paths[g];
        set_path(node, g, goal->path);
        const auto rt_next = build_rt(node, nx);
        set_path(node, g, saved);
        starts.clear();
        for (const auto& J : rt_next.safe_intervals(t.goal)) {
          if (J.hi <= goal->end || J.lo >= goal->interval.hi) continue;
          starts.push_back(std::max(goal->end, J.lo));
        }
      }
      for (std::size_t i = 0; i < starts.size(); ++i) {
        Path p = goal->path;
        p.steps.back().depart = starts[i];
        auto saved = node.paths[g];
        set_path(node, g, p);
        auto rest = rsipp_rec(node, seq, pos + 1, starts[i], force_until);
        set_path(node, g, saved);
        if (rest) {
          skipped_ += static_cast<int>(starts.size() - i - 1);
          rest->insert(rest->begin(), {g, std::move(p)});
          return rest;
        }
        if (budget_ <= 0) return std::nullopt;
      }
    }
    return std::nullopt;
  }

  /// PlanPaths: replans g, backtracking over earlier same-robot subplans.
  std::optional<Plan> plan_paths(PtNode& node, int g) {
    const auto& t = pb_.tasks[g];
    const auto& seq = pb_.by_robot[t.robot];
    budget_ = opt_.max_rsipp_per_plan;
    for (int pos = t.index; pos >= 0; --pos) {
      const double t0 = pos == 0 ? 0.0 : (node.paths[seq[pos - 1]] ? node.paths[seq[pos - 1]]->end() : kInf);
      if (!std::isfinite(t0)) return std::nullopt;
      auto plan = rsipp_rec(node, seq, static_cast<std::size_t>(pos), t0, static_cast<std::size_t>(t.index));
      if (plan) return plan;
      if (budget_ <= 0) return std::nullopt;
    }
    return std::nullopt;
  }

  bool conflicts(const PtNode& n, int a, int b) const {
    for (const auto& x : n.activity[a])
      for (const auto& y : n.activity[b])
        if (overlaps(x.when, y.when) && pi().contains(x.condition, y.condition)) return true;
    return false;
  }

  bool broken(const PtNode& n, int l) const {
    const auto& t = pb_.tasks[l];
    const auto& p = *n.paths[l];
    for (int k : t.predecessors)
      if (n.paths[k] && n.paths[k]->end() > p.end() + kTimeEps) return true;
    if (t.index > 0) {
      const auto& prev = n.paths[pb_.by_robot[t.robot][t.index - 1]];
      if (prev && (std::abs(prev->end() - p.start()) > kTimeEps ||
                   prev->steps.back().vertex != p.steps.front().vertex))
        return true;
    }
    return false;
  }

  /// Replans subplan gi and every lower-priority subplan that conflicts with it.
  bool update_node(PtNode& node, int gi) {
    std::set<int> R{gi};
    std::set<std::pair<int, std::uint64_t>> seen;
    int iterations = 0;
    while (!R.empty()) {
      int g = *R.begin();
      for (int x : R)
        if (rank_key(node, x) < rank_key(node, g)) g = x;
      if (++iterations > 10 * n_) {
        ++livelocks_;
        fail(g, "iteration limit");
        return false;
      }
      auto plan = plan_paths(node, g);
      if (!plan) {
        fail(g, budget_ <= 0 ? "rSIPP budget exhausted" : "no path");
        return false;
      }
      std::vector<int> changed;
      for (auto& [id, p] : *plan) {
        if (!seen.insert({id, p.fingerprint()}).second) {
          ++livelocks_;
          fail(id, "livelock");
          return false;
        }
        set_path(node, id, std::move(p));
        R.erase(id);
        changed.push_back(id);
      }
      for (int l = 0; l < n_; ++l) {
        if (!node.paths[l] || R.count(l) ||
            std::find(changed.begin(), changed.end(), l) != changed.end())
          continue;
        bool affected = broken(node, l);
        for (int h : changed)
          if (!affected && node.higher[l][h] && conflicts(node, l, h)) affected = true;
        if (affected) R.insert(l);
      }
    }
    return true;
  }

  std::optional<Collision> first_collision(const PtNode& n) const {
    std::optional<Collision> best;
    std::map<int, std::vector<std::pair<int, Interval>>> by_cond;
    for (int g = 0; g < n_; ++g)
      for (const auto& a : n.activity[g]) by_cond[a.condition].push_back({g, a.when});
    for (int g = 0; g < n_; ++g)
      for (const auto& a : n.activity[g])
        for (int c : pi().neighbors_of(a.condition)) {
          auto it = by_cond.find(c);
          if (it == by_cond.end()) continue;
          for (const auto& [h, w] : it->second) {
            if (h <= g || pb_.tasks[h].robot == pb_.tasks[g].robot) continue;
            if (n.higher[g][h] || n.higher[h][g]) continue;
            if (!overlaps(a.when, w)) continue;
            Collision col{g, h, {std::max(a.when.lo, w.lo), std::min(a.when.hi, w.hi)}};
            if (!best || std::tie(col.when.lo, col.a, col.b) < std::tie(best->when.lo, best->a, best->b))
              best = col;
          }
        }
    return best;
  }
};

}  // namespace detail

/// Collisions between mutually unordered planned subplans, earliest first.
/// With `orders` empty every cross-robot pair is considered.
inline std::vector<Collision> detect_collisions(const PbsProblem& pb, const std::vector<Path>& paths,
                                                const std::vector<std::vector<char>>* higher = nullptr) {
  const auto& pi = *pb.pi;
  const auto& idx = pi.index;
  std::vector<std::vector<Activity>> act(paths.size());
  for (std::size_t g = 0; g < paths.size(); ++g) {
    const auto& t = pb.tasks[g];
    const auto& p = paths[g];
    for (std::size_t i = 0; i < p.steps.size(); ++i) {
      const auto& st = p.steps[i];
      const double hi = (t.last && i + 1 == p.steps.size()) ? kInf : st.depart;
      if (hi > st.arrive) act[g].push_back({idx.vertex(t.robot, st.vertex), {st.arrive, hi}});
      if (i < p.edges.size()) act[g].push_back({idx.edge(t.robot, p.edges[i]), {st.depart, p.steps[i + 1].arrive}});
    }
    if (t.kind == assign::SubplanKind::ModeChanging && t.tau.kind == PrimitiveKind::Detach)
      act[g].push_back({idx.object(t.tau.object, Pole::Start), {0.0, p.first_departure()}});
    if (t.kind == assign::SubplanKind::ModeChanging && t.tau.kind == PrimitiveKind::Attach)
      act[g].push_back({idx.object(t.tau.object, Pole::Goal), {p.arrival(), kInf}});
  }
  std::map<std::pair<int, int>, Collision> found;
  for (std::size_t a = 0; a < paths.size(); ++a)
    for (std::size_t b = a + 1; b < paths.size(); ++b) {
      if (pb.tasks[a].robot == pb.tasks[b].robot) continue;
      if (higher && ((*higher)[a][b] || (*higher)[b][a])) continue;
      for (const auto& x : act[a])
        for (const auto& y : act[b])
          if (overlaps(x.when, y.when) && pi.contains(x.condition, y.condition)) {
            Collision c{static_cast<int>(a), static_cast<int>(b),
                        {std::max(x.when.lo, y.when.lo), std::min(x.when.hi, y.when.hi)}};
            auto key = std::make_pair(c.a, c.b);
            auto it = found.find(key);
            if (it == found.end() || c.when.lo < it->second.when.lo) found[key] = c;
          }
    }
  std::vector<Collision> out;
  for (const auto& [k, c] : found) out.push_back(c);
  std::sort(out.begin(), out.end(), [](const Collision& x, const Collision& y) {
    return std::tie(x.when.lo, x.a, x.b) < std::tie(y.when.lo, y.a, y.b);
  });
  return out;
}

inline PbsResult pbs_at(const PbsProblem& pb, const PbsOptions& opt = {}) {
  detail::Search search(pb, opt);
  return search.run();
}

}  // namespace mmtamp::pbsat
