#pragma once

// Collision annotation: conditions over roadmap vertices, edges and object
// poles, and the set Π of condition pairs whose areas overlap.

#include <algorithm>
#include <array>
#include <functional>
#include <span>
#include <thread>
#include <unordered_map>
#include <vector>

#include "mmtamp/roadmap.hpp"

namespace mmtamp {

enum class Pole { Start, Goal };  // ⊥, ⊤

struct Condition {
  enum class Type { Vertex, Edge, Object };
  Type type = Type::Vertex;
  int robot = -1;   // Vertex/Edge
  int index = -1;   // vertex id, edge id, or object index
  Pole pole = Pole::Start;

  friend bool operator==(const Condition&, const Condition&) = default;
};

/// Dense condition ids: per robot its vertices then its edges, followed by
/// two ids per object (start pole, goal pole).
class ConditionIndex {
 public:
  ConditionIndex() = default;
  ConditionIndex(const std::vector<const roadmap::MultiModalRoadmap*>& maps, int num_objects) {
    int next = 0;
    for (const auto* m : maps) {
      vertex_base_.push_back(next);
      next += static_cast<int>(m->vertices.size());
      edge_base_.push_back(next);
      next += static_cast<int>(m->edges.size());
    }
    object_base_ = next;
    total_ = next + 2 * num_objects;
  }

  int vertex(int robot, int v) const { return vertex_base_[robot] + v; }
  int edge(int robot, int e) const { return edge_base_[robot] + e; }
  int object(int o, Pole p) const { return object_base_ + 2 * o + (p == Pole::Goal ? 1 : 0); }
  int size() const { return total_; }
  int num_robots() const { return static_cast<int>(vertex_base_.size()); }
  int object_base() const { return object_base_; }

  Condition decode(int id) const {
    if (id >= object_base_)
      return {Condition::Type::Object, -1, (id - object_base_) / 2,
              (id - object_base_) % 2 ? Pole::Goal : Pole::Start};
    int r = num_robots() - 1;
    while (vertex_base_[r] > id) --r;
    if (id < edge_base_[r]) return {Condition::Type::Vertex, r, id - vertex_base_[r], Pole::Start};
    return {Condition::Type::Edge, r, id - edge_base_[r], Pole::Start};
  }
  int encode(const Condition& c) const {
    switch (c.type) {
      case Condition::Type::Vertex: return vertex(c.robot, c.index);
      case Condition::Type::Edge: return edge(c.robot, c.index);
      case Condition::Type::Object: return object(c.index, c.pole);
    }
    return -1;
  }
  friend bool operator==(const ConditionIndex&, const ConditionIndex&) = default;

 private:
  std::vector<int> vertex_base_;
  std::vector<int> edge_base_;
  int object_base_ = 0;
  int total_ = 0;
};

/// Π stored as a sorted pair list plus CSR adjacency over condition ids.
struct CollisionSet {
  ConditionIndex index;
  std::vector<std::pair<int, int>> pairs;  // a < b, sorted
  std::vector<int> offsets;
  std::vector<int> neighbors;
  std::size_t exact_checks = 0;

  void finalize() {
    std::sort(pairs.begin(), pairs.end());
    pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
    offsets.assign(static_cast<std::size_t>(index.size()) + 1, 0);
    for (const auto& [a, b] : pairs) {
      ++offsets[a + 1];
      ++offsets[b + 1];
    }
    for (std::size_t i = 1; i < offsets.size(); ++i) offsets[i] += offsets[i - 1];
    neighbors.assign(offsets.back(), 0);
    std::vector<int> fill(offsets.begin(), offsets.end() - 1);
    for (const auto& [a, b] : pairs) {
      neighbors[fill[a]++] = b;
      neighbors[fill[b]++] = a;
    }
    for (int c = 0; c < index.size(); ++c)
      std::sort(neighbors.begin() + offsets[c], neighbors.begin() + offsets[c + 1]);
  }

  std::span<const int> neighbors_of(int c) const {
    if (offsets.empty()) return {};
    return {neighbors.data() + offsets[c], static_cast<std::size_t>(offsets[c + 1] - offsets[c])};
  }
  bool contains(int a, int b) const {
    const auto n = neighbors_of(a);
    return std::binary_search(n.begin(), n.end(), b);
  }
  std::size_t size() const { return pairs.size(); }
};

// ---------------------------------------------------------------------------
// Condition geometry.

/// Occupied or swept area of a condition. A robot condition carrying
/// `exclude_object` is represented by its disc alone.
inline geom::SweptArea condition_area(const Scenario& s,
                                      const std::vector<const roadmap::MultiModalRoadmap*>& maps,
                                      const ConditionIndex& idx, int cid, int exclude_object = -1) {
  const auto c = idx.decode(cid);
  if (c.type == Condition::Type::Object) {
    const auto& o = s.objects.at(c.index);
    return geom::object_area(o.footprint, c.pole == Pole::Start ? o.start_pose : o.goal_pose, o.id);
  }
  const auto& map = *maps.at(c.robot);
  const auto body = s.robots.at(c.robot).body();
  if (c.type == Condition::Type::Vertex) {
    const auto& v = map.vertices.at(c.index);
    auto carried = roadmap::vertex_carried(s, v);
    if (roadmap::carried_object(v) == exclude_object) carried.reset();
    return geom::sweep(body, v.config, v.config, carried ? &*carried : nullptr,
                       s.robots[c.robot].id);
  }
  const auto& e = map.edges.at(c.index);
  auto carried = roadmap::edge_carried(s, e);
  if (roadmap::carried_object(e) == exclude_object) carried.reset();
  return geom::sweep(body, map.vertices[e.s].config, map.vertices[e.e].config,
                     carried ? &*carried : nullptr, s.robots[c.robot].id);
}

struct AnnotationOptions {
  int threads = 1;
  /// Only annotate conditions of mode-changing edges (assignment stage).
  bool mode_changing_only = false;
  double grid_cell = 0.1;
};

namespace detail {

struct PieceKey {
  int type;  // 0 disc sweep, 1 footprint sweep, 2 object pose
  int robot;
  int object;
  int grasp;
  std::array<double, 4> pts;

  bool operator==(const PieceKey&) const = default;
};

struct PieceKeyHash {
  std::size_t operator()(const PieceKey& k) const {
    std::uint64_t h = hash_mix(hash_mix(hash_mix(static_cast<std::uint64_t>(k.type),
                                                 static_cast<std::uint64_t>(k.robot + 1)),
                                        static_cast<std::uint64_t>(k.object + 1)),
                               static_cast<std::uint64_t>(k.grasp + 1));
    for (double d : k.pts) h = hash_double(h, d);
    return static_cast<std::size_t>(h);
  }
};

struct PieceTable {
  std::vector<geom::Piece> pieces;
  std::vector<geom::Rect> boxes;
  std::vector<int> owner;   // robot index, or -1 for object poses
  std::vector<int> object;  // footprint piece object, or -1 for discs
  std::unordered_map<PieceKey, int, PieceKeyHash> ids;

  int add(const PieceKey& key, const std::function<geom::Piece()>& make, int robot, int obj) {
    if (auto it = ids.find(key); it != ids.end()) return it->second;
    const int id = static_cast<int>(pieces.size());
    pieces.push_back(make());
    boxes.push_back(geom::piece_bbox(pieces.back()));
    owner.push_back(robot);
    object.push_back(obj);
    ids.emplace(key, id);
    return id;
  }
};

/// Uniform grid over piece bounding boxes.
class PieceGrid {
 public:
  PieceGrid(double cell) : cell_(cell) {}

  void insert(int id, const geom::Rect& b) {
    for_cells(b.inflated(kGeomEps), [&](std::uint64_t key) { cells_[key].push_back(id); });
  }

  template <class F>
  void query(const geom::Rect& b, std::vector<int>& stamp, int tag, F&& f) const {
    for_cells(b, [&](std::uint64_t key) {
      auto it = cells_.find(key);
      if (it == cells_.end()) return;
      for (int id : it->second) {
        if (stamp[id] == tag) continue;
        stamp[id] = tag;
        f(id);
      }
    });
  }

 private:
  template <class F>
  void for_cells(const geom::Rect& b, F&& f) const {
    const auto ix0 = static_cast<std::int64_t>(std::floor(b.xmin / cell_));
    const auto ix1 = static_cast<std::int64_t>(std::floor(b.xmax / cell_));
    const auto iy0 = static_cast<std::int64_t>(std::floor(b.ymin / cell_));
    const auto iy1 = static_cast<std::int64_t>(std::floor(b.ymax / cell_));
    for (auto ix = ix0; ix <= ix1; ++ix)
      for (auto iy = iy0; iy <= iy1; ++iy)
        f(hash_mix(static_cast<std::uint64_t>(ix), static_cast<std::uint64_t>(iy)));
  }

  double cell_;
  std::unordered_map<std::uint64_t, std::vector<int>> cells_;
};

inline bool boxes_touch(const geom::Rect& a, const geom::Rect& b) {
  return a.xmin <= b.xmax + kGeomEps && b.xmin <= a.xmax + kGeomEps &&
         a.ymin <= b.ymax + kGeomEps && b.ymin <= a.ymax + kGeomEps;
}

}  // namespace detail

/// Computes Π over all robots' roadmaps and the objects' poles. Identical
/// geometric pieces (shared configurations, reverse edges, reused spanner
/// configurations) are checked once. Deterministic for any thread count.
inline CollisionSet annotate_collisions(const Scenario& s,
                                        const std::vector<const roadmap::MultiModalRoadmap*>& maps,
                                        const AnnotationOptions& opt = {}) {
  using roadmap::EdgeKind;
  CollisionSet out;
  out.index = ConditionIndex(maps, static_cast<int>(s.objects.size()));
  const auto& idx = out.index;
  detail::PieceTable table;

  // condition -> pieces
  std::vector<std::vector<int>> cond_pieces(static_cast<std::size_t>(idx.size()));
  auto ordered = [](Config2 a, Config2 b) {
    if (b < a) std::swap(a, b);
    return std::array<double, 4>{a.x, a.y, b.x, b.y};
  };
  for (int r = 0; r < static_cast<int>(maps.size()); ++r) {
    const auto& map = *maps[r];
    const double radius = s.robots[r].radius;
    auto add_motion = [&](int cid, Config2 a, Config2 b, int obj, int grasp) {
      const auto pts = ordered(a, b);
      cond_pieces[cid].push_back(table.add(
          {0, r, -1, -1, pts}, [&] { return geom::Piece(geom::Capsule{a, b, radius}); }, r, -1));
      if (obj >= 0) {
        cond_pieces[cid].push_back(table.add(
            {1, r, obj, grasp, pts},
            [&] {
              const auto carried = s.objects[obj].carried(grasp);
              return geom::sweep(s.robots[r].body(), a, b, &carried).pieces.at(1);
            },
            r, obj));
      }
    };
    std::vector<char> vertex_used(map.vertices.size(), opt.mode_changing_only ? 0 : 1);
    for (const auto& e : map.edges) {
      if (opt.mode_changing_only && e.kind != EdgeKind::mode_changing) continue;
      add_motion(idx.edge(r, e.id), map.vertices[e.s].config, map.vertices[e.e].config,
                 roadmap::carried_object(e), e.grasp);
    }
    for (const auto& v : map.vertices) {
      if (!vertex_used[v.id]) continue;
      add_motion(idx.vertex(r, v.id), v.config, v.config, roadmap::carried_object(v), v.grasp);
    }
  }
  for (int o = 0; o < static_cast<int>(s.objects.size()); ++o)
    for (Pole p : {Pole::Start, Pole::Goal}) {
      const auto& obj = s.objects[o];
      const Pose2 pose = p == Pole::Start ? obj.start_pose : obj.goal_pose;
      cond_pieces[idx.object(o, p)].push_back(table.add(
          {2, -1, o, static_cast<int>(p), {pose.x, pose.y, pose.theta, 0.0}},
          [&] { return geom::Piece(obj.footprint.transformed(pose)); }, -1, o));
    }

  // piece -> conditions
  const int np = static_cast<int>(table.pieces.size());
  std::vector<std::vector<int>> users(static_cast<std::size_t>(np));
  for (int c = 0; c < idx.size(); ++c)
    for (int p : cond_pieces[c]) users[p].push_back(c);

  // Pieces grouped by owner: robots 0..N-1, then objects.
  const int nr = static_cast<int>(maps.size());
  std::vector<std::vector<int>> by_owner(static_cast<std::size_t>(nr) + 1);
  for (int p = 0; p < np; ++p) by_owner[table.owner[p] < 0 ? nr : table.owner[p]].push_back(p);

  // Piece pairs (query owner < target owner) with overlapping geometry.
  std::vector<std::pair<int, int>> hits;
  std::size_t checks = 0;
  for (int tgt = 1; tgt <= nr; ++tgt) {
    detail::PieceGrid grid(opt.grid_cell);
    for (int p : by_owner[tgt]) grid.insert(p, table.boxes[p]);
    std::vector<int> queries;
    for (int src = 0; src < tgt && src < nr; ++src)
      queries.insert(queries.end(), by_owner[src].begin(), by_owner[src].end());
    const int threads = std::max(1, std::min<int>(opt.threads, static_cast<int>(queries.size())));
    std::vector<std::vector<std::pair<int, int>>> local(static_cast<std::size_t>(threads));
    std::vector<std::size_t> local_checks(static_cast<std::size_t>(threads), 0);
    auto work = [&](int t) {
      std::vector<int> stamp(static_cast<std::size_t>(np), -1);
      const std::size_t lo = queries.size() * t / threads, hi = queries.size() * (t + 1) / threads;
      for (std::size_t qi = lo; qi < hi; ++qi) {
        const int p = queries[qi];
        grid.query(table.boxes[p], stamp, p, [&](int q) {
          if (!detail::boxes_touch(table.boxes[p], table.boxes[q])) return;
          // a footprint never collides with a pole of its own object
          if (table.owner[q] < 0 && table.object[p] >= 0 && table.object[p] == table.object[q])
            return;
          ++local_checks[t];
          if (geom::pieces_overlap(table.pieces[p], table.pieces[q])) local[t].emplace_back(p, q);
        });
      }
    };
    if (threads == 1) {
      work(0);
    } else {
      std::vector<std::thread> pool;
      for (int t = 0; t < threads; ++t) pool.emplace_back(work, t);
      for (auto& th : pool) th.join();
    }
    for (int t = 0; t < threads; ++t) {
      hits.insert(hits.end(), local[t].begin(), local[t].end());
      checks += local_checks[t];
    }
  }
  out.exact_checks = checks;

  for (const auto& [p, q] : hits)
    for (int a : users[p])
      for (int b : users[q]) out.pairs.emplace_back(std::min(a, b), std::max(a, b));
  out.finalize();
  return out;
}

}  // namespace mmtamp
