#pragma once

// Continuous planar geometry: discs, capsules, convex polygons, swept areas
// and the collision predicates built on them.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "mmtamp/common.hpp"

namespace mmtamp::geom {

/// Axis-aligned rectangle.
struct Rect {
  double xmin = 0.0, ymin = 0.0, xmax = 0.0, ymax = 0.0;

  friend bool operator==(const Rect&, const Rect&) = default;
  bool empty() const { return !(xmax > xmin && ymax > ymin); }
  bool contains(const Config2& p) const {
    return p.x >= xmin && p.x <= xmax && p.y >= ymin && p.y <= ymax;
  }
  /// True iff a disc of radius r centered at p lies inside.
  bool contains_disc(const Config2& p, double r) const {
    return p.x - r >= xmin && p.x + r <= xmax && p.y - r >= ymin && p.y + r <= ymax;
  }
  bool intersects(const Rect& o) const {
    return xmin <= o.xmax && o.xmin <= xmax && ymin <= o.ymax && o.ymin <= ymax;
  }
  Rect intersection(const Rect& o) const {
    return {std::max(xmin, o.xmin), std::max(ymin, o.ymin), std::min(xmax, o.xmax),
            std::min(ymax, o.ymax)};
  }
  Rect inflated(double d) const { return {xmin - d, ymin - d, xmax + d, ymax + d}; }
  double area() const { return empty() ? 0.0 : (xmax - xmin) * (ymax - ymin); }
};

/// Convex polygon with counter-clockwise vertices.
struct ConvexPolygon {
  std::vector<Config2> pts;

  friend bool operator==(const ConvexPolygon&, const ConvexPolygon&) = default;

  static ConvexPolygon box(double cx, double cy, double hx, double hy) {
    return {{{cx - hx, cy - hy}, {cx + hx, cy - hy}, {cx + hx, cy + hy}, {cx - hx, cy + hy}}};
  }

  ConvexPolygon transformed(const Pose2& pose) const {
    ConvexPolygon out;
    out.pts.reserve(pts.size());
    for (const auto& p : pts) out.pts.push_back(pose.apply(p));
    return out;
  }
  ConvexPolygon translated(const Config2& d) const {
    ConvexPolygon out = *this;
    for (auto& p : out.pts) p = p + d;
    return out;
  }

  double signed_area() const {
    double a = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) a += pts[i].cross(pts[(i + 1) % pts.size()]);
    return 0.5 * a;
  }
  double area() const { return std::abs(signed_area()); }

  bool is_convex_ccw() const {
    if (pts.size() < 3) return false;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const auto& a = pts[i];
      const auto& b = pts[(i + 1) % pts.size()];
      const auto& c = pts[(i + 2) % pts.size()];
      if ((b - a).cross(c - b) < -1e-12) return false;
    }
    return signed_area() > 0.0;
  }

  bool contains(const Config2& p) const {
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const auto& a = pts[i];
      const auto& b = pts[(i + 1) % pts.size()];
      if ((b - a).cross(p - a) < 0.0) return false;
    }
    return !pts.empty();
  }

  Rect bbox() const {
    Rect r{kInf, kInf, -kInf, -kInf};
    for (const auto& p : pts) {
      r.xmin = std::min(r.xmin, p.x);
      r.ymin = std::min(r.ymin, p.y);
      r.xmax = std::max(r.xmax, p.x);
      r.ymax = std::max(r.ymax, p.y);
    }
    return r;
  }
};

/// Convex hull (Andrew's monotone chain); result is counter-clockwise.
inline ConvexPolygon convex_hull(std::vector<Config2> pts) {
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return {pts};
  std::vector<Config2> h(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && (h[k - 1] - h[k - 2]).cross(p - h[k - 2]) <= 0) --k;
    h[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && (h[k - 1] - h[k - 2]).cross(pts[i] - h[k - 2]) <= 0) --k;
    h[k++] = pts[i];
  }
  h.resize(k - 1);
  return {h};
}

/// Disc of radius r swept along segment [a, b]; a == b is a plain disc.
struct Capsule {
  Config2 a, b;
  double r = 0.0;

  friend bool operator==(const Capsule&, const Capsule&) = default;
  double area() const { return std::numbers::pi * r * r + 2.0 * r * distance(a, b); }
  Rect bbox() const {
    return Rect{std::min(a.x, b.x), std::min(a.y, b.y), std::max(a.x, b.x), std::max(a.y, b.y)}
        .inflated(r);
  }
};

inline double point_segment_distance(const Config2& p, const Config2& a, const Config2& b) {
  const Config2 ab = b - a;
  const double len2 = ab.dot(ab);
  if (len2 <= 0.0) return distance(p, a);
  const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return distance(p, a + ab * t);
}

inline bool segments_intersect(const Config2& p1, const Config2& p2, const Config2& q1,
                               const Config2& q2) {
  auto orient = [](const Config2& a, const Config2& b, const Config2& c) {
    const double v = (b - a).cross(c - a);
    return (v > 0) - (v < 0);
  };
  auto on_seg = [](const Config2& a, const Config2& b, const Config2& p) {
    return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= p.y &&
           p.y <= std::max(a.y, b.y);
  };
  const int o1 = orient(p1, p2, q1), o2 = orient(p1, p2, q2);
  const int o3 = orient(q1, q2, p1), o4 = orient(q1, q2, p2);
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && on_seg(p1, p2, q1)) return true;
  if (o2 == 0 && on_seg(p1, p2, q2)) return true;
  if (o3 == 0 && on_seg(q1, q2, p1)) return true;
  if (o4 == 0 && on_seg(q1, q2, p2)) return true;
  return false;
}

inline double segment_segment_distance(const Config2& p1, const Config2& p2, const Config2& q1,
                                       const Config2& q2) {
  if (segments_intersect(p1, p2, q1, q2)) return 0.0;
  return std::min({point_segment_distance(p1, q1, q2), point_segment_distance(p2, q1, q2),
                   point_segment_distance(q1, p1, p2), point_segment_distance(q2, p1, p2)});
}

/// Distance from a segment to a convex polygon (0 when they intersect).
inline double segment_polygon_distance(const Config2& a, const Config2& b,
                                       const ConvexPolygon& poly) {
  if (poly.contains(a) || poly.contains(b)) return 0.0;
  double d = kInf;
  const auto n = poly.pts.size();
  for (std::size_t i = 0; i < n; ++i) {
    d = std::min(d, segment_segment_distance(a, b, poly.pts[i], poly.pts[(i + 1) % n]));
    if (d == 0.0) return 0.0;
  }
  return d;
}

/// Separating-axis test; touching polygons (within eps) count as overlapping.
inline bool polygons_overlap(const ConvexPolygon& p, const ConvexPolygon& q,
                             double eps = kGeomEps) {
  auto separated_along = [eps](const ConvexPolygon& edges, const ConvexPolygon& other) {
    const auto n = edges.pts.size();
    for (std::size_t i = 0; i < n; ++i) {
      const Config2 e = edges.pts[(i + 1) % n] - edges.pts[i];
      const double len = e.norm();
      if (len <= 0.0) continue;
      const Config2 normal{e.y / len, -e.x / len};  // outward for CCW
      const double base = normal.dot(edges.pts[i]);
      double min_other = kInf;
      for (const auto& p : other.pts) min_other = std::min(min_other, normal.dot(p));
      if (min_other - base > eps) return true;
    }
    return false;
  };
  if (p.pts.empty() || q.pts.empty()) return false;
  return !separated_along(p, q) && !separated_along(q, p);
}

inline bool capsules_overlap(const Capsule& c1, const Capsule& c2, double eps = kGeomEps) {
  return segment_segment_distance(c1.a, c1.b, c2.a, c2.b) <= c1.r + c2.r + eps;
}

inline bool capsule_polygon_overlap(const Capsule& c, const ConvexPolygon& p,
                                    double eps = kGeomEps) {
  return segment_polygon_distance(c.a, c.b, p) <= c.r + eps;
}

using Piece = std::variant<Capsule, ConvexPolygon>;

inline Rect piece_bbox(const Piece& piece) {
  return std::visit([](const auto& s) { return s.bbox(); }, piece);
}

inline bool pieces_overlap(const Piece& a, const Piece& b) {
  if (const auto* ca = std::get_if<Capsule>(&a)) {
    if (const auto* cb = std::get_if<Capsule>(&b)) return capsules_overlap(*ca, *cb);
    return capsule_polygon_overlap(*ca, std::get<ConvexPolygon>(b));
  }
  const auto& pa = std::get<ConvexPolygon>(a);
  if (const auto* cb = std::get_if<Capsule>(&b)) return capsule_polygon_overlap(*cb, pa);
  return polygons_overlap(pa, std::get<ConvexPolygon>(b));
}

inline bool piece_contains(const Piece& piece, const Config2& p) {
  if (const auto* c = std::get_if<Capsule>(&piece))
    return point_segment_distance(p, c->a, c->b) <= c->r;
  return std::get<ConvexPolygon>(piece).contains(p);
}

/// Spatial footprint swept by a robot (and its load) or occupied by an object.
/// A finite union of convex pieces; carries no timing.
struct SweptArea {
  std::string owner;
  std::vector<Piece> pieces;

  Rect bbox() const {
    Rect r{kInf, kInf, -kInf, -kInf};
    for (const auto& p : pieces) {
      const Rect b = piece_bbox(p);
      r = {std::min(r.xmin, b.xmin), std::min(r.ymin, b.ymin), std::max(r.xmax, b.xmax),
           std::max(r.ymax, b.ymax)};
    }
    return r;
  }
  bool contains(const Config2& p) const {
    return std::any_of(pieces.begin(), pieces.end(),
                       [&](const Piece& piece) { return piece_contains(piece, p); });
  }
  /// Union area by midpoint-rule integration on a grid of the given cell size.
  double area(double cell = 1e-3) const {
    if (pieces.size() == 1) {
      if (const auto* c = std::get_if<Capsule>(&pieces.front())) return c->area();
      return std::get<ConvexPolygon>(pieces.front()).area();
    }
    const Rect b = bbox();
    const auto nx = static_cast<long>(std::ceil((b.xmax - b.xmin) / cell));
    const auto ny = static_cast<long>(std::ceil((b.ymax - b.ymin) / cell));
    long hits = 0;
    for (long i = 0; i < nx; ++i)
      for (long j = 0; j < ny; ++j)
        if (contains({b.xmin + (i + 0.5) * cell, b.ymin + (j + 0.5) * cell})) ++hits;
    return static_cast<double>(hits) * cell * cell;
  }
};

inline bool areas_overlap(const SweptArea& a, const SweptArea& b) {
  if (!a.bbox().inflated(kGeomEps).intersects(b.bbox())) return false;
  for (const auto& pa : a.pieces) {
    const Rect ba = piece_bbox(pa).inflated(kGeomEps);
    for (const auto& pb : b.pieces)
      if (ba.intersects(piece_bbox(pb)) && pieces_overlap(pa, pb)) return true;
  }
  return false;
}

/// Bounded planar workspace with static convex obstacles.
struct Workspace2D {
  Rect bounds;
  std::vector<ConvexPolygon> static_obstacles;
};

/// Geometry of a disc robot relevant to collision checking.
struct DiscBody {
  double radius = 0.0;
  Rect reach;  // configurations outside are invalid
};

/// An object held rigidly by a robot: the robot center sits at `grasp` in the
/// object frame, and the object keeps heading `theta` while carried.
struct Carried {
  ConvexPolygon footprint;  // object frame
  Config2 grasp;
  double theta = 0.0;

  Pose2 object_pose(const Config2& robot) const {
    const Pose2 rot{0.0, 0.0, theta};
    const Config2 off = rot.rotate(grasp);
    return {robot.x - off.x, robot.y - off.y, theta};
  }
  ConvexPolygon world_footprint(const Config2& robot) const {
    return footprint.transformed(object_pose(robot));
  }
};

inline bool polygon_in_bounds(const ConvexPolygon& p, const Rect& bounds) {
  return std::all_of(p.pts.begin(), p.pts.end(), [&](const Config2& q) { return bounds.contains(q); });
}

/// True iff the robot disc (and carried footprint) at `config` is inside the
/// workspace and reachable region and touches no static obstacle.
inline bool config_free(const Workspace2D& ws, const DiscBody& body, const Config2& config,
                        const Carried* carried = nullptr) {
  if (!ws.bounds.contains_disc(config, body.radius)) return false;
  if (!body.reach.contains(config)) return false;
  const Capsule disc{config, config, body.radius};
  for (const auto& obs : ws.static_obstacles)
    if (capsule_polygon_overlap(disc, obs)) return false;
  if (carried) {
    const auto fp = carried->world_footprint(config);
    if (!polygon_in_bounds(fp, ws.bounds)) return false;
    for (const auto& obs : ws.static_obstacles)
      if (polygons_overlap(fp, obs)) return false;
  }
  return true;
}

/// Conservative area swept by the robot moving in a straight line from `from`
/// to `to`: a capsule, plus the hull of the carried footprint at both ends.
inline SweptArea sweep(const DiscBody& body, const Config2& from, const Config2& to,
                       const Carried* carried = nullptr, std::string owner = {}) {
  SweptArea area{std::move(owner), {}};
  area.pieces.emplace_back(Capsule{from, to, body.radius});
  if (carried) {
    const auto f0 = carried->world_footprint(from);
    if (from == to) {
      area.pieces.emplace_back(f0);
    } else {
      std::vector<Config2> pts = f0.pts;
      for (const auto& p : f0.pts) pts.push_back(p + (to - from));
      area.pieces.emplace_back(convex_hull(std::move(pts)));
    }
  }
  return area;
}

/// True iff a straight motion is inside the workspace and reachable region
/// and its sweep touches no static obstacle. Exact for convex pieces.
inline bool motion_free(const Workspace2D& ws, const DiscBody& body, const Config2& from,
                        const Config2& to, const Carried* carried = nullptr) {
  if (!config_free(ws, body, from, carried) || !config_free(ws, body, to, carried)) return false;
  const SweptArea area = sweep(body, from, to, carried);
  for (const auto& obs : ws.static_obstacles)
    for (const auto& piece : area.pieces)
      if (pieces_overlap(piece, obs)) return false;
  return true;
}

inline SweptArea object_area(const ConvexPolygon& footprint, const Pose2& pose,
                             std::string owner = {}) {
  return {std::move(owner), {footprint.transformed(pose)}};
}

struct SamplingOptions {
  int max_rejections = 10000;
};

/// Rejection-samples a free configuration uniformly from the reachable part
/// of the workspace.
template <class Rng>
Config2 sample_free_config(const Workspace2D& ws, const DiscBody& body, const Carried* carried,
                           Rng& rng, SamplingOptions opts = {}) {
  const Rect box = ws.bounds.intersection(body.reach);
  if (box.empty()) throw SamplingExhausted("reachable region does not meet workspace bounds");
  std::uniform_real_distribution<double> ux(box.xmin, box.xmax), uy(box.ymin, box.ymax);
  for (int i = 0; i <= opts.max_rejections; ++i) {
    const Config2 c{ux(rng), uy(rng)};
    if (config_free(ws, body, c, carried)) return c;
  }
  throw SamplingExhausted("no free configuration after " + std::to_string(opts.max_rejections) +
                          " rejections");
}

}  // namespace mmtamp::geom
