#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "sbcbf/errors.hpp"
#include "sbcbf/linalg.hpp"

namespace sbcbf {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm_sq(Vec2 a) { return a.x * a.x + a.y * a.y; }
inline double norm(Vec2 a) { return std::sqrt(norm_sq(a)); }

struct Disc {
  Vec2 center;
  double radius = 0.0;
};

struct Rectangle {
  Vec2 min_corner;
  Vec2 max_corner;
};

struct UnionOfDiscs {
  std::vector<Disc> discs;
};

struct Polygon {
  std::vector<Vec2> vertices;  // counter-clockwise
};

using Shape = std::variant<Disc, Rectangle, UnionOfDiscs, Polygon>;

// ---------------------------------------------------------------------------
// Boundary parameterization
// ---------------------------------------------------------------------------

// A boundary is a deterministic list of pieces walked in order: straight
// segments (rectangle, polygon edges) and circular arcs (discs, exposed
// arcs of a disc union).
struct SegmentPiece {
  Vec2 a, b;
};

struct ArcPiece {
  Vec2 center;
  double radius = 0.0;
  double start_angle = 0.0;  // radians, CCW
  double sweep = 0.0;        // radians, > 0
};

struct BoundaryPiece {
  std::variant<SegmentPiece, ArcPiece> geom;
  double length = 0.0;
};

using Boundary = std::vector<BoundaryPiece>;

namespace detail {

constexpr double two_pi = 2.0 * std::numbers::pi;

inline double wrap_angle(double a) {
  a = std::fmod(a, two_pi);
  if (a < 0.0) a += two_pi;
  return a;
}

// Angular intervals of disc d's circle covered by the interior of disc o.
// Result intervals are in [0, 2pi) and may be split at the wrap point.
inline void covered_intervals(const Disc& d, const Disc& o,
                              std::vector<std::pair<double, double>>& out,
                              bool& fully_covered) {
  const Vec2 delta = o.center - d.center;
  const double dist = norm(delta);
  if (dist >= d.radius + o.radius) return;  // disjoint circles
  if (dist + d.radius <= o.radius) {
    fully_covered = true;
    return;
  }
  if (dist + o.radius <= d.radius) return;  // o inside d, does not touch d's circle
  const double cos_beta =
      (dist * dist + d.radius * d.radius - o.radius * o.radius) / (2.0 * dist * d.radius);
  const double beta = std::acos(std::clamp(cos_beta, -1.0, 1.0));
  const double theta = std::atan2(delta.y, delta.x);
  double lo = wrap_angle(theta - beta);
  double hi = wrap_angle(theta + beta);
  if (lo <= hi) {
    out.emplace_back(lo, hi);
  } else {
    out.emplace_back(lo, two_pi);
    out.emplace_back(0.0, hi);
  }
}

// Exposed (non-interior) arcs of each disc in a union, in disc order,
// each disc's arcs sorted by start angle.
inline std::vector<ArcPiece> exposed_arcs(const UnionOfDiscs& u) {
  std::vector<ArcPiece> arcs;
  for (std::size_t i = 0; i < u.discs.size(); ++i) {
    const Disc& d = u.discs[i];
    std::vector<std::pair<double, double>> covered;
    bool fully = false;
    for (std::size_t j = 0; j < u.discs.size(); ++j) {
      if (j == i) continue;
      covered_intervals(d, u.discs[j], covered, fully);
      if (fully) break;
    }
    if (fully) continue;
    if (covered.empty()) {
      arcs.push_back({d.center, d.radius, 0.0, two_pi});
      continue;
    }
    std::sort(covered.begin(), covered.end());
    std::vector<std::pair<double, double>> merged;
    for (const auto& iv : covered) {
      if (!merged.empty() && iv.first <= merged.back().second + 1e-15)
        merged.back().second = std::max(merged.back().second, iv.second);
      else
        merged.push_back(iv);
    }
    // Complement of merged intervals within [0, 2pi).
    double cursor = 0.0;
    for (const auto& iv : merged) {
      if (iv.first > cursor + 1e-12)
        arcs.push_back({d.center, d.radius, cursor, iv.first - cursor});
      cursor = std::max(cursor, iv.second);
    }
    if (cursor < two_pi - 1e-12)
      arcs.push_back({d.center, d.radius, cursor, two_pi - cursor});
  }
  return arcs;
}

}  // namespace detail

inline Boundary boundary_of(const Shape& shape) {
  Boundary b;
  if (const auto* d = std::get_if<Disc>(&shape)) {
    b.push_back({ArcPiece{d->center, d->radius, 0.0, detail::two_pi},
                 detail::two_pi * d->radius});
  } else if (const auto* r = std::get_if<Rectangle>(&shape)) {
    const Vec2 lo = r->min_corner, hi = r->max_corner;
    const std::array<Vec2, 4> corners = {lo, Vec2{hi.x, lo.y}, hi, Vec2{lo.x, hi.y}};
    for (int i = 0; i < 4; ++i) {
      const Vec2 a = corners[i], c = corners[(i + 1) % 4];
      b.push_back({SegmentPiece{a, c}, norm(c - a)});
    }
  } else if (const auto* u = std::get_if<UnionOfDiscs>(&shape)) {
    for (const auto& arc : detail::exposed_arcs(*u))
      b.push_back({arc, arc.sweep * arc.radius});
  } else if (const auto* p = std::get_if<Polygon>(&shape)) {
    const auto& v = p->vertices;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const Vec2 a = v[i], c = v[(i + 1) % v.size()];
      b.push_back({SegmentPiece{a, c}, norm(c - a)});
    }
  }
  return b;
}

inline double boundary_length(const Boundary& b) {
  double s = 0.0;
  for (const auto& p : b) s += p.length;
  return s;
}

inline Vec2 point_on_piece(const BoundaryPiece& piece, double s) {
  if (const auto* seg = std::get_if<SegmentPiece>(&piece.geom)) {
    const double t = piece.length > 0.0 ? s / piece.length : 0.0;
    return seg->a + (seg->b - seg->a) * t;
  }
  const auto& arc = std::get<ArcPiece>(piece.geom);
  const double angle =
      arc.start_angle + (arc.radius > 0.0 ? s / arc.radius : 0.0);
  return arc.center + Vec2{std::cos(angle), std::sin(angle)} * arc.radius;
}

// Point at arc length s along the whole boundary (s wrapped into [0, L)).
inline Vec2 point_at_arclength(const Boundary& b, double s) {
  const double total = boundary_length(b);
  if (total <= 0.0) {
    if (b.empty()) throw UnsupportedShape("boundary has no pieces");
    return point_on_piece(b.front(), 0.0);
  }
  s = std::fmod(s, total);
  if (s < 0.0) s += total;
  for (const auto& piece : b) {
    if (s <= piece.length) return point_on_piece(piece, s);
    s -= piece.length;
  }
  return point_on_piece(b.back(), b.back().length);
}

// ---------------------------------------------------------------------------
// Membership and analytic distances
// ---------------------------------------------------------------------------

inline double distance_point_segment(Vec2 p, Vec2 a, Vec2 b) {
  const Vec2 ab = b - a;
  const double len_sq = norm_sq(ab);
  if (len_sq <= 0.0) return norm(p - a);
  const double t = std::clamp(dot(p - a, ab) / len_sq, 0.0, 1.0);
  return norm(p - (a + ab * t));
}

inline bool point_in_polygon(const Polygon& poly, Vec2 p) {
  bool inside = false;
  const auto& v = poly.vertices;
  for (std::size_t i = 0, j = v.size() - 1; i < v.size(); j = i++) {
    if ((v[i].y > p.y) != (v[j].y > p.y)) {
      const double xint = v[j].x + (v[i].x - v[j].x) * (p.y - v[j].y) / (v[i].y - v[j].y);
      if (p.x < xint) inside = !inside;
    }
  }
  return inside;
}

// Solid membership with tolerance (point on the boundary or inside).
inline bool contains(const Shape& shape, Vec2 p, double tol = 1e-9) {
  if (const auto* d = std::get_if<Disc>(&shape)) return norm(p - d->center) <= d->radius + tol;
  if (const auto* r = std::get_if<Rectangle>(&shape))
    return p.x >= r->min_corner.x - tol && p.x <= r->max_corner.x + tol &&
           p.y >= r->min_corner.y - tol && p.y <= r->max_corner.y + tol;
  if (const auto* u = std::get_if<UnionOfDiscs>(&shape)) {
    for (const auto& d : u->discs)
      if (norm(p - d.center) <= d.radius + tol) return true;
    return false;
  }
  const auto& poly = std::get<Polygon>(shape);
  if (point_in_polygon(poly, p)) return true;
  for (std::size_t i = 0; i < poly.vertices.size(); ++i)
    if (distance_point_segment(p, poly.vertices[i],
                               poly.vertices[(i + 1) % poly.vertices.size()]) <= tol)
      return true;
  return false;
}

// Distance from a point to the boundary curve of a shape (both sides).
inline double distance_to_boundary(const Shape& shape, Vec2 p) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& piece : boundary_of(shape)) {
    if (const auto* seg = std::get_if<SegmentPiece>(&piece.geom)) {
      best = std::min(best, distance_point_segment(p, seg->a, seg->b));
    } else {
      const auto& arc = std::get<ArcPiece>(piece.geom);
      const Vec2 delta = p - arc.center;
      const double ang = detail::wrap_angle(std::atan2(delta.y, delta.x));
      const double rel = detail::wrap_angle(ang - arc.start_angle);
      if (rel <= arc.sweep) {
        best = std::min(best, std::fabs(norm(delta) - arc.radius));
      } else {
        for (double a : {arc.start_angle, arc.start_angle + arc.sweep}) {
          const Vec2 end = arc.center + Vec2{std::cos(a), std::sin(a)} * arc.radius;
          best = std::min(best, norm(p - end));
        }
      }
    }
  }
  return best;
}

inline void validate_shape(const Shape& shape) {
  if (const auto* d = std::get_if<Disc>(&shape)) {
    if (d->radius <= 0.0) throw ValidationError("disc radius must be positive");
  } else if (const auto* r = std::get_if<Rectangle>(&shape)) {
    if (!(r->max_corner.x > r->min_corner.x && r->max_corner.y > r->min_corner.y))
      throw ValidationError("rectangle max_corner must strictly dominate min_corner");
  } else if (const auto* u = std::get_if<UnionOfDiscs>(&shape)) {
    if (u->discs.empty()) throw ValidationError("union of discs is empty");
    for (const auto& d : u->discs)
      if (d.radius <= 0.0) throw ValidationError("disc radius must be positive");
  } else {
    const auto& poly = std::get<Polygon>(shape);
    const auto& v = poly.vertices;
    if (v.size() < 3) throw ValidationError("polygon needs at least 3 vertices");
    // Simplicity: no crossing between non-adjacent edges.
    auto intersects = [](Vec2 a, Vec2 b, Vec2 c, Vec2 d) {
      const double d1 = cross(b - a, c - a), d2 = cross(b - a, d - a);
      const double d3 = cross(d - c, a - c), d4 = cross(d - c, b - c);
      return ((d1 > 0) != (d2 > 0)) && ((d3 > 0) != (d4 > 0));
    };
    const std::size_t n = v.size();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        if (j == i || (j + 1) % n == i || (i + 1) % n == j) continue;
        if (intersects(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n]))
          throw ValidationError("polygon is self-intersecting");
      }
  }
}

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

enum class SampleSource { BoundaryGrid, BoundaryUniformRandom, Explicit };

struct SampledShape {
  std::vector<Vec2> points;
  std::optional<double> rho;      // m^2, squared-metric covering radius
  std::optional<double> epsilon;  // m^2, = 2 * rho once certified
  SampleSource source = SampleSource::Explicit;
};

namespace detail {

// Counter-based splitmix64; keeps every draw reproducible and independent
// of call order.
inline std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d4a796d8b74579ULL + 0x0b1e0312ce2a6f95ULL;
  return z ^ (z >> 31);
}

inline double uniform01(std::uint64_t seed, std::uint64_t index) {
  const std::uint64_t bits = splitmix64(splitmix64(seed) ^ index);
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

}  // namespace detail

inline SampledShape sample_boundary_grid(const Shape& shape, std::size_t n) {
  if (n < 3) throw ValidationError("sample count must be at least 3");
  const Boundary b = boundary_of(shape);
  if (b.empty()) throw UnsupportedShape("shape has no boundary parameterization");
  const double total = boundary_length(b);
  SampledShape out;
  out.source = SampleSource::BoundaryGrid;
  out.points.reserve(n);
  for (std::size_t k = 0; k < n; ++k)
    out.points.push_back(point_at_arclength(b, total * static_cast<double>(k) / n));
  return out;
}

inline SampledShape sample_boundary_uniform(const Shape& shape, std::size_t n,
                                            std::uint64_t seed) {
  if (n < 3) throw ValidationError("sample count must be at least 3");
  const Boundary b = boundary_of(shape);
  if (b.empty()) throw UnsupportedShape("shape has no boundary parameterization");
  const double total = boundary_length(b);
  SampledShape out;
  out.source = SampleSource::BoundaryUniformRandom;
  out.points.reserve(n);
  for (std::size_t k = 0; k < n; ++k)
    out.points.push_back(point_at_arclength(b, total * detail::uniform01(seed, k)));
  return out;
}

// Empirical rho-net certificate over a dense boundary validation grid.
//
// rho bounds max over boundary q of min over samples p of ||q - p||^2. The
// validation grid is offset by half a step so it lands on inter-sample
// midpoints; the remaining grid resolution is absorbed by inflating with
// half the validation spacing (min-distance is 1-Lipschitz in q, and chord
// length never exceeds arc length). epsilon = 2 * rho.
inline SampledShape certify_rho(SampledShape sampled, const Shape& shape,
                                std::size_t validation_n) {
  if (sampled.points.empty()) throw EmptySampleSet("cannot certify an empty sample set");
  const Boundary b = boundary_of(shape);
  if (b.empty()) throw UnsupportedShape("shape has no boundary parameterization");
  const double total = boundary_length(b);

  double worst_sq = 0.0;
  const std::size_t m = std::max<std::size_t>(validation_n, 1);
  for (std::size_t k = 0; k < m; ++k) {
    const Vec2 q = point_at_arclength(b, total * (static_cast<double>(k) + 0.5) / m);
    double best = std::numeric_limits<double>::infinity();
    for (const Vec2& p : sampled.points) best = std::min(best, norm_sq(q - p));
    worst_sq = std::max(worst_sq, best);
    if (total <= 0.0) break;
  }
  const double half_step = total > 0.0 ? 0.5 * total / static_cast<double>(m) : 0.0;
  const double rho = std::pow(std::sqrt(worst_sq) + half_step, 2);
  sampled.rho = rho;
  sampled.epsilon = 2.0 * rho;
  return sampled;
}

inline std::size_t default_validation_n(std::size_t sample_count) {
  return std::min<std::size_t>(100 * sample_count, 1'000'000);
}

// ---------------------------------------------------------------------------
// Robot body
// ---------------------------------------------------------------------------

// Offset set relative to the position slice of the state; translation only.
struct RobotBody {
  SampledShape offset_set;
  std::array<std::size_t, 2> position_indices = {0, 1};
};

inline Vec2 position_slice(const RobotBody& body, const Vec& x) {
  const std::size_t need = std::max(body.position_indices[0], body.position_indices[1]) + 1;
  if (x.size() < need) throw DimensionMismatch("state dimension too small for position indices");
  return {x[body.position_indices[0]], x[body.position_indices[1]]};
}

inline std::vector<Vec2> robot_body_at(const RobotBody& body, const Vec& x) {
  const Vec2 p = position_slice(body, x);
  std::vector<Vec2> pts;
  pts.reserve(body.offset_set.points.size());
  for (const Vec2& e : body.offset_set.points) pts.push_back(p + e);
  return pts;
}

}  // namespace sbcbf
