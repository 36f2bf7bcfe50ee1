#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "sbcbf/errors.hpp"
#include "sbcbf/geometry.hpp"
#include "sbcbf/linalg.hpp"

namespace sbcbf {

struct ActivePair {
  Vec2 e;                       // robot offset sample
  Vec2 o;                       // obstacle sample
  double squared_distance = 0;  // m^2, at the state where it was computed
  std::size_t body_index = 0;
  std::size_t obstacle_index = 0;
};

struct DistanceEvaluation {
  double min_squared = 0.0;
  std::vector<ActivePair> active;
  std::vector<Vec> gradients;  // one per active pair, embedded in state dimension
  double activation_tolerance = 0.0;
};

// Exact minimum over all body x obstacle pairs; ties broken by lowest
// (body index, obstacle index) lexicographically.
inline std::pair<double, ActivePair> sampled_min_squared(
    const std::vector<Vec2>& body_points, const std::vector<Vec2>& obstacle_points) {
  if (body_points.empty() || obstacle_points.empty())
    throw EmptySampleSet("sampled_min_squared needs non-empty point sets");
  double best = std::numeric_limits<double>::infinity();
  std::size_t bi = 0, oi = 0;
  for (std::size_t i = 0; i < body_points.size(); ++i) {
    const Vec2 v = body_points[i];
    for (std::size_t j = 0; j < obstacle_points.size(); ++j) {
      const double dx = v.x - obstacle_points[j].x;
      const double dy = v.y - obstacle_points[j].y;
      const double d2 = dx * dx + dy * dy;
      if (d2 < best) {
        best = d2;
        bi = i;
        oi = j;
      }
    }
  }
  ActivePair pair{body_points[bi], obstacle_points[oi], best, bi, oi};
  return {best, pair};
}

namespace detail {

inline Vec pair_gradient(Vec2 p, const ActivePair& pair, std::size_t n_x,
                         const std::array<std::size_t, 2>& position_indices) {
  // 2(x + e - o) on the position coordinates, zero elsewhere.
  Vec grad(n_x, 0.0);
  const Vec2 diff = (p + pair.e) - pair.o;
  grad[position_indices[0]] = 2.0 * diff.x;
  grad[position_indices[1]] = 2.0 * diff.y;
  return grad;
}

}  // namespace detail

// Active pair set I(x) widened by activation_tolerance, and the gradient
// union E(x) = { 2(x + e - o) } over active pairs.
inline DistanceEvaluation evaluate_distance(const Vec& x, const RobotBody& body,
                                            const std::vector<Vec2>& obstacle_points,
                                            double activation_tolerance) {
  if (activation_tolerance < 0.0)
    throw ValidationError("activation_tolerance must be non-negative");
  if (body.offset_set.points.empty() || obstacle_points.empty())
    throw EmptySampleSet("evaluate_distance needs non-empty sample sets");

  const Vec2 p = position_slice(body, x);
  double best = std::numeric_limits<double>::infinity();
  for (const Vec2& e : body.offset_set.points) {
    const Vec2 v = p + e;
    for (const Vec2& o : obstacle_points) {
      const double dx = v.x - o.x, dy = v.y - o.y;
      best = std::min(best, dx * dx + dy * dy);
    }
  }

  DistanceEvaluation eval;
  eval.min_squared = best;
  eval.activation_tolerance = activation_tolerance;
  const double cutoff = best + activation_tolerance;
  for (std::size_t i = 0; i < body.offset_set.points.size(); ++i) {
    const Vec2 e = body.offset_set.points[i];
    const Vec2 v = p + e;
    for (std::size_t j = 0; j < obstacle_points.size(); ++j) {
      const double dx = v.x - obstacle_points[j].x, dy = v.y - obstacle_points[j].y;
      const double d2 = dx * dx + dy * dy;
      if (d2 <= cutoff) {
        ActivePair pair{e, obstacle_points[j], d2, i, j};
        eval.active.push_back(pair);
        eval.gradients.push_back(detail::pair_gradient(p, pair, x.size(), body.position_indices));
      }
    }
  }
  return eval;
}

inline DistanceEvaluation evaluate_distance(const Vec& x, const RobotBody& body,
                                            const SampledShape& obstacles,
                                            double activation_tolerance) {
  return evaluate_distance(x, body, obstacles.points, activation_tolerance);
}

// ---------------------------------------------------------------------------
// Uniform-grid spatial index over obstacle points. Accelerates the pairwise
// scan for large sample counts; results are bit-identical to the exhaustive
// loop (exact comparisons, same lexicographic tie-break).
// ---------------------------------------------------------------------------

class ObstacleGridIndex {
 public:
  explicit ObstacleGridIndex(std::vector<Vec2> points) : points_(std::move(points)) {
    if (points_.empty()) throw EmptySampleSet("grid index needs points");
    min_ = max_ = points_[0];
    for (const Vec2& p : points_) {
      min_.x = std::min(min_.x, p.x);
      min_.y = std::min(min_.y, p.y);
      max_.x = std::max(max_.x, p.x);
      max_.y = std::max(max_.y, p.y);
    }
    const double extent = std::max({max_.x - min_.x, max_.y - min_.y, 1e-9});
    const std::size_t target =
        static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(points_.size()))));
    nx_ = ny_ = std::max<std::size_t>(1, target);
    cell_ = extent / static_cast<double>(nx_);
    cells_.assign(nx_ * ny_, {});
    for (std::size_t i = 0; i < points_.size(); ++i)
      cells_[cell_of(points_[i])].push_back(i);
  }

  // (min squared distance, index of minimizing point); lowest index wins ties.
  std::pair<double, std::size_t> nearest(Vec2 q) const {
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_idx = std::numeric_limits<std::size_t>::max();
    const auto [cx, cy] = cell_coords(q);
    for (std::size_t ring = 0;; ++ring) {
      if (ring > nx_ + ny_) break;
      // Once the closest possible point in this ring is farther than the
      // incumbent, no later ring can improve it.
      if (best_idx != std::numeric_limits<std::size_t>::max() && ring > 0) {
        const double ring_min = (static_cast<double>(ring) - 1.0) * cell_;
        if (ring_min > 0.0 && ring_min * ring_min > best) break;
      }
      bool any_cell = false;
      visit_ring(cx, cy, ring, [&](std::size_t cell) {
        any_cell = true;
        for (std::size_t idx : cells_[cell]) {
          const double dx = q.x - points_[idx].x, dy = q.y - points_[idx].y;
          const double d2 = dx * dx + dy * dy;
          if (d2 < best || (d2 == best && idx < best_idx)) {
            best = d2;
            best_idx = idx;
          }
        }
      });
      if (!any_cell && best_idx != std::numeric_limits<std::size_t>::max()) break;
    }
    return {best, best_idx};
  }

  // Indices of all points with squared distance <= r_sq, ascending index order.
  std::vector<std::size_t> within(Vec2 q, double r_sq) const {
    std::vector<std::size_t> out;
    const double r = std::sqrt(r_sq);
    const auto [lo_x, lo_y] = cell_coords({q.x - r, q.y - r});
    const auto [hi_x, hi_y] = cell_coords({q.x + r, q.y + r});
    for (std::size_t cy = lo_y; cy <= hi_y; ++cy)
      for (std::size_t cx = lo_x; cx <= hi_x; ++cx)
        for (std::size_t idx : cells_[cy * nx_ + cx]) {
          const double dx = q.x - points_[idx].x, dy = q.y - points_[idx].y;
          if (dx * dx + dy * dy <= r_sq) out.push_back(idx);
        }
    std::sort(out.begin(), out.end());
    return out;
  }

  const std::vector<Vec2>& points() const { return points_; }

 private:
  std::pair<std::size_t, std::size_t> cell_coords(Vec2 p) const {
    const auto clampi = [](double v, std::size_t n) {
      if (v < 0.0) return std::size_t{0};
      const std::size_t i = static_cast<std::size_t>(v);
      return std::min(i, n - 1);
    };
    return {clampi((p.x - min_.x) / cell_, nx_), clampi((p.y - min_.y) / cell_, ny_)};
  }

  std::size_t cell_of(Vec2 p) const {
    const auto [cx, cy] = cell_coords(p);
    return cy * nx_ + cx;
  }

  template <typename F>
  void visit_ring(std::size_t cx, std::size_t cy, std::size_t ring, F&& f) const {
    const long long r = static_cast<long long>(ring);
    const long long x0 = static_cast<long long>(cx), y0 = static_cast<long long>(cy);
    for (long long dy = -r; dy <= r; ++dy) {
      for (long long dx = -r; dx <= r; ++dx) {
        if (std::max(std::llabs(dx), std::llabs(dy)) != r) continue;
        const long long x = x0 + dx, y = y0 + dy;
        if (x < 0 || y < 0 || x >= static_cast<long long>(nx_) ||
            y >= static_cast<long long>(ny_))
          continue;
        f(static_cast<std::size_t>(y) * nx_ + static_cast<std::size_t>(x));
      }
    }
  }

  std::vector<Vec2> points_;
  Vec2 min_, max_;
  std::size_t nx_ = 1, ny_ = 1;
  double cell_ = 1.0;
  std::vector<std::vector<std::size_t>> cells_;
};

// Index-accelerated variant of evaluate_distance; bit-identical results.
inline DistanceEvaluation evaluate_distance_indexed(const Vec& x, const RobotBody& body,
                                                    const ObstacleGridIndex& index,
                                                    double activation_tolerance) {
  if (activation_tolerance < 0.0)
    throw ValidationError("activation_tolerance must be non-negative");
  if (body.offset_set.points.empty()) throw EmptySampleSet("empty robot offset set");

  const Vec2 p = position_slice(body, x);
  double best = std::numeric_limits<double>::infinity();
  for (const Vec2& e : body.offset_set.points)
    best = std::min(best, index.nearest(p + e).first);

  DistanceEvaluation eval;
  eval.min_squared = best;
  eval.activation_tolerance = activation_tolerance;
  const double cutoff = best + activation_tolerance;
  const auto& obs = index.points();
  for (std::size_t i = 0; i < body.offset_set.points.size(); ++i) {
    const Vec2 e = body.offset_set.points[i];
    const Vec2 v = p + e;
    for (std::size_t j : index.within(v, cutoff)) {
      const double dx = v.x - obs[j].x, dy = v.y - obs[j].y;
      const double d2 = dx * dx + dy * dy;
      if (d2 <= cutoff) {
        ActivePair pair{e, obs[j], d2, i, j};
        eval.active.push_back(pair);
        eval.gradients.push_back(detail::pair_gradient(p, pair, x.size(), body.position_indices));
      }
    }
  }
  return eval;
}

}  // namespace sbcbf
