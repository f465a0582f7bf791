#pragma once

// Two-layer root trees: a main curve with lateral curves attached at
// normalized arc-length positions along it.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "treeshape/error.hpp"

namespace treeshape {

using Point2 = Eigen::Vector2d;

/// Relative attachment tolerance: a lateral must start within
/// kAttachTolerance * (main length) of main(t).
inline constexpr double kAttachTolerance = 1e-3;

/// Per-branch sample counts used when trees are discretized.
struct Sampling {
  int n_main = 100;
  int n_lat = 50;
};

inline double polyline_length(std::span<const Point2> pts) {
  double len = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) len += (pts[i] - pts[i - 1]).norm();
  return len;
}

/// A discretized planar curve. Virtual branches are zero-length
/// placeholders holding a single point.
struct Branch {
  std::vector<Point2> points;
  bool is_virtual = false;

  static Branch make_virtual(const Point2& at) { return Branch{{at}, true}; }

  double length() const { return is_virtual ? 0.0 : polyline_length(points); }
  const Point2& start() const { return points.front(); }

  /// Point at arc-length fraction t in [0,1]; t outside is clamped.
  Point2 evaluate(double t) const {
    if (points.size() == 1) return points.front();
    t = std::clamp(t, 0.0, 1.0);
    const double target = t * polyline_length(points);
    double acc = 0.0;
    for (std::size_t i = 1; i < points.size(); ++i) {
      const double seg = (points[i] - points[i - 1]).norm();
      if (seg > 0.0 && acc + seg >= target) {
        const double u = std::clamp((target - acc) / seg, 0.0, 1.0);
        return points[i - 1] + u * (points[i] - points[i - 1]);
      }
      acc += seg;
    }
    return points.back();
  }
};

struct Lateral {
  double t = 0.0;
  Branch branch;
};

struct RootTree {
  std::string id;
  Branch main;
  std::vector<Lateral> laterals;

  std::size_t real_lateral_count() const {
    return static_cast<std::size_t>(std::count_if(
        laterals.begin(), laterals.end(), [](const Lateral& l) { return !l.branch.is_virtual; }));
  }
};

/// Stable sort by attachment position; equal t keep insertion order.
inline void sort_laterals(RootTree& tree) {
  std::stable_sort(tree.laterals.begin(), tree.laterals.end(),
                   [](const Lateral& a, const Lateral& b) { return a.t < b.t; });
}

namespace detail {

inline bool finite(const Point2& p) { return std::isfinite(p.x()) && std::isfinite(p.y()); }

inline void validate_branch(const Branch& b, const std::string& what) {
  if (b.points.empty()) throw ValidationError(what + ": branch has no points");
  for (const auto& p : b.points)
    if (!finite(p)) throw ValidationError(what + ": non-finite coordinate");
  if (b.is_virtual) {
    if (b.points.size() != 1)
      throw ValidationError(what + ": virtual branch must hold exactly one point");
    return;
  }
  if (b.points.size() < 2) throw ValidationError(what + ": branch needs at least 2 points");
  if (!(polyline_length(b.points) > 0.0)) throw ValidationError(what + ": zero-length branch");
}

}  // namespace detail

/// Throws ValidationError naming the first violated invariant.
inline void validate(const RootTree& tree) {
  if (tree.main.is_virtual) throw ValidationError("main branch cannot be virtual");
  detail::validate_branch(tree.main, "main");
  const double main_len = tree.main.length();
  const double tol = kAttachTolerance * main_len;
  double prev_t = -1.0;
  for (std::size_t k = 0; k < tree.laterals.size(); ++k) {
    const auto& lat = tree.laterals[k];
    const std::string what = "lateral " + std::to_string(k);
    if (!std::isfinite(lat.t) || lat.t < 0.0 || lat.t > 1.0)
      throw ValidationError(what + ": t out of range [0,1]");
    if (lat.t < prev_t) throw ValidationError(what + ": laterals not sorted by t");
    prev_t = lat.t;
    detail::validate_branch(lat.branch, what);
    if (!lat.branch.is_virtual) {
      const double gap = (lat.branch.start() - tree.main.evaluate(lat.t)).norm();
      if (gap > tol)
        throw ValidationError(what + ": attachment mismatch, start is " + std::to_string(gap) +
                              " from main(t) (tolerance " + std::to_string(tol) + ")");
    }
  }
}

/// n points uniformly spaced in arc length along b; endpoints kept exactly.
inline Branch resample_branch(const Branch& b, int n) {
  if (n < 2) throw ValidationError("resample_branch: n must be at least 2");
  if (b.is_virtual) throw ValidationError("resample_branch: cannot resample a virtual branch");
  const auto& pts = b.points;
  std::vector<double> cum(pts.size(), 0.0);
  for (std::size_t i = 1; i < pts.size(); ++i) cum[i] = cum[i - 1] + (pts[i] - pts[i - 1]).norm();
  const double total = cum.back();
  if (!(total > 0.0)) throw ValidationError("resample_branch: zero-length branch");

  Branch out;
  out.points.reserve(static_cast<std::size_t>(n));
  out.points.push_back(pts.front());
  std::size_t seg = 1;
  for (int k = 1; k < n - 1; ++k) {
    const double target = total * static_cast<double>(k) / static_cast<double>(n - 1);
    while (seg < pts.size() - 1 && cum[seg] < target) ++seg;
    const double len = cum[seg] - cum[seg - 1];
    const double u = len > 0.0 ? (target - cum[seg - 1]) / len : 0.0;
    out.points.push_back(pts[seg - 1] + u * (pts[seg] - pts[seg - 1]));
  }
  out.points.push_back(pts.back());
  return out;
}

/// Resamples the main branch to n_main and every real lateral to n_lat.
inline RootTree resample_tree(const RootTree& tree, const Sampling& sampling) {
  RootTree out = tree;
  out.main = resample_branch(tree.main, sampling.n_main);
  for (auto& lat : out.laterals)
    if (!lat.branch.is_virtual) lat.branch = resample_branch(lat.branch, sampling.n_lat);
  return out;
}

/// Divides every coordinate by the main-root arc length.
inline RootTree normalize_scale(const RootTree& tree) {
  const double len = tree.main.length();
  if (!(len > 0.0)) throw ValidationError("normalize_scale: zero-length main branch");
  RootTree out = tree;
  for (auto& p : out.main.points) p /= len;
  for (auto& lat : out.laterals)
    for (auto& p : lat.branch.points) p /= len;
  return out;
}

/// Applies x -> scale * R x + offset to every point. t values are unchanged.
inline RootTree transform_tree(const RootTree& tree, const Eigen::Matrix2d& rotation,
                               const Point2& offset, double scale = 1.0) {
  RootTree out = tree;
  auto apply = [&](Point2& p) { p = scale * (rotation * p) + offset; };
  for (auto& p : out.main.points) apply(p);
  for (auto& lat : out.laterals)
    for (auto& p : lat.branch.points) apply(p);
  return out;
}

inline Eigen::Matrix2d rotation_matrix(double angle) {
  Eigen::Matrix2d r;
  r << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
  return r;
}

namespace detail {

inline void add_virtuals(RootTree& tree, const std::vector<double>& ts) {
  for (double t : ts) tree.laterals.push_back({t, Branch::make_virtual(tree.main.evaluate(t))});
  sort_laterals(tree);
}

inline std::vector<double> t_values(const RootTree& tree) {
  std::vector<double> ts;
  ts.reserve(tree.laterals.size());
  for (const auto& l : tree.laterals) ts.push_back(l.t);
  return ts;
}

}  // namespace detail

/// Gives each tree a virtual lateral at every attachment position of the other,
/// so both end up with n_a + n_b laterals.
inline std::pair<RootTree, RootTree> augment_pair(const RootTree& a, const RootTree& b) {
  RootTree a2 = a;
  RootTree b2 = b;
  detail::add_virtuals(a2, detail::t_values(b));
  detail::add_virtuals(b2, detail::t_values(a));
  return {std::move(a2), std::move(b2)};
}

/// Equalizes lateral counts over a collection: each tree receives virtual
/// laterals at the attachment positions of every other tree.
inline std::vector<RootTree> augment_collection(std::span<const RootTree> trees) {
  if (trees.empty()) throw ValidationError("augment_collection: empty collection");
  std::vector<std::vector<double>> ts;
  ts.reserve(trees.size());
  for (const auto& t : trees) ts.push_back(detail::t_values(t));

  std::vector<RootTree> out(trees.begin(), trees.end());
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::vector<double> others;
    for (std::size_t j = 0; j < trees.size(); ++j)
      if (j != i) others.insert(others.end(), ts[j].begin(), ts[j].end());
    detail::add_virtuals(out[i], others);
  }
  return out;
}

/// Drops virtual laterals.
inline RootTree strip_virtual(const RootTree& tree) {
  RootTree out = tree;
  std::erase_if(out.laterals, [](const Lateral& l) { return l.branch.is_virtual; });
  return out;
}

/// Main root length, mean lateral length, population std of lateral lengths.
struct BioParams {
  double main_length = 0.0;
  double lateral_mean = 0.0;
  double lateral_std = 0.0;
};

inline BioParams extract_bio_params(const RootTree& tree) {
  BioParams p;
  p.main_length = tree.main.length();
  std::vector<double> lens;
  for (const auto& l : tree.laterals)
    if (!l.branch.is_virtual) lens.push_back(l.branch.length());
  if (lens.empty()) return p;
  const double n = static_cast<double>(lens.size());
  p.lateral_mean = std::accumulate(lens.begin(), lens.end(), 0.0) / n;
  double ss = 0.0;
  for (double l : lens) ss += (l - p.lateral_mean) * (l - p.lateral_mean);
  p.lateral_std = std::sqrt(ss / n);
  return p;
}

}  // namespace treeshape
