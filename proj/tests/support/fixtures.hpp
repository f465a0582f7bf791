#pragma once

// Synthetic root trees for tests and demos.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "treeshape/tree_model.hpp"

namespace treeshape::fixtures {

struct LateralSpec {
  double t = 0.5;
  double length = 0.3;
  double angle = 0.8;      ///< radians from the downward direction; sign picks the side
  double curvature = 0.0;  ///< total turning along the branch, radians
};

struct RootSpec {
  std::string id = "root";
  double main_length = 1.0;
  double sway = 0.05;      ///< lateral amplitude of the main curve, relative to its length
  double sway_freq = 1.0;  ///< half-periods along the main curve
  std::vector<LateralSpec> laterals;
  int main_points = 200;
  int lateral_points = 60;
};

/// Curve starting at `start` with initial heading `heading` (radians,
/// 0 = +x) turning uniformly by `turn` over its length.
inline std::vector<Point2> arc(const Point2& start, double heading, double length, double turn, int points) {
  std::vector<Point2> pts;
  pts.reserve(static_cast<std::size_t>(points));
  Point2 p = start;
  pts.push_back(p);
  const double ds = length / (points - 1);
  for (int i = 1; i < points; ++i) {
    const double th = heading + turn * (i - 0.5) / (points - 1);
    p += ds * Point2(std::cos(th), std::sin(th));
    pts.push_back(p);
  }
  return pts;
}

inline RootTree make_root(const RootSpec& spec) {
  RootTree tree;
  tree.id = spec.id;
  const double pi = std::numbers::pi;
  // Main: grows downward (-y) with a sinusoidal sway in x.
  std::vector<Point2> fine;
  for (int i = 0; i < spec.main_points; ++i) {
    const double u = static_cast<double>(i) / (spec.main_points - 1);
    fine.emplace_back(spec.sway * std::sin(pi * spec.sway_freq * u), -u);
  }
  const double raw_len = polyline_length(fine);
  for (auto& p : fine) p *= spec.main_length / raw_len;
  tree.main.points = std::move(fine);

  for (const auto& ls : spec.laterals) {
    const Point2 at = tree.main.evaluate(ls.t);
    const double heading = -pi / 2 + ls.angle;
    Lateral lat;
    lat.t = ls.t;
    lat.branch.points = arc(at, heading, ls.length, ls.curvature, spec.lateral_points);
    tree.laterals.push_back(std::move(lat));
  }
  sort_laterals(tree);
  return tree;
}

/// Random smooth planar curve of unit length.
inline Branch random_branch(std::mt19937_64& rng, int points = 400) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double a1 = u(rng), a2 = 0.5 * u(rng), a3 = 0.25 * u(rng), heading = std::numbers::pi * u(rng);
  std::vector<Point2> pts;
  Point2 p = Point2::Zero();
  pts.push_back(p);
  const double ds = 1.0 / (points - 1);
  for (int i = 1; i < points; ++i) {
    const double s = (i - 0.5) * ds;
    const double th = heading + a1 * std::sin(std::numbers::pi * s) + a2 * std::sin(2 * std::numbers::pi * s) +
                      a3 * std::cos(3 * std::numbers::pi * s);
    p += ds * Point2(std::cos(th), std::sin(th));
    pts.push_back(p);
  }
  Branch b;
  b.points = std::move(pts);
  return b;
}

/// Random root with `laterals` laterals on alternating sides.
inline RootTree random_root(std::mt19937_64& rng, int laterals, const std::string& id = "root",
                            double main_length = 1.0) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  RootSpec spec;
  spec.id = id;
  spec.main_length = main_length * (0.8 + 0.4 * u(rng));
  spec.sway = 0.02 + 0.08 * u(rng);
  spec.sway_freq = 0.5 + 1.5 * u(rng);
  for (int k = 0; k < laterals; ++k) {
    LateralSpec ls;
    ls.t = 0.1 + 0.8 * u(rng);
    ls.length = main_length * (0.1 + 0.3 * u(rng));
    ls.angle = (k % 2 ? -1.0 : 1.0) * (0.5 + 0.7 * u(rng));
    ls.curvature = (k % 2 ? 1.0 : -1.0) * 0.6 * u(rng);
    spec.laterals.push_back(ls);
  }
  return make_root(spec);
}

/// A family of roots whose main length and lateral lengths vary together
/// with a scalar `grow` in [0,1]; used for regression and atlas tests.
inline RootTree growth_root(double grow, double jitter, const std::string& id) {
  RootSpec spec;
  spec.id = id;
  spec.main_length = 0.6 + 0.8 * grow;
  spec.sway = 0.04 + 0.02 * jitter;
  spec.laterals = {{0.3 + 0.02 * jitter, 0.15 + 0.15 * grow, 0.9, -0.3},
                   {0.55, 0.12 + 0.1 * grow + 0.03 * jitter, -0.8, 0.3},
                   {0.75 - 0.02 * jitter, 0.1 + 0.05 * grow, 0.7, -0.2}};
  return make_root(spec);
}

/// Two roots that differ by one lateral sitting far along the main: the pair
/// can be matched either by sliding that lateral or by deleting and creating it.
inline std::pair<RootTree, RootTree> slide_or_create_pair() {
  RootSpec a;
  a.id = "near";
  a.laterals = {{0.2, 0.3, 0.8, -0.2}, {0.55, 0.25, -0.8, 0.2}};
  RootSpec b = a;
  b.id = "far";
  b.laterals[0].t = 0.85;
  return {make_root(a), make_root(b)};
}

}  // namespace treeshape::fixtures
