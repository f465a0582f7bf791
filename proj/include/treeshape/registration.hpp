#pragma once

// Registration of one SRVF tree onto another: joint search over a rotation,
// a reparameterization of the main branch and a lateral correspondence,
// minimizing the weighted pre-shape dissimilarity.

#include <Eigen/Core>
#include <Eigen/LU>
#include <Eigen/SVD>
#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <vector>

#include "treeshape/error.hpp"
#include "treeshape/hungarian.hpp"
#include "treeshape/srvf.hpp"

namespace treeshape {

/// A discrete orientation-preserving diffeomorphism of [0,1], sampled on the
/// uniform grid of the main branch.
struct Gamma {
  std::vector<double> values;

  static Gamma identity(int n) {
    Gamma g;
    g.values.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) g.values[static_cast<std::size_t>(i)] = n > 1 ? double(i) / (n - 1) : 0.0;
    return g;
  }

  int size() const { return static_cast<int>(values.size()); }

  bool is_identity(double tol = 0.0) const {
    const int n = size();
    for (int i = 0; i < n; ++i)
      if (std::abs(values[static_cast<std::size_t>(i)] - double(i) / (n - 1)) > tol) return false;
    return true;
  }

  /// Piecewise-linear evaluation.
  double operator()(double t) const {
    const int n = size();
    const double x = std::clamp(t, 0.0, 1.0) * (n - 1);
    const int i = std::min(static_cast<int>(std::floor(x)), n - 2);
    const double u = x - i;
    return (1.0 - u) * values[static_cast<std::size_t>(i)] + u * values[static_cast<std::size_t>(i) + 1];
  }

  /// Monotone linear interpolation of the inverse.
  double inverse(double s) const {
    const int n = size();
    s = std::clamp(s, 0.0, 1.0);
    auto it = std::lower_bound(values.begin(), values.end(), s);
    if (it == values.begin()) return 0.0;
    if (it == values.end()) return 1.0;
    const auto j = static_cast<int>(it - values.begin());
    const double lo = values[static_cast<std::size_t>(j) - 1], hi = values[static_cast<std::size_t>(j)];
    const double u = hi > lo ? (s - lo) / (hi - lo) : 0.0;
    return (j - 1 + u) / (n - 1);
  }

  /// gamma' on the grid, central differences inside.
  std::vector<double> derivative() const {
    const int n = size();
    const double h = 1.0 / (n - 1);
    std::vector<double> d(values.size());
    for (int i = 0; i < n; ++i) {
      const int lo = std::max(i - 1, 0), hi = std::min(i + 1, n - 1);
      d[static_cast<std::size_t>(i)] =
          (values[static_cast<std::size_t>(hi)] - values[static_cast<std::size_t>(lo)]) / ((hi - lo) * h);
    }
    return d;
  }
};

struct Registration {
  Eigen::Matrix2d rotation = Eigen::Matrix2d::Identity();
  Gamma gamma;
  /// assignment[k] = index of the lateral of the moving tree matched to
  /// lateral k of the fixed tree.
  std::vector<std::size_t> assignment;
  double cost = 0.0;
  std::vector<double> cost_history;  ///< cost after initialization and after each sweep
  bool rotation_degenerate = false;

  double angle() const { return std::atan2(rotation(1, 0), rotation(0, 0)); }

  static Registration identity(int n_main, std::size_t n_laterals) {
    Registration r;
    r.gamma = Gamma::identity(n_main);
    r.assignment.resize(n_laterals);
    std::iota(r.assignment.begin(), r.assignment.end(), std::size_t{0});
    return r;
  }
};

struct RegistrationOptions {
  int max_iter = 10;
  double tol = 1e-8;           ///< relative decrease threshold between sweeps
  int dp_neighborhood = 3;     ///< local slopes p/q with 1 <= p, q <= this
  /// true moves attachments with the main, s <- gamma^-1(s). The default keeps
  /// s fixed, which leaves the action of gamma an isometry of the dissimilarity.
  bool remap_attachments = false;
};

// ---------------------------------------------------------------------------
// Pre-shape dissimilarity on index-aligned trees.

inline void check_aligned(const SrvfTree& a, const SrvfTree& b) {
  if (a.laterals.size() != b.laterals.size())
    throw LayoutError("SRVF trees have different lateral counts (augment them first)");
  if (a.main.size() != b.main.size()) throw LayoutError("main branches have different sample counts");
}

inline double preshape_dissimilarity_sq(const SrvfTree& a, const SrvfTree& b, const Weights& w) {
  check_aligned(a, b);
  double lat = 0.0, pos = 0.0;
  for (std::size_t k = 0; k < a.laterals.size(); ++k) {
    lat += l2_dist_sq(a.laterals[k].q, b.laterals[k].q);
    const double ds = a.laterals[k].s - b.laterals[k].s;
    pos += ds * ds;
  }
  return w.main * l2_dist_sq(a.main, b.main) + w.lateral * lat + w.position * pos;
}

// ---------------------------------------------------------------------------
// Group action.

inline Srvf rotate(const Srvf& q, const Eigen::Matrix2d& r) { return {r * q.samples}; }

/// (q o gamma) sqrt(gamma'), with q linearly interpolated between samples.
inline Srvf reparameterize(const Srvf& q, const Gamma& gamma) {
  const int n = q.size();
  if (gamma.size() != n) throw LayoutError("reparameterize: gamma and SRVF sizes differ");
  const auto dg = gamma.derivative();
  Srvf out{Eigen::Matrix2Xd(2, n)};
  for (int i = 0; i < n; ++i) {
    const double x = std::clamp(gamma.values[static_cast<std::size_t>(i)], 0.0, 1.0) * (n - 1);
    const int j = std::min(static_cast<int>(std::floor(x)), n - 2);
    const double u = x - j;
    const Eigen::Vector2d qv = (1.0 - u) * q.samples.col(j) + u * q.samples.col(j + 1);
    out.samples.col(i) = qv * std::sqrt(std::max(dg[static_cast<std::size_t>(i)], 0.0));
  }
  return out;
}

inline SrvfTree apply_registration(const SrvfTree& b, const Registration& r, bool remap_attachments = true) {
  const bool id_gamma = r.gamma.values.empty() || r.gamma.is_identity();
  SrvfTree out;
  out.anchor = b.anchor;
  out.main = rotate(id_gamma ? b.main : reparameterize(b.main, r.gamma), r.rotation);
  const std::size_t n = b.laterals.size();
  if (!r.assignment.empty() && r.assignment.size() != n)
    throw LayoutError("apply_registration: assignment size differs from lateral count");
  out.laterals.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const auto& src = b.laterals[r.assignment.empty() ? k : r.assignment[k]];
    const double s = (id_gamma || !remap_attachments) ? src.s : r.gamma.inverse(src.s);
    out.laterals.push_back({rotate(src.q, r.rotation), s});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Lateral correspondence.

/// Cost of matching lateral k of `a` with lateral j of `b`.
inline Eigen::MatrixXd lateral_cost_matrix(const SrvfTree& a, const SrvfTree& b, const Weights& w) {
  const auto n = static_cast<Eigen::Index>(a.laterals.size());
  if (b.laterals.size() != a.laterals.size()) throw LayoutError("match_laterals: lateral counts differ");
  Eigen::MatrixXd c(n, n);
  for (Eigen::Index k = 0; k < n; ++k)
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto& la = a.laterals[static_cast<std::size_t>(k)];
      const auto& lb = b.laterals[static_cast<std::size_t>(j)];
      const double ds = la.s - lb.s;
      c(k, j) = w.lateral * l2_dist_sq(la.q, lb.q) + w.position * ds * ds;
    }
  return c;
}

inline std::vector<std::size_t> match_laterals(const SrvfTree& a, const SrvfTree& b, const Weights& w) {
  return solve_assignment(lateral_cost_matrix(a, b, w)).row_to_col;
}

// ---------------------------------------------------------------------------
// Rotation.

struct RotationEstimate {
  Eigen::Matrix2d rotation = Eigen::Matrix2d::Identity();
  bool degenerate = false;
};

/// Weighted Procrustes in the plane: the rotation O minimizing
/// w_main |q0a - O q0b|^2 + w_lat sum_k |q_ka - O q_{pi(k)}b|^2.
inline RotationEstimate optimal_rotation(const SrvfTree& a, const SrvfTree& b,
                                         const std::vector<std::size_t>& assignment, const Weights& w) {
  check_aligned(a, b);
  Eigen::Matrix2d cross = Eigen::Matrix2d::Zero();
  auto accumulate = [&cross](const Srvf& qa, const Srvf& qb, double weight) {
    if (weight == 0.0) return;
    const Eigen::VectorXd tw = trapezoid_weights(qa.size()) * weight;
    cross += qa.samples * tw.asDiagonal() * qb.samples.transpose();
  };
  accumulate(a.main, b.main, w.main);
  for (std::size_t k = 0; k < a.laterals.size(); ++k) {
    const std::size_t j = assignment.empty() ? k : assignment[k];
    accumulate(a.laterals[k].q, b.laterals[j].q, w.lateral);
  }

  RotationEstimate est;
  Eigen::JacobiSVD<Eigen::Matrix2d> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  if (svd.singularValues()(0) < 1e-12) {
    est.degenerate = true;
    return est;
  }
  Eigen::Matrix2d d = Eigen::Matrix2d::Identity();
  d(1, 1) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  est.rotation = svd.matrixU() * d * svd.matrixV().transpose();
  return est;
}

// ---------------------------------------------------------------------------
// Reparameterization of the main branch by dynamic programming.

namespace detail {

/// Local moves (dt, dgamma) in grid steps with coprime components.
inline std::vector<std::array<int, 2>> dp_moves(int neighborhood) {
  std::vector<std::array<int, 2>> moves;
  for (int i = 1; i <= neighborhood; ++i)
    for (int j = 1; j <= neighborhood; ++j)
      if (std::gcd(i, j) == 1) moves.push_back({i, j});
  return moves;
}

/// Energy of the straight segment (k, l) -> (i, j) of the gamma graph:
/// trapezoid sum over q1 nodes k..i of |q1(t) - sqrt(m) q2(gamma(t))|^2.
inline double dp_segment_cost(const Eigen::Matrix2Xd& q1, const Eigen::Matrix2Xd& q2, int k, int l, int i, int j,
                              double h) {
  const double m = static_cast<double>(j - l) / (i - k);
  const double sm = std::sqrt(m);
  double e = 0.0;
  for (int t = k; t <= i; ++t) {
    const double x = l + m * (t - k);
    const int x0 = std::min(static_cast<int>(x), static_cast<int>(q2.cols()) - 2);
    const double u = x - x0;
    const Eigen::Vector2d r = q1.col(t) - sm * ((1.0 - u) * q2.col(x0) + u * q2.col(x0 + 1));
    const double wt = (t == k || t == i) ? 0.5 : 1.0;
    e += wt * r.squaredNorm();
  }
  return e * h;
}

}  // namespace detail

/// Attachment of a moving lateral at parameter `moving_s` that should land on
/// `fixed_s` after remapping by gamma^-1; costs weight * (fixed_s - gamma^-1(moving_s))^2.
struct AttachmentPin {
  double fixed_s = 0.0;
  double moving_s = 0.0;
  double weight = 0.0;
};

/// gamma minimizing main_weight |q1 - (q2 o gamma) sqrt(gamma')|^2 plus the
/// pin costs, over monotone grid paths with local slopes between
/// 1/neighborhood and neighborhood. Never worse than the identity.
inline Gamma optimal_reparam_main(const Srvf& q1, const Srvf& q2, int neighborhood = 3,
                                  const std::vector<AttachmentPin>& pins = {}, double main_weight = 1.0) {
  const int n = q1.size();
  if (q2.size() != n) throw LayoutError("optimal_reparam_main: sample counts differ");
  if (n < 3) return Gamma::identity(n);
  const double h = 1.0 / (n - 1);
  const auto moves = detail::dp_moves(std::max(neighborhood, 1));

  // Pins crossed by a segment whose gamma range is [l, j) in grid units; the
  // top row also takes pins at exactly 1.
  auto pin_cost = [&](int k, int l, int i, int j) {
    double e = 0.0;
    for (const auto& p : pins) {
      const double y = p.moving_s * (n - 1);
      if (y < l || (y >= j && !(j == n - 1 && y <= j))) continue;
      const double t = (k + (y - l) * (i - k) / (j - l)) * h;
      e += p.weight * (p.fixed_s - t) * (p.fixed_s - t);
    }
    return e;
  };

  constexpr double inf = std::numeric_limits<double>::infinity();
  const auto idx = [n](int i, int j) { return static_cast<std::size_t>(i) * n + j; };
  std::vector<double> energy(static_cast<std::size_t>(n) * n, inf);
  std::vector<int> from(static_cast<std::size_t>(n) * n, -1);
  energy[idx(0, 0)] = 0.0;
  for (int i = 1; i < n; ++i)
    for (int j = 1; j < n; ++j)
      for (std::size_t mv = 0; mv < moves.size(); ++mv) {
        const int k = i - moves[mv][0], l = j - moves[mv][1];
        if (k < 0 || l < 0) continue;
        const double prev = energy[idx(k, l)];
        if (prev == inf) continue;
        double e = prev + main_weight * detail::dp_segment_cost(q1.samples, q2.samples, k, l, i, j, h);
        if (!pins.empty()) e += pin_cost(k, l, i, j);
        if (e < energy[idx(i, j)]) {
          energy[idx(i, j)] = e;
          from[idx(i, j)] = static_cast<int>(mv);
        }
      }

  Gamma g;
  g.values.assign(static_cast<std::size_t>(n), 0.0);
  if (energy[idx(n - 1, n - 1)] == inf) return Gamma::identity(n);
  int i = n - 1, j = n - 1;
  g.values[static_cast<std::size_t>(n - 1)] = 1.0;
  while (i > 0) {
    const auto& mv = moves[static_cast<std::size_t>(from[idx(i, j)])];
    const int k = i - mv[0], l = j - mv[1];
    for (int t = k; t < i; ++t)
      g.values[static_cast<std::size_t>(t)] = (l + static_cast<double>(j - l) * (t - k) / (i - k)) * h;
    i = k;
    j = l;
  }
  g.values.front() = 0.0;
  g.values.back() = 1.0;

  const Gamma id = Gamma::identity(n);
  auto total = [&](const Gamma& gm) {
    double e = main_weight * l2_dist_sq(q1, gm.is_identity() ? q2 : reparameterize(q2, gm));
    for (const auto& p : pins) {
      const double d = p.fixed_s - gm.inverse(p.moving_s);
      e += p.weight * d * d;
    }
    return e;
  };
  if (total(g) > total(id)) return id;
  return g;
}

// ---------------------------------------------------------------------------
// Coordinate descent over (assignment, rotation, gamma).

/// Registers `b` onto `a`. Both trees must already have equal lateral counts.
/// Every accepted update lowers (or keeps) the dissimilarity, so the cost
/// history is nonincreasing.
inline Registration register_trees(const SrvfTree& a, const SrvfTree& b, const Weights& w,
                                   const RegistrationOptions& opts = {}) {
  check_aligned(a, b);
  w.validate();
  const int n = a.main.size();
  Registration cur = Registration::identity(n, a.laterals.size());
  auto cost_of = [&](const Registration& r) {
    return preshape_dissimilarity_sq(a, apply_registration(b, r, opts.remap_attachments), w);
  };
  cur.cost = cost_of(cur);

  // Start from the Procrustes rotation for the given index alignment; it is
  // rotation-equivariant and never worse than the identity.
  {
    Registration trial = cur;
    const auto est = optimal_rotation(a, b, cur.assignment, w);
    trial.rotation = est.rotation;
    trial.cost = cost_of(trial);
    if (trial.cost <= cur.cost) cur = trial;
    cur.rotation_degenerate = est.degenerate;
  }
  cur.cost_history.push_back(cur.cost);

  for (int sweep = 0; sweep < opts.max_iter && cur.cost > 0.0; ++sweep) {
    const double before = cur.cost;

    // Assignment, given rotation and gamma.
    {
      Registration unpermuted = cur;
      unpermuted.assignment.clear();
      Registration trial = cur;
      trial.assignment = match_laterals(a, apply_registration(b, unpermuted, opts.remap_attachments), w);
      trial.cost = cost_of(trial);
      if (trial.cost <= cur.cost) cur = trial;
    }
    // Rotation, given assignment and gamma.
    {
      Registration unrotated = cur;
      unrotated.rotation = Eigen::Matrix2d::Identity();
      unrotated.assignment.clear();
      const auto est = optimal_rotation(a, apply_registration(b, unrotated, opts.remap_attachments),
                                        cur.assignment, w);
      Registration trial = cur;
      trial.rotation = est.rotation;
      trial.cost = cost_of(trial);
      if (trial.cost <= cur.cost) cur = trial;
      cur.rotation_degenerate = est.degenerate;
    }
    // Main-branch reparameterization, given rotation and assignment. With
    // remapped attachments gamma also moves the lateral positions, so those
    // terms enter the search.
    {
      Registration trial = cur;
      std::vector<AttachmentPin> pins;
      if (opts.remap_attachments && w.position > 0.0)
        for (std::size_t k = 0; k < a.laterals.size(); ++k)
          pins.push_back({a.laterals[k].s, b.laterals[cur.assignment[k]].s, w.position});
      trial.gamma = optimal_reparam_main(a.main, rotate(b.main, cur.rotation), opts.dp_neighborhood, pins, w.main);
      trial.cost = cost_of(trial);
      if (trial.cost <= cur.cost) cur = trial;
    }

    cur.cost_history.push_back(cur.cost);
    if (before - cur.cost <= opts.tol * std::max(before, std::numeric_limits<double>::min())) break;
  }
  return cur;
}

inline nlohmann::json registration_to_json(const Registration& r) {
  return {{"angle", r.angle()},
          {"rotation", {{r.rotation(0, 0), r.rotation(0, 1)}, {r.rotation(1, 0), r.rotation(1, 1)}}},
          {"gamma", r.gamma.values},
          {"assignment", r.assignment},
          {"cost", r.cost},
          {"cost_history", r.cost_history}};
}

inline Registration registration_from_json(const nlohmann::json& j) {
  try {
    Registration r;
    const auto rot = j.at("rotation");
    for (int i = 0; i < 2; ++i)
      for (int k = 0; k < 2; ++k) r.rotation(i, k) = rot.at(static_cast<std::size_t>(i)).at(static_cast<std::size_t>(k)).get<double>();
    r.gamma.values = j.at("gamma").get<std::vector<double>>();
    r.assignment = j.at("assignment").get<std::vector<std::size_t>>();
    r.cost = j.at("cost").get<double>();
    r.cost_history = j.value("cost_history", std::vector<double>{});
    if (!((r.rotation.transpose() * r.rotation - Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff() < 1e-9) ||
        !(r.rotation.determinant() > 0.0))
      throw ParseError("registration rotation is not a rotation");
    const auto& g = r.gamma.values;
    if (g.size() < 2 || g.front() != 0.0 || g.back() != 1.0 || !std::is_sorted(g.begin(), g.end()))
      throw ParseError("registration gamma must be nondecreasing from 0 to 1");
    std::vector<std::size_t> sorted = r.assignment;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t k = 0; k < sorted.size(); ++k)
      if (sorted[k] != k) throw ParseError("registration assignment is not a permutation");
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("registration: ") + e.what());
  }
}

}  // namespace treeshape
