#pragma once

// Square-root velocity functions. A curve beta on [0,1] maps to
// q(t) = beta'(t) / sqrt(|beta'(t)|), and q = 0 where beta' vanishes.
// Under this map the elastic metric on curves becomes the flat L2 metric,
// so distances and geodesics between SRVFs are computed linearly.

#include <Eigen/Core>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include "treeshape/error.hpp"
#include "treeshape/tree_model.hpp"

namespace treeshape {

/// Lateral SRVFs with L2 norm below this are reconstructed as virtual.
inline constexpr double kNullThreshold = 1e-8;
/// Derivative magnitudes below this yield q = 0.
inline constexpr double kZeroSpeed = 1e-12;

/// q sampled at n uniform parameters on [0,1], one column per sample.
struct Srvf {
  Eigen::Matrix2Xd samples;

  static Srvf zero(int n) { return {Eigen::Matrix2Xd::Zero(2, n)}; }
  int size() const { return static_cast<int>(samples.cols()); }
};

struct SrvfLateral {
  Srvf q;
  double s = 0.0;  ///< attachment parameter on the main branch
};

/// A tree in pre-shape space. The anchor keeps the main start point, which
/// SRVFs forget, so trees can be placed back in the plane.
struct SrvfTree {
  Srvf main;
  std::vector<SrvfLateral> laterals;
  Point2 anchor = Point2::Zero();
};

/// Relative weights of the main-shape, lateral-shape and attachment-position terms.
struct Weights {
  double main = 0.02;
  double lateral = 1.0;
  double position = 1.0;

  void validate() const {
    if (!(main >= 0.0 && lateral >= 0.0 && position >= 0.0))
      throw ValidationError("weights must be nonnegative");
    if (!(main > 0.0 || lateral > 0.0 || position > 0.0))
      throw ValidationError("at least one weight must be positive");
  }
};

/// Trapezoid quadrature weights on n uniform nodes of [0,1].
inline Eigen::VectorXd trapezoid_weights(int n) {
  if (n < 2) return Eigen::VectorXd::Ones(std::max(n, 0));
  const double h = 1.0 / (n - 1);
  Eigen::VectorXd w = Eigen::VectorXd::Constant(n, h);
  w(0) = w(n - 1) = 0.5 * h;
  return w;
}

/// Discrete derivative with respect to the uniform parameter: central
/// differences inside, second-order one-sided differences at the ends.
inline Eigen::Matrix2Xd uniform_derivative(const Eigen::Matrix2Xd& x) {
  const auto n = x.cols();
  Eigen::Matrix2Xd d(2, n);
  if (n < 2) return Eigen::Matrix2Xd::Zero(2, n);
  const double h = 1.0 / static_cast<double>(n - 1);
  if (n == 2) {
    d.col(0) = d.col(1) = (x.col(1) - x.col(0)) / h;
    return d;
  }
  for (Eigen::Index i = 1; i + 1 < n; ++i) d.col(i) = (x.col(i + 1) - x.col(i - 1)) / (2.0 * h);
  d.col(0) = (-3.0 * x.col(0) + 4.0 * x.col(1) - x.col(2)) / (2.0 * h);
  d.col(n - 1) = (3.0 * x.col(n - 1) - 4.0 * x.col(n - 2) + x.col(n - 3)) / (2.0 * h);
  return d;
}

/// Applies v -> v / sqrt(|v|) column-wise, mapping tiny vectors to 0.
inline Eigen::Matrix2Xd velocity_to_srvf(const Eigen::Matrix2Xd& v) {
  Eigen::Matrix2Xd q(2, v.cols());
  for (Eigen::Index i = 0; i < v.cols(); ++i) {
    const double speed = v.col(i).norm();
    q.col(i) = speed > kZeroSpeed ? Eigen::Vector2d(v.col(i) / std::sqrt(speed))
                                  : Eigen::Vector2d::Zero();
  }
  return q;
}

inline Srvf to_srvf(const Branch& b, int n) {
  if (b.is_virtual) return Srvf::zero(n);
  const Branch r = resample_branch(b, n);
  Eigen::Matrix2Xd x(2, n);
  for (int i = 0; i < n; ++i) x.col(i) = r.points[static_cast<std::size_t>(i)];
  return {velocity_to_srvf(uniform_derivative(x))};
}

/// Integrates beta(t) = start + int_0^t q |q| du with the trapezoid rule.
inline Branch from_srvf(const Srvf& q, const Point2& start) {
  const int n = q.size();
  Branch b;
  b.points.reserve(static_cast<std::size_t>(n));
  b.points.push_back(start);
  if (n < 2) return b;
  const double h = 1.0 / (n - 1);
  Point2 prev_v = q.samples.col(0) * q.samples.col(0).norm();
  Point2 pos = start;
  for (int i = 1; i < n; ++i) {
    const Point2 v = q.samples.col(i) * q.samples.col(i).norm();
    pos += 0.5 * h * (prev_v + v);
    b.points.push_back(pos);
    prev_v = v;
  }
  return b;
}

/// Trapezoid approximation of int_0^1 |q1 - q2|^2 dt.
inline double l2_dist_sq(const Srvf& q1, const Srvf& q2) {
  if (q1.size() != q2.size()) throw LayoutError("l2_dist_sq: sample counts differ");
  const Eigen::VectorXd w = trapezoid_weights(q1.size());
  return (q1.samples - q2.samples).colwise().squaredNorm().dot(w);
}

inline double l2_norm_sq(const Srvf& q) {
  return q.samples.colwise().squaredNorm().dot(trapezoid_weights(q.size()));
}

inline bool is_null(const Srvf& q) { return std::sqrt(l2_norm_sq(q)) < kNullThreshold; }

inline SrvfTree tree_to_srvft(const RootTree& tree, const Sampling& sampling = {}) {
  SrvfTree out;
  out.main = to_srvf(tree.main, sampling.n_main);
  out.anchor = tree.main.start();
  out.laterals.reserve(tree.laterals.size());
  for (const auto& l : tree.laterals) out.laterals.push_back({to_srvf(l.branch, sampling.n_lat), l.t});
  return out;
}

namespace detail {

/// Cumulative arc length at every vertex.
inline std::vector<double> cumulative_length(const std::vector<Point2>& pts) {
  std::vector<double> cum(pts.size(), 0.0);
  for (std::size_t i = 1; i < pts.size(); ++i) cum[i] = cum[i - 1] + (pts[i] - pts[i - 1]).norm();
  return cum;
}

}  // namespace detail

/// Maps an SRVF tree back to the plane. Laterals start on the reconstructed
/// main at their parameter s and come out sorted by arc-length position.
/// When `source_index` is given it receives, per output lateral, the index
/// of the SRVF lateral it came from.
inline RootTree srvft_to_tree(const SrvfTree& q, std::vector<std::size_t>* source_index = nullptr) {
  RootTree tree;
  tree.main = from_srvf(q.main, q.anchor);
  const auto cum = detail::cumulative_length(tree.main.points);
  const double total = cum.back();
  if (!(total > 0.0)) throw ValidationError("srvft_to_tree: main branch has zero length");
  const int n = q.main.size();

  struct Entry {
    Lateral lat;
    std::size_t src;
  };
  std::vector<Entry> entries;
  entries.reserve(q.laterals.size());
  for (std::size_t k = 0; k < q.laterals.size(); ++k) {
    const double s = std::clamp(q.laterals[k].s, 0.0, 1.0);
    const double x = s * (n - 1);
    const auto i0 = std::min(static_cast<int>(std::floor(x)), n - 2);
    const double u = x - i0;
    const auto i = static_cast<std::size_t>(i0);
    const Point2 at = (1.0 - u) * tree.main.points[i] + u * tree.main.points[i + 1];
    const double t = std::clamp(((1.0 - u) * cum[i] + u * cum[i + 1]) / total, 0.0, 1.0);
    Lateral lat;
    lat.t = t;
    lat.branch = is_null(q.laterals[k].q) ? Branch::make_virtual(at) : from_srvf(q.laterals[k].q, at);
    if (!lat.branch.is_virtual && !(lat.branch.length() > 0.0)) lat.branch = Branch::make_virtual(at);
    entries.push_back({std::move(lat), k});
  }
  std::stable_sort(entries.begin(), entries.end(),
                   [](const Entry& a, const Entry& b) { return a.lat.t < b.lat.t; });
  if (source_index) source_index->clear();
  for (auto& e : entries) {
    tree.laterals.push_back(std::move(e.lat));
    if (source_index) source_index->push_back(e.src);
  }
  return tree;
}

// Debug/fixture JSON for SRVF trees. Samples are written as [[x, y], ...].

inline nlohmann::json srvf_to_json(const Srvf& q) {
  nlohmann::json arr = nlohmann::json::array();
  for (int i = 0; i < q.size(); ++i) arr.push_back({q.samples(0, i), q.samples(1, i)});
  return arr;
}

inline Srvf srvf_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw ParseError("SRVF samples must be an array");
  Srvf q{Eigen::Matrix2Xd(2, static_cast<Eigen::Index>(j.size()))};
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto& p = j[i];
    if (!p.is_array() || p.size() != 2) throw ParseError("SRVF sample must be [x, y]");
    q.samples(0, static_cast<Eigen::Index>(i)) = p[0].get<double>();
    q.samples(1, static_cast<Eigen::Index>(i)) = p[1].get<double>();
  }
  return q;
}

inline nlohmann::json srvft_to_json(const SrvfTree& q) {
  nlohmann::json lats = nlohmann::json::array();
  for (const auto& l : q.laterals) lats.push_back({{"s", l.s}, {"q", srvf_to_json(l.q)}});
  return {{"anchor", {q.anchor.x(), q.anchor.y()}}, {"main", srvf_to_json(q.main)}, {"laterals", lats}};
}

inline SrvfTree srvft_from_json(const nlohmann::json& j) {
  try {
    SrvfTree q;
    q.anchor = {j.at("anchor")[0].get<double>(), j.at("anchor")[1].get<double>()};
    q.main = srvf_from_json(j.at("main"));
    for (const auto& l : j.at("laterals")) q.laterals.push_back({srvf_from_json(l.at("q")), l.at("s").get<double>()});
    return q;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("SRVF tree: ") + e.what());
  }
}

}  // namespace treeshape
