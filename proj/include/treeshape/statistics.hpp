#pragma once

// Statistics in the tangent space of the mean tree: Karcher mean by gradient
// descent, principal modes, Gaussian sampling, and linear regression from
// scalar parameters onto mode coefficients.

#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "treeshape/error.hpp"
#include "treeshape/metric.hpp"
#include "treeshape/parallel.hpp"
#include "treeshape/registration.hpp"
#include "treeshape/srvf.hpp"
#include "treeshape/tree_model.hpp"

namespace treeshape {

// ---------------------------------------------------------------------------
// Flat tangent coordinates.
//
// Layout: main samples (x0, y0, x1, y1, ...), then each lateral's samples in
// the same order, then one attachment offset per lateral. Blocks are scaled
// by sqrt(weight * trapezoid weight) so the Euclidean norm of a tangent
// vector equals the pre-shape dissimilarity.

struct TangentLayout {
  int n_main = 0;
  int n_lat = 0;
  std::size_t n_laterals = 0;

  Eigen::Index dim() const {
    return 2 * Eigen::Index{n_main} + static_cast<Eigen::Index>(n_laterals) * (2 * Eigen::Index{n_lat} + 1);
  }
  bool operator==(const TangentLayout&) const = default;

  static TangentLayout of(const SrvfTree& q) {
    TangentLayout l{q.main.size(), q.laterals.empty() ? 0 : q.laterals.front().q.size(), q.laterals.size()};
    for (const auto& lat : q.laterals)
      if (lat.q.size() != l.n_lat) throw LayoutError("laterals have different sample counts");
    return l;
  }
};

struct TangentVector {
  Eigen::VectorXd coords;
  TangentLayout layout;

  double norm() const { return coords.norm(); }
};

namespace detail {

inline Eigen::VectorXd coordinate_scale(const TangentLayout& layout, const Weights& w) {
  if (!(w.main > 0.0 && w.lateral > 0.0 && w.position > 0.0))
    throw ValidationError("tangent coordinates need strictly positive weights");
  Eigen::VectorXd scale(layout.dim());
  Eigen::Index o = 0;
  const Eigen::VectorXd tm = trapezoid_weights(layout.n_main);
  for (int i = 0; i < layout.n_main; ++i, o += 2) scale.segment(o, 2).setConstant(std::sqrt(w.main * tm(i)));
  const Eigen::VectorXd tl = trapezoid_weights(layout.n_lat);
  for (std::size_t k = 0; k < layout.n_laterals; ++k)
    for (int i = 0; i < layout.n_lat; ++i, o += 2) scale.segment(o, 2).setConstant(std::sqrt(w.lateral * tl(i)));
  for (std::size_t k = 0; k < layout.n_laterals; ++k) scale(o++) = std::sqrt(w.position);
  return scale;
}

/// Unscaled flat coordinates of an SRVF tree (anchor excluded).
inline Eigen::VectorXd flatten(const SrvfTree& q, const TangentLayout& layout) {
  if (!(TangentLayout::of(q) == layout)) throw LayoutError("SRVF tree does not match tangent layout");
  Eigen::VectorXd x(layout.dim());
  Eigen::Index o = 0;
  x.segment(o, 2 * layout.n_main) = q.main.samples.reshaped();
  o += 2 * layout.n_main;
  for (const auto& l : q.laterals) {
    x.segment(o, 2 * layout.n_lat) = l.q.samples.reshaped();
    o += 2 * layout.n_lat;
  }
  for (const auto& l : q.laterals) x(o++) = l.s;
  return x;
}

inline SrvfTree unflatten(const Eigen::VectorXd& x, const TangentLayout& layout, const Point2& anchor) {
  SrvfTree q;
  q.anchor = anchor;
  Eigen::Index o = 0;
  q.main.samples = x.segment(o, 2 * layout.n_main).reshaped(2, layout.n_main);
  o += 2 * layout.n_main;
  q.laterals.resize(layout.n_laterals);
  for (auto& l : q.laterals) {
    l.q.samples = x.segment(o, 2 * layout.n_lat).reshaped(2, layout.n_lat);
    o += 2 * layout.n_lat;
  }
  for (auto& l : q.laterals) l.s = x(o++);
  return q;
}

}  // namespace detail

/// Tangent vector at mu pointing to x, where x is already registered to mu.
inline TangentVector log_map(const SrvfTree& mu, const SrvfTree& x, const Weights& w) {
  const auto layout = TangentLayout::of(mu);
  TangentVector v{detail::flatten(x, layout) - detail::flatten(mu, layout), layout};
  v.coords.array() *= detail::coordinate_scale(layout, w).array();
  return v;
}

/// mu + v. Attachment positions are clamped to [0,1]; `clamped` (optional)
/// receives how many were.
inline SrvfTree exp_map(const SrvfTree& mu, const TangentVector& v, const Weights& w, int* clamped = nullptr) {
  const auto layout = TangentLayout::of(mu);
  if (!(v.layout == layout) || v.coords.size() != layout.dim())
    throw LayoutError("exp_map: tangent vector layout does not match the base point");
  const Eigen::VectorXd x =
      detail::flatten(mu, layout) + (v.coords.array() / detail::coordinate_scale(layout, w).array()).matrix();
  SrvfTree out = detail::unflatten(x, layout, mu.anchor);
  int count = 0;
  for (auto& l : out.laterals) {
    const double s = std::clamp(l.s, 0.0, 1.0);
    if (s != l.s) ++count;
    l.s = s;
  }
  if (clamped) *clamped = count;
  return out;
}

// ---------------------------------------------------------------------------
// Karcher mean.

struct KarcherOptions {
  double step = 0.5;
  int max_iter = 50;
  double tol = 1e-6;  ///< stop when the mean tangent vector is shorter than this
  int max_backtrack = 10;
  MetricOptions metric;
  int threads = 1;
};

struct KarcherResult {
  SrvfTree mean;
  std::vector<SrvfTree> registered;  ///< samples registered to the final mean
  std::vector<double> objective;     ///< sum of squared distances per accepted iterate
  std::vector<double> residual;      ///< |mean tangent vector| per iteration
  std::size_t medoid = 0;
  int iterations = 0;
  bool converged = false;
};

namespace detail {

struct RegisteredSet {
  std::vector<SrvfTree> trees;
  double objective = 0.0;
};

inline RegisteredSet register_all(const SrvfTree& mu, const std::vector<SrvfTree>& samples, const Weights& w,
                                  const KarcherOptions& opts) {
  RegisteredSet set;
  set.trees.resize(samples.size());
  std::vector<double> costs(samples.size());
  parallel_for(samples.size(), opts.threads, [&](std::size_t i) {
    const auto reg = register_trees(mu, samples[i], w, opts.metric.registration);
    set.trees[i] = apply_registration(samples[i], reg, opts.metric.registration.remap_attachments);
    costs[i] = reg.cost;
  });
  for (double c : costs) set.objective += c;
  return set;
}

inline SrvfTree axpy(const SrvfTree& mu, const Eigen::VectorXd& flat_dir, double step, const TangentLayout& layout) {
  return unflatten(flatten(mu, layout) + step * flat_dir, layout, mu.anchor);
}

}  // namespace detail

/// Gradient descent on the sum of squared registered distances, started at
/// the medoid, with step halving whenever the objective would increase.
/// Input trees are augmented to a common lateral count first.
inline KarcherResult karcher_mean(const std::vector<RootTree>& trees, const Weights& w, const KarcherOptions& opts = {}) {
  if (trees.empty()) throw ValidationError("karcher_mean: empty collection");
  w.validate();
  const auto augmented = augment_collection(trees);
  std::vector<SrvfTree> samples;
  samples.reserve(augmented.size());
  for (const auto& t : augmented) samples.push_back(tree_to_srvft(t, opts.metric.sampling));
  const auto layout = TangentLayout::of(samples.front());
  const std::size_t m = samples.size();

  KarcherResult res;
  // Medoid: smallest sum of registered distances.
  {
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = i + 1; j < m; ++j) pairs.emplace_back(i, j);
    std::vector<double> d(pairs.size());
    parallel_for(pairs.size(), opts.threads, [&](std::size_t p) {
      d[p] = std::sqrt(std::max(
          register_trees(samples[pairs[p].first], samples[pairs[p].second], w, opts.metric.registration).cost, 0.0));
    });
    std::vector<double> sums(m, 0.0);
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      sums[pairs[p].first] += d[p];
      sums[pairs[p].second] += d[p];
    }
    res.medoid = static_cast<std::size_t>(std::min_element(sums.begin(), sums.end()) - sums.begin());
  }

  SrvfTree mu = samples[res.medoid];
  auto set = detail::register_all(mu, samples, w, opts);
  res.objective.push_back(set.objective);

  for (int it = 0; it < opts.max_iter; ++it) {
    Eigen::VectorXd mean_dir = Eigen::VectorXd::Zero(layout.dim());
    const Eigen::VectorXd base = detail::flatten(mu, layout);
    for (const auto& r : set.trees) mean_dir += detail::flatten(r, layout) - base;
    mean_dir /= static_cast<double>(m);
    const double residual = (mean_dir.array() * detail::coordinate_scale(layout, w).array()).matrix().norm();
    res.residual.push_back(residual);
    res.iterations = it;
    if (residual < opts.tol) {
      res.converged = true;
      break;
    }
    bool accepted = false;
    double step = opts.step;
    for (int bt = 0; bt <= opts.max_backtrack; ++bt, step *= 0.5) {
      const SrvfTree trial = detail::axpy(mu, mean_dir, step, layout);
      auto trial_set = detail::register_all(trial, samples, w, opts);
      if (trial_set.objective <= set.objective) {
        mu = trial;
        set = std::move(trial_set);
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    res.objective.push_back(set.objective);
    res.iterations = it + 1;
  }

  Point2 anchor = Point2::Zero();
  for (const auto& s : samples) anchor += s.anchor;
  mu.anchor = anchor / static_cast<double>(m);
  res.mean = std::move(mu);
  res.registered = std::move(set.trees);
  return res;
}

// ---------------------------------------------------------------------------
// Principal modes.

struct Modes {
  Eigen::VectorXd eigenvalues;  ///< all m eigenvalues, descending, clamped >= 0
  Eigen::MatrixXd vectors;      ///< orthonormal columns, one per nonzero eigenvalue
  int retained = 0;             ///< smallest count with cumulative ratio > 0.99
};

inline constexpr double kRetainedVariance = 0.99;

/// Modes of the covariance (1/(m-1)) sum v v^T of the columns of `tangents`,
/// computed from the m x m Gram matrix.
inline Modes covariance_modes(const Eigen::MatrixXd& tangents) {
  const Eigen::Index m = tangents.cols();
  if (m < 2) throw ValidationError("covariance_modes: need at least two samples");
  const Eigen::MatrixXd gram = tangents.transpose() * tangents / static_cast<double>(m - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  // Eigen returns ascending order.
  Modes out;
  out.eigenvalues = eig.eigenvalues().reverse().cwiseMax(0.0);
  const Eigen::MatrixXd u = eig.eigenvectors().rowwise().reverse();
  const double top = out.eigenvalues(0);
  const double cutoff = std::max(top * 1e-14, std::numeric_limits<double>::min());

  std::vector<Eigen::VectorXd> cols;
  for (Eigen::Index j = 0; j < m; ++j) {
    if (!(out.eigenvalues(j) > cutoff)) {
      out.eigenvalues(j) = std::max(out.eigenvalues(j), 0.0);
      continue;
    }
    Eigen::VectorXd v = tangents * u.col(j);
    // Modified Gram-Schmidt against the modes kept so far.
    for (const auto& c : cols) v -= c.dot(v) * c;
    const double nv = v.norm();
    if (!(nv > 0.0)) continue;
    cols.push_back(v / nv);
  }
  out.vectors.resize(tangents.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) out.vectors.col(static_cast<Eigen::Index>(j)) = cols[j];
  // Eigenvalues of directions that were dropped are zero.
  for (Eigen::Index j = static_cast<Eigen::Index>(cols.size()); j < m; ++j) out.eigenvalues(j) = 0.0;

  const double total = out.eigenvalues.sum();
  if (total > 0.0) {
    double acc = 0.0;
    for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(cols.size()); ++j) {
      acc += out.eigenvalues(j);
      out.retained = static_cast<int>(j + 1);
      if (acc / total > kRetainedVariance) break;
    }
  }
  return out;
}

struct Atlas {
  SrvfTree mean;
  TangentLayout layout;
  Weights weights;
  Sampling sampling;
  Eigen::VectorXd eigenvalues;
  Eigen::MatrixXd modes;            ///< columns: orthonormal tangent directions
  int retained = 0;
  Eigen::MatrixXd training_coeffs;  ///< row i: b^i over all stored modes
  std::vector<std::string> sample_ids;

  int mode_count() const { return static_cast<int>(modes.cols()); }
};

/// Tangent vectors of registered samples as columns.
inline Eigen::MatrixXd tangent_matrix(const SrvfTree& mu, const std::vector<SrvfTree>& registered, const Weights& w) {
  const auto layout = TangentLayout::of(mu);
  Eigen::MatrixXd v(layout.dim(), static_cast<Eigen::Index>(registered.size()));
  for (std::size_t i = 0; i < registered.size(); ++i)
    v.col(static_cast<Eigen::Index>(i)) = log_map(mu, registered[i], w).coords;
  return v;
}

inline Atlas atlas_from_registered(const SrvfTree& mu, const std::vector<SrvfTree>& registered, const Weights& w,
                                   const Sampling& sampling) {
  Atlas a;
  a.mean = mu;
  a.layout = TangentLayout::of(mu);
  a.weights = w;
  a.sampling = sampling;
  const Eigen::MatrixXd v = tangent_matrix(mu, registered, w);
  auto modes = covariance_modes(v);
  a.eigenvalues = modes.eigenvalues;
  a.modes = std::move(modes.vectors);
  a.retained = modes.retained;
  a.training_coeffs = v.transpose() * a.modes;
  for (Eigen::Index j = 0; j < a.modes.cols(); ++j) a.training_coeffs.col(j) /= std::sqrt(a.eigenvalues(j));
  return a;
}

inline Atlas fit_atlas(const std::vector<RootTree>& trees, const Weights& w, const KarcherOptions& opts = {},
                       KarcherResult* karcher = nullptr) {
  if (trees.size() < 2) throw ValidationError("fit_atlas: need at least two trees");
  auto km = karcher_mean(trees, w, opts);
  Atlas a = atlas_from_registered(km.mean, km.registered, w, opts.metric.sampling);
  for (const auto& t : trees) a.sample_ids.push_back(t.id);
  if (karcher) *karcher = std::move(km);
  return a;
}

/// Tangent vector sum_j b_j sqrt(lambda_j) Lambda_j over the first b.size() modes.
inline TangentVector coefficients_to_tangent(const Atlas& atlas, const Eigen::VectorXd& b) {
  if (b.size() > atlas.modes.cols()) throw LayoutError("more coefficients than modes");
  TangentVector v{Eigen::VectorXd::Zero(atlas.layout.dim()), atlas.layout};
  for (Eigen::Index j = 0; j < b.size(); ++j) v.coords += b(j) * std::sqrt(atlas.eigenvalues(j)) * atlas.modes.col(j);
  return v;
}

inline SrvfTree coefficients_to_srvft(const Atlas& atlas, const Eigen::VectorXd& b, int* clamped = nullptr) {
  return exp_map(atlas.mean, coefficients_to_tangent(atlas, b), atlas.weights, clamped);
}

inline RootTree coefficients_to_tree(const Atlas& atlas, const Eigen::VectorXd& b) {
  return srvft_to_tree(coefficients_to_srvft(atlas, b));
}

/// Tree at alpha standard deviations along mode `index` (0-based).
inline RootTree mode_path(const Atlas& atlas, int index, double alpha) {
  if (index < 0 || index >= std::max(atlas.retained, 0) || index >= atlas.mode_count())
    throw ValidationError("mode index " + std::to_string(index + 1) + " out of range (retained modes: " +
                          std::to_string(atlas.retained) + ")");
  Eigen::VectorXd b = Eigen::VectorXd::Zero(index + 1);
  b(index) = alpha;
  return coefficients_to_tree(atlas, b);
}

struct RandomSample {
  Eigen::VectorXd coeffs;
  RootTree tree;
};

/// Coefficients drawn standard normal and redrawn until inside [lo, hi].
inline RandomSample sample_random(const Atlas& atlas, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  if (atlas.retained < 1) throw ValidationError("sample_random: atlas has no retained modes");
  if (!(lo < hi) || lo > 0.0 || hi < 0.0) throw ValidationError("sample_random: coefficient range must contain 0");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  RandomSample out;
  out.coeffs.resize(atlas.retained);
  for (int j = 0; j < atlas.retained; ++j) {
    double b;
    do {
      b = normal(rng);
    } while (b < lo || b > hi);
    out.coeffs(j) = b;
  }
  out.tree = coefficients_to_tree(atlas, out.coeffs);
  return out;
}

// ---------------------------------------------------------------------------
// Regression.

struct RegressionModel {
  Eigen::MatrixXd M;  ///< retained x (l + 1); last column is the affine term
  std::vector<std::string> param_names;
  bool rank_deficient = false;
  Atlas atlas;
};

/// Moore-Penrose pseudoinverse; singular values below rel_tol * max are zero.
inline Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& a, double rel_tol = 1e-10, Eigen::Index* rank = nullptr) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double cutoff = sv.size() ? rel_tol * sv(0) : 0.0;
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(sv.size());
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > cutoff && sv(i) > 0.0) {
      inv(i) = 1.0 / sv(i);
      ++r;
    }
  if (rank) *rank = r;
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

/// Least-squares M with M [p; 1] ~ b over the training set. `params` has one
/// row per training sample, in atlas order.
inline RegressionModel fit_regression(const Atlas& atlas, const Eigen::MatrixXd& params,
                                      std::vector<std::string> names = {}) {
  const Eigen::Index m = atlas.training_coeffs.rows();
  const Eigen::Index l = params.cols();
  if (params.rows() != m) throw LayoutError("fit_regression: one parameter row per training sample required");
  if (l + 1 > m) throw ValidationError("fit_regression: need at least l + 1 training samples");
  if (!params.allFinite()) throw ValidationError("fit_regression: parameters must be finite");
  if (atlas.retained < 1) throw ValidationError("fit_regression: atlas has no retained modes");

  Eigen::MatrixXd p(l + 1, m);
  p.topRows(l) = params.transpose();
  p.row(l).setOnes();
  const Eigen::MatrixXd b = atlas.training_coeffs.leftCols(atlas.retained).transpose();
  Eigen::Index rank = 0;
  RegressionModel model;
  model.M = b * pseudo_inverse(p, 1e-10, &rank);
  model.rank_deficient = rank < l + 1;
  if (names.empty())
    for (Eigen::Index i = 0; i < l; ++i) names.push_back("p" + std::to_string(i + 1));
  if (static_cast<Eigen::Index>(names.size()) != l) throw LayoutError("fit_regression: wrong number of names");
  model.param_names = std::move(names);
  model.atlas = atlas;
  return model;
}

inline Eigen::VectorXd predict_coefficients(const RegressionModel& model, const Eigen::VectorXd& p) {
  const Eigen::Index l = static_cast<Eigen::Index>(model.param_names.size());
  if (p.size() != l) throw LayoutError("predict: expected " + std::to_string(l) + " parameters");
  if (!p.allFinite()) throw ValidationError("predict: parameters must be finite");
  Eigen::VectorXd x(l + 1);
  x << p, 1.0;
  return model.M * x;
}

inline RootTree predict(const RegressionModel& model, const Eigen::VectorXd& p) {
  return coefficients_to_tree(model.atlas, predict_coefficients(model, p));
}

/// Rows of (main length, mean lateral length, lateral length std).
inline Eigen::MatrixXd bio_param_matrix(const std::vector<RootTree>& trees) {
  Eigen::MatrixXd p(static_cast<Eigen::Index>(trees.size()), 3);
  for (std::size_t i = 0; i < trees.size(); ++i) {
    const auto b = extract_bio_params(trees[i]);
    p.row(static_cast<Eigen::Index>(i)) << b.main_length, b.lateral_mean, b.lateral_std;
  }
  return p;
}

inline const std::vector<std::string>& bio_param_names() {
  static const std::vector<std::string> names{"main_length", "lateral_mean_length", "lateral_std_length"};
  return names;
}

// ---------------------------------------------------------------------------
// Serialization.

namespace detail {

inline nlohmann::json matrix_rows(const Eigen::MatrixXd& a) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    std::vector<double> r(static_cast<std::size_t>(a.cols()));
    for (Eigen::Index j = 0; j < a.cols(); ++j) r[static_cast<std::size_t>(j)] = a(i, j);
    rows.push_back(r);
  }
  return rows;
}

inline Eigen::MatrixXd matrix_from_rows(const nlohmann::json& rows, Eigen::Index cols) {
  Eigen::MatrixXd a(static_cast<Eigen::Index>(rows.size()), cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (static_cast<Eigen::Index>(rows[i].size()) != cols) throw ParseError("ragged matrix");
    for (Eigen::Index j = 0; j < cols; ++j) a(static_cast<Eigen::Index>(i), j) = rows[i][static_cast<std::size_t>(j)].get<double>();
  }
  return a;
}

}  // namespace detail

inline nlohmann::json weights_to_json(const Weights& w) {
  return {{"lambda_m", w.main}, {"lambda_s", w.lateral}, {"lambda_p", w.position}};
}

inline Weights weights_from_json(const nlohmann::json& j) {
  return {j.at("lambda_m").get<double>(), j.at("lambda_s").get<double>(), j.at("lambda_p").get<double>()};
}

inline nlohmann::json atlas_to_json(const Atlas& a) {
  std::vector<double> ev(a.eigenvalues.data(), a.eigenvalues.data() + a.eigenvalues.size());
  // Modes are stored one per row.
  return {{"format", "treeshape-atlas"},
          {"version", 1},
          {"weights", weights_to_json(a.weights)},
          {"sampling", {{"n_main", a.sampling.n_main}, {"n_lat", a.sampling.n_lat}}},
          {"layout", {{"n_main", a.layout.n_main}, {"n_lat", a.layout.n_lat}, {"n_laterals", a.layout.n_laterals}}},
          {"mean", srvft_to_json(a.mean)},
          {"eigenvalues", ev},
          {"retained", a.retained},
          {"modes", detail::matrix_rows(a.modes.transpose())},
          {"training_coeffs", detail::matrix_rows(a.training_coeffs)},
          {"sample_ids", a.sample_ids}};
}

inline Atlas atlas_from_json(const nlohmann::json& j) {
  try {
    if (j.value("format", std::string{}) != "treeshape-atlas") throw ParseError("not an atlas document");
    Atlas a;
    a.weights = weights_from_json(j.at("weights"));
    a.sampling = {j.at("sampling").at("n_main").get<int>(), j.at("sampling").at("n_lat").get<int>()};
    const auto& l = j.at("layout");
    a.layout = {l.at("n_main").get<int>(), l.at("n_lat").get<int>(), l.at("n_laterals").get<std::size_t>()};
    a.mean = srvft_from_json(j.at("mean"));
    if (!(TangentLayout::of(a.mean) == a.layout)) throw ParseError("atlas mean does not match its layout");
    const auto ev = j.at("eigenvalues").get<std::vector<double>>();
    a.eigenvalues = Eigen::Map<const Eigen::VectorXd>(ev.data(), static_cast<Eigen::Index>(ev.size()));
    a.retained = j.at("retained").get<int>();
    a.modes = detail::matrix_from_rows(j.at("modes"), a.layout.dim()).transpose();
    a.training_coeffs = detail::matrix_from_rows(j.at("training_coeffs"), a.modes.cols());
    a.sample_ids = j.at("sample_ids").get<std::vector<std::string>>();
    if (a.retained > a.modes.cols() || a.modes.cols() > a.eigenvalues.size())
      throw ParseError("atlas mode counts are inconsistent");
    return a;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("atlas: ") + e.what());
  }
}

inline nlohmann::json regression_to_json(const RegressionModel& m, const std::string& atlas_path = {}) {
  nlohmann::json j = {{"format", "treeshape-regression"},
                      {"version", 1},
                      {"param_names", m.param_names},
                      {"M", detail::matrix_rows(m.M)},
                      {"rank_deficient", m.rank_deficient},
                      {"atlas", atlas_to_json(m.atlas)}};
  if (!atlas_path.empty()) j["atlas_path"] = atlas_path;
  return j;
}

inline RegressionModel regression_from_json(const nlohmann::json& j) {
  try {
    if (j.value("format", std::string{}) != "treeshape-regression") throw ParseError("not a regression model");
    RegressionModel m;
    m.param_names = j.at("param_names").get<std::vector<std::string>>();
    m.M = detail::matrix_from_rows(j.at("M"), static_cast<Eigen::Index>(m.param_names.size()) + 1);
    m.rank_deficient = j.value("rank_deficient", false);
    if (j.contains("atlas"))
      m.atlas = atlas_from_json(j.at("atlas"));
    else if (j.contains("atlas_path"))
      m.atlas = atlas_from_json(detail::read_json_file(j.at("atlas_path").get<std::string>()));
    else
      throw ParseError("regression model has no atlas");
    if (m.M.rows() != m.atlas.retained) throw ParseError("regression rows differ from retained modes");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("regression model: ") + e.what());
  }
}

}  // namespace treeshape
