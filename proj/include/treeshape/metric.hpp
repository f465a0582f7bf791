#pragma once

// Registered distances, geodesics and pairwise distance matrices between trees.

#include <Eigen/Core>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "treeshape/error.hpp"
#include "treeshape/parallel.hpp"
#include "treeshape/registration.hpp"
#include "treeshape/srvf.hpp"
#include "treeshape/tree_io.hpp"
#include "treeshape/tree_model.hpp"

namespace treeshape {

struct MetricOptions {
  Sampling sampling;
  RegistrationOptions registration;
};

/// Outcome of registering b onto a. `squared` is the minimized pre-shape
/// dissimilarity; `distance` its square root.
struct PairAlignment {
  SrvfTree source;
  SrvfTree target;  ///< registered onto source, laterals index-aligned
  Registration registration;
  double squared = 0.0;
  double distance = 0.0;
};

inline PairAlignment align_pair(const RootTree& a, const RootTree& b, const Weights& w, const MetricOptions& opts = {}) {
  const auto [a2, b2] = augment_pair(a, b);
  PairAlignment out;
  out.source = tree_to_srvft(a2, opts.sampling);
  const SrvfTree qb = tree_to_srvft(b2, opts.sampling);
  out.registration = register_trees(out.source, qb, w, opts.registration);
  out.target = apply_registration(qb, out.registration, opts.registration.remap_attachments);
  out.squared = std::max(out.registration.cost, 0.0);
  out.distance = std::sqrt(out.squared);
  return out;
}

/// Matched pairs where exactly one side is a virtual lateral, i.e. branches
/// created or deleted rather than slid.
inline std::size_t real_virtual_matches(const PairAlignment& p) {
  std::size_t count = 0;
  for (std::size_t k = 0; k < p.source.laterals.size(); ++k)
    if (is_null(p.source.laterals[k].q) != is_null(p.target.laterals[k].q)) ++count;
  return count;
}

inline double distance(const RootTree& a, const RootTree& b, const Weights& w, const MetricOptions& opts = {}) {
  return align_pair(a, b, w, opts).distance;
}

/// Registered distance between two SRVF trees that already share a layout,
/// such as points on a geodesic.
inline double srvft_distance(const SrvfTree& a, const SrvfTree& b, const Weights& w, const MetricOptions& opts = {}) {
  return std::sqrt(std::max(register_trees(a, b, w, opts.registration).cost, 0.0));
}

// ---------------------------------------------------------------------------
// Geodesics.

/// (1 - r) a + r b in SRVF-tree coordinates, anchors included.
inline SrvfTree interpolate(const SrvfTree& a, const SrvfTree& b, double r) {
  check_aligned(a, b);
  SrvfTree out;
  out.anchor = (1.0 - r) * a.anchor + r * b.anchor;
  out.main.samples = (1.0 - r) * a.main.samples + r * b.main.samples;
  out.laterals.reserve(a.laterals.size());
  for (std::size_t k = 0; k < a.laterals.size(); ++k) {
    const auto& la = a.laterals[k];
    const auto& lb = b.laterals[k];
    if (la.q.size() != lb.q.size()) throw LayoutError("interpolate: lateral sample counts differ");
    out.laterals.push_back({{(1.0 - r) * la.q.samples + r * lb.q.samples}, (1.0 - r) * la.s + r * lb.s});
  }
  return out;
}

struct Geodesic {
  std::vector<SrvfTree> steps;
  std::vector<double> r_values;
  PairAlignment alignment;

  /// Trees along the path. `labels[i][k]` is the correspondence index of
  /// lateral k of tree i (shared across steps).
  std::vector<RootTree> trees(std::vector<std::vector<std::size_t>>* labels = nullptr) const {
    std::vector<RootTree> out;
    if (labels) labels->clear();
    for (std::size_t i = 0; i < steps.size(); ++i) {
      std::vector<std::size_t> src;
      out.push_back(srvft_to_tree(steps[i], &src));
      out.back().id = "step" + std::to_string(i);
      if (labels) labels->push_back(std::move(src));
    }
    return out;
  }
};

/// Linear path between a and the registered b, sampled at `steps` uniform r.
inline Geodesic geodesic(const RootTree& a, const RootTree& b, const Weights& w, int steps,
                         const MetricOptions& opts = {}) {
  if (steps < 2) throw ValidationError("geodesic: steps must be at least 2");
  Geodesic g;
  g.alignment = align_pair(a, b, w, opts);
  for (int i = 0; i < steps; ++i) {
    const double r = static_cast<double>(i) / (steps - 1);
    g.r_values.push_back(r);
    g.steps.push_back(interpolate(g.alignment.source, g.alignment.target, r));
  }
  return g;
}

// ---------------------------------------------------------------------------
// Distance matrices.

struct DistanceMatrix {
  std::vector<std::string> labels;
  Eigen::MatrixXd values;
  /// Per unordered pair failures, "i,j: message". Failed entries hold NaN.
  std::vector<std::string> errors;

  std::size_t size() const { return labels.size(); }
  bool valid() const { return errors.empty() && values.allFinite(); }

  void validate(double tol = 1e-9) const {
    const auto n = static_cast<Eigen::Index>(labels.size());
    if (values.rows() != n || values.cols() != n) throw ValidationError("distance matrix shape mismatch");
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) {
        const double v = values(i, j);
        if (!std::isfinite(v)) throw ValidationError("distance matrix has invalid entries");
        if (v < 0.0) throw ValidationError("distance matrix has negative entries");
        if (std::abs(v - values(j, i)) > tol) throw ValidationError("distance matrix is not symmetric");
      }
  }
};

/// Registered distances for every unordered pair; each pair is augmented on
/// its own. Deterministic for any thread count.
inline DistanceMatrix pairwise_matrix(const std::vector<RootTree>& trees, const Weights& w,
                                      const MetricOptions& opts = {}, int threads = 1) {
  if (trees.size() < 2) throw ValidationError("pairwise_matrix: need at least two trees");
  const std::size_t m = trees.size();
  DistanceMatrix d;
  for (const auto& t : trees) d.labels.push_back(t.id);
  d.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j) pairs.emplace_back(i, j);
  std::vector<double> result(pairs.size(), std::numeric_limits<double>::quiet_NaN());
  std::vector<std::string> failure(pairs.size());

  parallel_for(pairs.size(), threads, [&](std::size_t p) {
    try {
      result[p] = distance(trees[pairs[p].first], trees[pairs[p].second], w, opts);
    } catch (const std::exception& e) {
      failure[p] = e.what();
    }
  });

  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto [i, j] = pairs[p];
    d.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = result[p];
    d.values(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = result[p];
    if (!failure[p].empty())
      d.errors.push_back(std::to_string(i) + "," + std::to_string(j) + ": " + failure[p]);
  }
  return d;
}

namespace detail {

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

/// Header row of ids, then one numeric row per tree.
inline std::string matrix_to_csv(const DistanceMatrix& d) {
  std::ostringstream out;
  for (std::size_t i = 0; i < d.labels.size(); ++i) out << (i ? "," : "") << d.labels[i];
  out << "\n";
  for (Eigen::Index i = 0; i < d.values.rows(); ++i) {
    for (Eigen::Index j = 0; j < d.values.cols(); ++j) out << (j ? "," : "") << detail::format_double(d.values(i, j));
    out << "\n";
  }
  return out.str();
}

inline nlohmann::json matrix_to_json(const DistanceMatrix& d) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < d.values.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < d.values.cols(); ++j) {
      const double v = d.values(i, j);
      row.push_back(std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr));
    }
    rows.push_back(std::move(row));
  }
  return {{"labels", d.labels}, {"values", rows}, {"errors", d.errors}};
}

inline DistanceMatrix matrix_from_json(const nlohmann::json& j) {
  try {
    DistanceMatrix d;
    d.labels = j.at("labels").get<std::vector<std::string>>();
    const auto n = static_cast<Eigen::Index>(d.labels.size());
    const auto& rows = j.at("values");
    if (static_cast<Eigen::Index>(rows.size()) != n) throw ParseError("matrix row count differs from labels");
    d.values.resize(n, n);
    for (Eigen::Index r = 0; r < n; ++r) {
      const auto& row = rows[static_cast<std::size_t>(r)];
      if (static_cast<Eigen::Index>(row.size()) != n) throw ParseError("matrix row has wrong length");
      for (Eigen::Index c = 0; c < n; ++c) {
        const auto& v = row[static_cast<std::size_t>(c)];
        d.values(r, c) = v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
      }
    }
    if (j.contains("errors")) d.errors = j.at("errors").get<std::vector<std::string>>();
    return d;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("distance matrix: ") + e.what());
  }
}

inline DistanceMatrix matrix_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  auto split = [](const std::string& s) {
    std::vector<std::string> cells;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    return cells;
  };
  DistanceMatrix d;
  if (!std::getline(in, line)) throw ParseError("empty CSV matrix");
  d.labels = split(line);
  const auto n = static_cast<Eigen::Index>(d.labels.size());
  d.values.resize(n, n);
  Eigen::Index r = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split(line);
    if (r >= n || static_cast<Eigen::Index>(cells.size()) != n) throw ParseError("CSV matrix is not square");
    for (Eigen::Index c = 0; c < n; ++c) {
      const auto& cell = cells[static_cast<std::size_t>(c)];
      try {
        d.values(r, c) = cell == "nan" ? std::numeric_limits<double>::quiet_NaN() : std::stod(cell);
      } catch (const std::exception&) {
        throw ParseError("CSV matrix: bad number '" + cell + "'");
      }
    }
    ++r;
  }
  if (r != n) throw ParseError("CSV matrix is not square");
  return d;
}

inline DistanceMatrix load_matrix(const std::filesystem::path& path) {
  if (path.extension() == ".csv") {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return matrix_from_csv(ss.str());
  }
  return matrix_from_json(detail::read_json_file(path));
}

}  // namespace treeshape
