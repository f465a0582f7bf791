#pragma once

// Agglomerative hierarchical clustering on a distance matrix.
// Node ids follow the usual convention: leaves are 0..m-1 and the i-th merge
// creates node m+i. Each merge lists the smaller node id first.

#include <Eigen/Core>
#include <json.hpp>

#include <algorithm>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "treeshape/error.hpp"
#include "treeshape/metric.hpp"

namespace treeshape {

enum class Linkage { single, complete, average };

inline Linkage parse_linkage(const std::string& name) {
  if (name == "single") return Linkage::single;
  if (name == "complete") return Linkage::complete;
  if (name == "average") return Linkage::average;
  throw ValidationError("unknown linkage '" + name + "' (single, complete, average)");
}

inline std::string to_string(Linkage l) {
  switch (l) {
    case Linkage::single: return "single";
    case Linkage::complete: return "complete";
    case Linkage::average: return "average";
  }
  return "single";
}

struct Merge {
  std::size_t left = 0;
  std::size_t right = 0;
  double height = 0.0;
  std::size_t size = 0;
};

struct Dendrogram {
  std::vector<Merge> merges;
  std::vector<std::string> leaf_labels;
  Linkage method = Linkage::single;

  std::size_t leaf_count() const { return leaf_labels.size(); }
};

/// Greedy agglomeration. Clusters keep the slot of their smallest leaf;
/// among equal distances the pair with the smallest slots merges first.
inline Dendrogram linkage(const DistanceMatrix& d, Linkage method = Linkage::single) {
  d.validate();
  const std::size_t m = d.size();
  Dendrogram out;
  out.leaf_labels = d.labels;
  out.method = method;
  if (m == 0) return out;

  Eigen::MatrixXd dist = d.values;
  std::vector<std::size_t> node(m), size(m, 1);
  std::iota(node.begin(), node.end(), std::size_t{0});
  std::vector<char> active(m, 1);

  for (std::size_t step = 0; step + 1 < m; ++step) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t bi = 0, bj = 0;
    for (std::size_t i = 0; i < m; ++i) {
      if (!active[i]) continue;
      for (std::size_t j = i + 1; j < m; ++j) {
        if (!active[j]) continue;
        const double v = dist(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        if (v < best) {
          best = v;
          bi = i;
          bj = j;
        }
      }
    }
    out.merges.push_back({std::min(node[bi], node[bj]), std::max(node[bi], node[bj]), best, size[bi] + size[bj]});

    for (std::size_t k = 0; k < m; ++k) {
      if (!active[k] || k == bi || k == bj) continue;
      const auto ki = static_cast<Eigen::Index>(k);
      const double a = dist(static_cast<Eigen::Index>(bi), ki);
      const double b = dist(static_cast<Eigen::Index>(bj), ki);
      double v = 0.0;
      switch (method) {
        case Linkage::single: v = std::min(a, b); break;
        case Linkage::complete: v = std::max(a, b); break;
        case Linkage::average:
          v = (static_cast<double>(size[bi]) * a + static_cast<double>(size[bj]) * b) /
              static_cast<double>(size[bi] + size[bj]);
          break;
      }
      dist(static_cast<Eigen::Index>(bi), ki) = dist(ki, static_cast<Eigen::Index>(bi)) = v;
    }
    size[bi] += size[bj];
    node[bi] = m + step;
    active[bj] = 0;
  }
  return out;
}

/// Flat clustering into k groups: all but the last k-1 merges are applied.
/// Labels are 0..k-1 in order of first appearance over the leaves.
inline std::vector<int> cut(const Dendrogram& dend, std::size_t k) {
  const std::size_t m = dend.leaf_count();
  if (k < 1 || k > m) throw ValidationError("cut: k must be between 1 and the leaf count");
  std::vector<std::size_t> parent(2 * m);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&parent](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (std::size_t i = 0; i + k < m; ++i) {
    const auto& mg = dend.merges[i];
    parent[find(mg.left)] = m + i;
    parent[find(mg.right)] = m + i;
  }
  std::vector<int> labels(m, -1);
  std::vector<std::size_t> roots;
  for (std::size_t leaf = 0; leaf < m; ++leaf) {
    const std::size_t r = find(leaf);
    auto it = std::find(roots.begin(), roots.end(), r);
    if (it == roots.end()) {
      roots.push_back(r);
      labels[leaf] = static_cast<int>(roots.size() - 1);
    } else {
      labels[leaf] = static_cast<int>(it - roots.begin());
    }
  }
  return labels;
}

/// Leaves in drawing order (left subtree first).
inline std::vector<std::size_t> leaf_order(const Dendrogram& dend) {
  const std::size_t m = dend.leaf_count();
  if (m == 0) return {};
  if (dend.merges.empty()) return {0};
  std::vector<std::size_t> order;
  std::vector<std::size_t> stack{m + dend.merges.size() - 1};
  while (!stack.empty()) {
    const std::size_t n = stack.back();
    stack.pop_back();
    if (n < m) {
      order.push_back(n);
    } else {
      stack.push_back(dend.merges[n - m].right);
      stack.push_back(dend.merges[n - m].left);
    }
  }
  return order;
}

inline nlohmann::json dendrogram_to_json(const Dendrogram& d) {
  nlohmann::json merges = nlohmann::json::array();
  for (const auto& mg : d.merges)
    merges.push_back({{"left", mg.left}, {"right", mg.right}, {"height", mg.height}, {"size", mg.size}});
  return {{"method", to_string(d.method)}, {"leaf_labels", d.leaf_labels}, {"merges", merges}};
}

inline Dendrogram dendrogram_from_json(const nlohmann::json& j) {
  try {
    Dendrogram d;
    d.method = parse_linkage(j.at("method").get<std::string>());
    d.leaf_labels = j.at("leaf_labels").get<std::vector<std::string>>();
    for (const auto& mj : j.at("merges"))
      d.merges.push_back({mj.at("left").get<std::size_t>(), mj.at("right").get<std::size_t>(),
                          mj.at("height").get<double>(), mj.at("size").get<std::size_t>()});
    if (!d.leaf_labels.empty() && d.merges.size() + 1 != d.leaf_labels.size())
      throw ParseError("dendrogram needs exactly m-1 merges");
    return d;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("dendrogram: ") + e.what());
  }
}

}  // namespace treeshape
