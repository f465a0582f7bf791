#pragma once

// Square linear assignment (Kuhn-Munkres with row potentials), O(n^3).

#include <Eigen/Core>

#include <cstddef>
#include <limits>
#include <vector>

#include "treeshape/error.hpp"

namespace treeshape {

struct Assignment {
  std::vector<std::size_t> row_to_col;
  double cost = 0.0;
};

/// Minimizes sum_i cost(i, row_to_col[i]) over permutations.
inline Assignment solve_assignment(const Eigen::MatrixXd& cost) {
  if (cost.rows() != cost.cols()) throw LayoutError("solve_assignment: cost matrix must be square");
  const auto n = static_cast<std::size_t>(cost.rows());
  Assignment result;
  if (n == 0) return result;

  constexpr double inf = std::numeric_limits<double>::infinity();
  // 1-based arrays; column 0 is a sentinel.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);

  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(static_cast<Eigen::Index>(i0 - 1), static_cast<Eigen::Index>(j - 1)) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  result.row_to_col.assign(n, 0);
  for (std::size_t j = 1; j <= n; ++j) result.row_to_col[p[j] - 1] = j - 1;
  for (std::size_t i = 0; i < n; ++i)
    result.cost += cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(result.row_to_col[i]));
  return result;
}

}  // namespace treeshape
