// Kuhn-Munkres minimum-cost assignment over rectangular cost matrices with
// forbidden cells.
#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace chainflow {

using ForbidMask = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

struct Assignment {
  std::vector<int> row_to_col;  // -1 when unmatched
  std::vector<int> col_to_row;  // -1 when unmatched
  double total_cost = 0.0;

  std::size_t matched() const {
    std::size_t n = 0;
    for (int c : row_to_col) n += c >= 0;
    return n;
  }
};

namespace detail {

// Square Hungarian method with row/column potentials, O(n^3). Returns the
// column assigned to each row.
template <typename Scalar>
std::vector<int> hungarian_square(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& a) {
  const int n = static_cast<int>(a.rows());
  const Scalar inf = std::numeric_limits<Scalar>::infinity();
  std::vector<Scalar> u(n + 1, Scalar(0)), v(n + 1, Scalar(0));
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<Scalar> minv(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const int i0 = p[j0];
      Scalar delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const Scalar cur = a(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
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
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> row_to_col(n, -1);
  for (int j = 1; j <= n; ++j) {
    if (p[j] > 0) row_to_col[p[j] - 1] = j - 1;
  }
  return row_to_col;
}

}  // namespace detail

/// Minimum-cost matching restricted to permitted cells. Among matchings it
/// first maximizes the number of matched pairs, then minimizes their total
/// cost. Rectangular inputs are padded internally; rows or columns left
/// without a permitted partner come back unmatched.
template <typename CostDerived, typename MaskDerived>
Assignment km_assign(const Eigen::MatrixBase<CostDerived>& cost,
                     const Eigen::MatrixBase<MaskDerived>& forbid) {
  using Scalar = typename CostDerived::Scalar;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const Eigen::Index rows = cost.rows();
  const Eigen::Index cols = cost.cols();
  if (forbid.rows() != rows || forbid.cols() != cols) {
    throw std::invalid_argument("km_assign: mask shape differs from cost");
  }

  Assignment out;
  out.row_to_col.assign(rows, -1);
  out.col_to_row.assign(cols, -1);
  if (rows == 0 || cols == 0) return out;

  Scalar max_abs(0);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      if (forbid(r, c)) continue;
      if (!std::isfinite(static_cast<double>(cost(r, c)))) {
        throw std::invalid_argument("km_assign: non-finite permitted cost");
      }
      max_abs = std::max<Scalar>(max_abs, std::abs(cost(r, c)));
    }
  }

  // A forbidden cell costs more than any difference in permitted cost
  // between two assignments, so one fewer forbidden cell always wins.
  const Eigen::Index n = std::max(rows, cols);
  const Scalar big = Scalar(n) * (Scalar(2) * max_abs + Scalar(1)) + Scalar(1);
  Matrix square = Matrix::Zero(n, n);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      square(r, c) = forbid(r, c) ? big : Scalar(cost(r, c));
    }
  }

  const auto assigned = detail::hungarian_square<Scalar>(square);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const int c = assigned[r];
    if (c < 0 || c >= cols || forbid(r, c)) continue;
    out.row_to_col[r] = c;
    out.col_to_row[c] = static_cast<int>(r);
    out.total_cost += static_cast<double>(cost(r, c));
  }
  return out;
}

/// Every cell permitted.
template <typename CostDerived>
Assignment km_assign(const Eigen::MatrixBase<CostDerived>& cost) {
  return km_assign(cost, ForbidMask::Constant(cost.rows(), cost.cols(), false));
}

}  // namespace chainflow
