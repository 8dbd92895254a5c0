// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "shadowint/core/types.hpp"

namespace shadowint {

enum class LocalMetric { kEuclidean, kCosineDistance };

std::string to_string(LocalMetric metric);
LocalMetric local_metric_from_string(const std::string& name);

/// Monotone contiguous warping path. Indices are 0-based: steps[k] = (i, j)
/// pairs frame i of A with frame j of B.
struct WarpPath {
  std::vector<std::pair<int, int>> steps;
  std::vector<double> step_costs;
  int length_a = 0;
  int length_b = 0;

  double total_cost() const;
  /// Throws ValidationError unless the path runs (0,0) -> (T_A-1, T_B-1)
  /// with unit steps {(1,0),(0,1),(1,1)} and non-negative costs.
  void validate() const;
};

/// Local cost between two frames. Cosine distance is 1 - cos(a, b), evaluated
/// as half the squared distance of the unit vectors; a zero vector has
/// similarity 0 (distance 1) with anything.
template <typename DerivedA, typename DerivedB>
double local_cost(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b,
                  LocalMetric metric) {
  const auto ad = a.template cast<double>();
  const auto bd = b.template cast<double>();
  if (metric == LocalMetric::kEuclidean) return (ad - bd).norm();
  const double na = ad.norm();
  const double nb = bd.norm();
  if (na == 0.0 || nb == 0.0) return 1.0;
  const double d = 0.5 * (ad / na - bd / nb).squaredNorm();
  return std::clamp(d, 0.0, 2.0);
}

/// Minimum-cost DTW between the rows of `a` and `b`. Backtrace ties prefer
/// the diagonal predecessor, then (i-1, j), then (i, j-1).
template <typename DerivedA, typename DerivedB>
WarpPath dtw_align(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b,
                   LocalMetric metric) {
  const auto n = static_cast<int>(a.rows());
  const auto m = static_cast<int>(b.rows());
  if (n < 1 || m < 1) throw ValidationError("dtw_align: empty sequence");
  if (a.cols() != b.cols()) {
    throw ValidationError("dtw_align: dimension mismatch " + std::to_string(a.cols()) + " vs " +
                          std::to_string(b.cols()));
  }

  Eigen::MatrixXd cost(n, m);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) cost(i, j) = local_cost(a.row(i), b.row(j), metric);
  }

  constexpr double kInf = std::numeric_limits<double>::infinity();
  Eigen::MatrixXd acc = Eigen::MatrixXd::Constant(n, m, kInf);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) {
      double best = 0.0;
      if (i > 0 || j > 0) {
        best = kInf;
        if (i > 0 && j > 0) best = std::min(best, acc(i - 1, j - 1));
        if (i > 0) best = std::min(best, acc(i - 1, j));
        if (j > 0) best = std::min(best, acc(i, j - 1));
      }
      acc(i, j) = cost(i, j) + best;
    }
  }

  WarpPath path;
  path.length_a = n;
  path.length_b = m;
  int i = n - 1;
  int j = m - 1;
  path.steps.emplace_back(i, j);
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0) {
      const double diag = acc(i - 1, j - 1);
      const double up = acc(i - 1, j);
      const double left = acc(i, j - 1);
      if (diag <= up && diag <= left) {
        --i;
        --j;
      } else if (up <= left) {
        --i;
      } else {
        --j;
      }
    } else if (i > 0) {
      --i;
    } else {
      --j;
    }
    path.steps.emplace_back(i, j);
  }
  std::reverse(path.steps.begin(), path.steps.end());
  path.step_costs.reserve(path.steps.size());
  for (const auto& [pi, pj] : path.steps) path.step_costs.push_back(cost(pi, pj));
  return path;
}

/// FrameSequence overload; additionally requires equal hop_ms.
WarpPath dtw_align(const FrameSequence& a, const FrameSequence& b, LocalMetric metric);

}  // namespace shadowint
