// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "shadowint/core/types.hpp"

namespace shadowint {

// Monotonic alignment between a source sequence (rows, T_src) and a target
// sequence (columns, T_trg). A valid path assigns every target frame one
// source index; it starts at source 0, ends at source T_src - 1 and advances
// by 0 or 1 per target frame. All routines work on log probabilities.

inline constexpr double kProbabilityFloor = 1e-12;

template <typename Scalar>
struct SoftAlignment {
  /// T_src x T_trg; every column is a distribution over source positions.
  MatrixX<Scalar> probs;

  Eigen::Index source_length() const { return probs.rows(); }
  Eigen::Index target_length() const { return probs.cols(); }

  /// Elementwise log with probabilities floored at kProbabilityFloor.
  MatrixX<Scalar> log_probs() const {
    return probs.array().max(Scalar(kProbabilityFloor)).log().matrix();
  }

  void validate(double tolerance = 1e-6) const {
    if (probs.rows() < 1 || probs.cols() < 1) throw ValidationError("soft alignment must be non-empty");
    if (!probs.allFinite()) throw ValidationError("soft alignment contains non-finite values");
    if ((probs.array() < Scalar(0)).any() || (probs.array() > Scalar(1)).any()) {
      throw ValidationError("soft alignment entries must lie in [0, 1]");
    }
    const VectorX<Scalar> sums = probs.colwise().sum().transpose();
    if (((sums.array() - Scalar(1)).abs() > Scalar(tolerance)).any()) {
      throw ValidationError("soft alignment columns must sum to 1");
    }
  }
};

struct HardAlignment {
  /// assign[j] = source index (0-based) of target frame j.
  std::vector<int> assign;
  /// durations[i] = number of target frames assigned to source i.
  std::vector<int> durations;

  static HardAlignment from_assign(std::vector<int> assign, int source_length);

  /// Checks start/end anchoring, unit increments and duration consistency.
  void validate(int source_length) const;
};

inline HardAlignment HardAlignment::from_assign(std::vector<int> assign, int source_length) {
  HardAlignment hard;
  hard.durations.assign(static_cast<std::size_t>(source_length), 0);
  for (int i : assign) {
    if (i < 0 || i >= source_length) throw ValidationError("hard alignment index out of range");
    ++hard.durations[static_cast<std::size_t>(i)];
  }
  hard.assign = std::move(assign);
  return hard;
}

inline void HardAlignment::validate(int source_length) const {
  if (assign.empty()) throw ValidationError("hard alignment must be non-empty");
  if (assign.front() != 0 || assign.back() != source_length - 1) {
    throw ValidationError("hard alignment must start at source 0 and end at the last source");
  }
  for (std::size_t j = 1; j < assign.size(); ++j) {
    const int step = assign[j] - assign[j - 1];
    if (step != 0 && step != 1) throw ValidationError("hard alignment must advance by 0 or 1");
  }
  if (durations.size() != static_cast<std::size_t>(source_length)) {
    throw ValidationError("hard alignment durations have the wrong length");
  }
  std::vector<int> counts(static_cast<std::size_t>(source_length), 0);
  for (int i : assign) ++counts[static_cast<std::size_t>(i)];
  if (counts != durations) throw ValidationError("hard alignment durations disagree with assign");
}

namespace detail {

template <typename Scalar>
Scalar log_add(Scalar a, Scalar b) {
  constexpr Scalar kNegInf = -std::numeric_limits<Scalar>::infinity();
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const Scalar hi = std::max(a, b);
  return hi + std::log1p(std::exp(-std::abs(a - b)));
}

inline void require_feasible(Eigen::Index source_length, Eigen::Index target_length) {
  if (source_length < 1 || target_length < 1) throw ValidationError("alignment matrix must be non-empty");
  if (target_length < source_length) {
    throw InfeasibleAlignmentError("no monotone path: T_trg = " + std::to_string(target_length) +
                                   " < T_src = " + std::to_string(source_length));
  }
}

}  // namespace detail

/// Pairwise logits -||src_i - trg_j||^2 / temperature, shape T_src x T_trg.
template <typename DerivedS, typename DerivedT>
MatrixX<typename DerivedS::Scalar> alignment_logits(const Eigen::MatrixBase<DerivedS>& h_src,
                                                    const Eigen::MatrixBase<DerivedT>& h_trg,
                                                    double temperature) {
  using Scalar = typename DerivedS::Scalar;
  if (h_src.cols() != h_trg.cols()) throw ValidationError("soft_alignment: inner dimensions differ");
  if (h_src.rows() < 1 || h_trg.rows() < 1) throw ValidationError("soft_alignment: empty input");
  if (!(temperature > 0.0)) throw ValidationError("soft_alignment: temperature must be positive");
  if (!h_src.allFinite() || !h_trg.allFinite()) throw ValidationError("soft_alignment: non-finite input");
  const MatrixX<Scalar> src = h_src;
  const MatrixX<Scalar> trg = h_trg;
  MatrixX<Scalar> dist = src * trg.transpose();
  dist *= Scalar(-2);
  dist.colwise() += src.rowwise().squaredNorm();
  dist.rowwise() += trg.rowwise().squaredNorm().transpose();
  // Cancellation can leave tiny negatives for coincident rows.
  return (-dist.array().max(Scalar(0)) / Scalar(temperature)).matrix();
}

/// Column-wise log-softmax.
template <typename Derived>
MatrixX<typename Derived::Scalar> log_softmax_columns(const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  MatrixX<Scalar> out = logits;
  for (Eigen::Index j = 0; j < out.cols(); ++j) {
    const Scalar hi = out.col(j).maxCoeff();
    const Scalar lse = hi + std::log((out.col(j).array() - hi).exp().sum());
    out.col(j).array() -= lse;
  }
  return out;
}

template <typename DerivedS, typename DerivedT>
SoftAlignment<typename DerivedS::Scalar> soft_alignment(const Eigen::MatrixBase<DerivedS>& h_src,
                                                        const Eigen::MatrixBase<DerivedT>& h_trg,
                                                        double temperature = 1.0) {
  return {log_softmax_columns(alignment_logits(h_src, h_trg, temperature)).array().exp().matrix()};
}

/// Result of the forward-backward pass over all monotone paths.
template <typename Scalar>
struct ForwardSumResult {
  Scalar loss;                // -log sum_paths prod_j p[path(j)][j]
  MatrixX<Scalar> occupancy;  // posterior P(assign[j] = i); d loss / d log p = -occupancy
};

/// Forward-sum over log probabilities. Gradient is returned when requested.
template <typename Derived>
ForwardSumResult<typename Derived::Scalar> forward_sum(const Eigen::MatrixBase<Derived>& log_probs,
                                                       bool with_gradient = true) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = log_probs.rows();
  const Eigen::Index m = log_probs.cols();
  detail::require_feasible(n, m);
  constexpr Scalar kNegInf = -std::numeric_limits<Scalar>::infinity();

  MatrixX<Scalar> alpha = MatrixX<Scalar>::Constant(n, m, kNegInf);
  alpha(0, 0) = log_probs(0, 0);
  for (Eigen::Index j = 1; j < m; ++j) {
    // Source i is reachable at frame j only if i <= j and the remaining
    // frames can still reach the last source.
    const Eigen::Index lo = std::max<Eigen::Index>(0, n - (m - j));
    const Eigen::Index hi = std::min(j, n - 1);
    for (Eigen::Index i = lo; i <= hi; ++i) {
      Scalar prev = alpha(i, j - 1);
      if (i > 0) prev = detail::log_add(prev, alpha(i - 1, j - 1));
      alpha(i, j) = prev == kNegInf ? kNegInf : prev + log_probs(i, j);
    }
  }
  const Scalar log_z = alpha(n - 1, m - 1);
  ForwardSumResult<Scalar> result{-log_z, MatrixX<Scalar>()};
  if (!with_gradient) return result;

  MatrixX<Scalar> beta = MatrixX<Scalar>::Constant(n, m, kNegInf);
  beta(n - 1, m - 1) = Scalar(0);
  for (Eigen::Index j = m - 2; j >= 0; --j) {
    const Eigen::Index lo = std::max<Eigen::Index>(0, n - (m - j));
    const Eigen::Index hi = std::min(j, n - 1);
    for (Eigen::Index i = lo; i <= hi; ++i) {
      Scalar next = beta(i, j + 1) == kNegInf ? kNegInf : log_probs(i, j + 1) + beta(i, j + 1);
      if (i + 1 < n && beta(i + 1, j + 1) != kNegInf) {
        next = detail::log_add(next, log_probs(i + 1, j + 1) + beta(i + 1, j + 1));
      }
      beta(i, j) = next;
    }
  }
  result.occupancy = MatrixX<Scalar>::Zero(n, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      if (alpha(i, j) != kNegInf && beta(i, j) != kNegInf) {
        result.occupancy(i, j) = std::exp(alpha(i, j) + beta(i, j) - log_z);
      }
    }
  }
  return result;
}

/// -log of the total probability of all valid monotone paths.
template <typename Scalar>
Scalar forward_sum_loss(const SoftAlignment<Scalar>& soft) {
  // Floored zeros can push the path mass a hair above 1.
  return std::max(Scalar(0), forward_sum(soft.log_probs(), false).loss);
}

/// Gradient of the forward-sum loss with respect to the logits that produced
/// a column-softmax alignment: softmax - occupancy.
template <typename Derived>
ForwardSumResult<typename Derived::Scalar> forward_sum_from_logits(const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  const MatrixX<Scalar> log_p = log_softmax_columns(logits);
  auto result = forward_sum(log_p, true);
  result.occupancy = (log_p.array().exp().matrix() - result.occupancy).eval();
  return result;
}

/// Most probable monotone path. At every backtrace decision a tie between
/// staying on the current source and coming from the previous one resolves
/// to staying.
template <typename Derived>
HardAlignment viterbi_from_log(const Eigen::MatrixBase<Derived>& log_probs) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = log_probs.rows();
  const Eigen::Index m = log_probs.cols();
  detail::require_feasible(n, m);
  constexpr Scalar kNegInf = -std::numeric_limits<Scalar>::infinity();

  MatrixX<Scalar> delta = MatrixX<Scalar>::Constant(n, m, kNegInf);
  delta(0, 0) = log_probs(0, 0);
  for (Eigen::Index j = 1; j < m; ++j) {
    const Eigen::Index lo = std::max<Eigen::Index>(0, n - (m - j));
    const Eigen::Index hi = std::min(j, n - 1);
    for (Eigen::Index i = lo; i <= hi; ++i) {
      Scalar prev = delta(i, j - 1);
      if (i > 0) prev = std::max(prev, delta(i - 1, j - 1));
      delta(i, j) = prev == kNegInf ? kNegInf : prev + log_probs(i, j);
    }
  }

  std::vector<int> assign(static_cast<std::size_t>(m));
  Eigen::Index i = n - 1;
  assign[static_cast<std::size_t>(m - 1)] = static_cast<int>(i);
  for (Eigen::Index j = m - 1; j > 0; --j) {
    if (i > 0) {
      const Scalar stay = delta(i, j - 1);
      const Scalar advance = delta(i - 1, j - 1);
      if (!(stay >= advance)) --i;
    }
    assign[static_cast<std::size_t>(j - 1)] = static_cast<int>(i);
  }
  return HardAlignment::from_assign(std::move(assign), static_cast<int>(n));
}

template <typename Scalar>
HardAlignment viterbi_hard(const SoftAlignment<Scalar>& soft) {
  return viterbi_from_log(soft.log_probs());
}

/// Sum over target frames of log p[assign[j]][j].
template <typename Derived>
typename Derived::Scalar path_log_probability(const Eigen::MatrixBase<Derived>& log_probs,
                                              const HardAlignment& hard) {
  using Scalar = typename Derived::Scalar;
  if (static_cast<Eigen::Index>(hard.assign.size()) != log_probs.cols()) {
    throw ValidationError("hard alignment length differs from the soft alignment");
  }
  Scalar total(0);
  for (std::size_t j = 0; j < hard.assign.size(); ++j) {
    const int i = hard.assign[j];
    if (i < 0 || i >= log_probs.rows()) throw ValidationError("hard alignment index out of range");
    total += log_probs(i, static_cast<Eigen::Index>(j));
  }
  return total;
}

/// Negated sum of hard (.) log soft: drives soft mass onto the hard path.
template <typename Scalar>
Scalar binarization_loss(const HardAlignment& hard, const SoftAlignment<Scalar>& soft) {
  if (hard.durations.size() != static_cast<std::size_t>(soft.source_length())) {
    throw ValidationError("hard alignment source length differs from the soft alignment");
  }
  return -path_log_probability(soft.log_probs(), hard);
}

template <typename Scalar>
Scalar alignment_loss(const SoftAlignment<Scalar>& soft, const HardAlignment& hard) {
  return forward_sum_loss(soft) + binarization_loss(hard, soft);
}

/// s[i] = 1 iff max_j log p[i][j] < tau: no target frame puts enough mass on
/// source frame i.
template <typename Scalar>
Marks focus_rate(const SoftAlignment<Scalar>& soft, double tau) {
  const MatrixX<Scalar> log_p = soft.log_probs();
  Marks marks(static_cast<std::size_t>(log_p.rows()), 0);
  for (Eigen::Index i = 0; i < log_p.rows(); ++i) {
    if (static_cast<double>(log_p.row(i).maxCoeff()) < tau) marks[static_cast<std::size_t>(i)] = 1;
  }
  return marks;
}

}  // namespace shadowint
