// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>

#include <cmath>
#include <vector>

#include "shadowint/core/types.hpp"

namespace shadowint {

/// Value and gradient of a per-frame loss with respect to its input vector.
template <typename Scalar>
struct LossWithGradient {
  Scalar value;
  VectorX<Scalar> gradient;
};

namespace detail {

/// log(sigmoid(z)) without overflow.
template <typename Scalar>
Scalar log_sigmoid(Scalar z) {
  return z >= Scalar(0) ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z));
}

template <typename Scalar>
Scalar sigmoid(Scalar z) {
  if (z >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-z));
  const Scalar e = std::exp(z);
  return e / (Scalar(1) + e);
}

}  // namespace detail

/// Binary focal loss averaged over frames:
///   mean_t  -alpha_t (1 - p_t)^gamma log p_t
/// with p_t = sigmoid(logit) for positives and 1 - sigmoid(logit) otherwise;
/// alpha_t = alpha for positives and 1 - alpha for negatives.
template <typename Derived>
LossWithGradient<typename Derived::Scalar> focal_loss_with_gradient(const Eigen::MatrixBase<Derived>& logits,
                                                                    const Marks& labels, double gamma,
                                                                    double alpha) {
  using Scalar = typename Derived::Scalar;
  if (static_cast<std::size_t>(logits.size()) != labels.size()) {
    throw ValidationError("focal_loss: " + std::to_string(logits.size()) + " logits but " +
                          std::to_string(labels.size()) + " labels");
  }
  if (!(gamma >= 0.0)) throw ValidationError("focal_loss: gamma must be non-negative");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ValidationError("focal_loss: alpha must lie in [0, 1]");
  const auto n = static_cast<Eigen::Index>(labels.size());
  LossWithGradient<Scalar> out{Scalar(0), VectorX<Scalar>::Zero(n)};
  if (n == 0) return out;
  const Scalar g(gamma);
  for (Eigen::Index t = 0; t < n; ++t) {
    const std::uint8_t y = labels[static_cast<std::size_t>(t)];
    if (y > 1) throw ValidationError("focal_loss: labels must be binary");
    const Scalar sign = y ? Scalar(1) : Scalar(-1);
    const Scalar z = sign * logits(t);  // p_t = sigmoid(z)
    const Scalar a = Scalar(y ? alpha : 1.0 - alpha);
    const Scalar log_q = detail::log_sigmoid(z);
    const Scalar q = detail::sigmoid(z);
    const Scalar one_minus_q = detail::sigmoid(-z);
    const Scalar modulator = g == Scalar(0) ? Scalar(1) : std::pow(one_minus_q, g);
    out.value += -a * modulator * log_q;
    // d/dz of -a (1-q)^g log q = -a [ (1-q)^(g+1) - g q (1-q)^g log q ]
    const Scalar dz = -a * (modulator * one_minus_q - g * q * modulator * log_q);
    out.gradient(t) = sign * dz;
  }
  out.value /= Scalar(n);
  out.gradient /= Scalar(n);
  return out;
}

template <typename Derived>
typename Derived::Scalar focal_loss(const Eigen::MatrixBase<Derived>& logits, const Marks& labels,
                                    double gamma, double alpha) {
  return focal_loss_with_gradient(logits, labels, gamma, alpha).value;
}

/// Mean squared error between predicted log-durations and log of the target
/// durations.
template <typename Derived>
LossWithGradient<typename Derived::Scalar> duration_loss_with_gradient(
    const Eigen::MatrixBase<Derived>& predicted_log_durations, const std::vector<int>& target_durations) {
  using Scalar = typename Derived::Scalar;
  if (static_cast<std::size_t>(predicted_log_durations.size()) != target_durations.size()) {
    throw ValidationError("duration_loss: length mismatch");
  }
  const auto n = static_cast<Eigen::Index>(target_durations.size());
  LossWithGradient<Scalar> out{Scalar(0), VectorX<Scalar>::Zero(n)};
  if (n == 0) return out;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int d = target_durations[static_cast<std::size_t>(i)];
    if (d <= 0) throw ValidationError("duration_loss: target durations must be positive");
    const Scalar diff = predicted_log_durations(i) - Scalar(std::log(static_cast<double>(d)));
    out.value += diff * diff;
    out.gradient(i) = Scalar(2) * diff;
  }
  out.value /= Scalar(n);
  out.gradient /= Scalar(n);
  return out;
}

template <typename Derived>
typename Derived::Scalar duration_loss(const Eigen::MatrixBase<Derived>& predicted_log_durations,
                                       const std::vector<int>& target_durations) {
  return duration_loss_with_gradient(predicted_log_durations, target_durations).value;
}

/// Durations used for length regulation: rows of `h` are repeated
/// durations[i] times.
template <typename Derived>
MatrixX<typename Derived::Scalar> length_regulate(const Eigen::MatrixBase<Derived>& h,
                                                  const std::vector<int>& durations) {
  using Scalar = typename Derived::Scalar;
  if (static_cast<std::size_t>(h.rows()) != durations.size()) {
    throw ValidationError("length_regulate: " + std::to_string(durations.size()) + " durations for " +
                          std::to_string(h.rows()) + " frames");
  }
  Eigen::Index total = 0;
  for (int d : durations) {
    if (d < 0) throw ValidationError("length_regulate: negative duration");
    total += d;
  }
  MatrixX<Scalar> out(total, h.cols());
  Eigen::Index row = 0;
  for (std::size_t i = 0; i < durations.size(); ++i) {
    for (int k = 0; k < durations[i]; ++k) out.row(row++) = h.row(static_cast<Eigen::Index>(i));
  }
  return out;
}

/// Source row i = mean of the target rows it was expanded into.
template <typename Derived>
MatrixX<typename Derived::Scalar> inverse_length_regulate(const Eigen::MatrixBase<Derived>& z,
                                                          const std::vector<int>& durations) {
  using Scalar = typename Derived::Scalar;
  Eigen::Index total = 0;
  for (int d : durations) {
    if (d <= 0) throw ValidationError("inverse_length_regulate: durations must be positive");
    total += d;
  }
  if (total != z.rows()) {
    throw ValidationError("inverse_length_regulate: durations sum to " + std::to_string(total) + " but input has " +
                          std::to_string(z.rows()) + " frames");
  }
  MatrixX<Scalar> out(static_cast<Eigen::Index>(durations.size()), z.cols());
  Eigen::Index row = 0;
  for (std::size_t i = 0; i < durations.size(); ++i) {
    const int d = durations[i];
    // Shifted mean: identical copies come back bit-exact.
    const auto first = z.row(row);
    out.row(static_cast<Eigen::Index>(i)) =
        first + (z.middleRows(row, d).rowwise() - first).colwise().sum() / Scalar(d);
    row += d;
  }
  return out;
}

/// Expands durations into a per-target-frame source index.
inline std::vector<int> durations_to_assign(const std::vector<int>& durations) {
  std::vector<int> assign;
  for (std::size_t i = 0; i < durations.size(); ++i) assign.insert(assign.end(), static_cast<std::size_t>(durations[i]), static_cast<int>(i));
  return assign;
}

}  // namespace shadowint
