// SPDX-License-Identifier: Apache-2.0
#include "shadowint/labeler/labels.hpp"

#include <algorithm>
#include <cmath>

namespace shadowint {

std::string to_string(LocalMetric metric) {
  return metric == LocalMetric::kEuclidean ? "euclidean" : "cosine_distance";
}

LocalMetric local_metric_from_string(const std::string& name) {
  if (name == "euclidean") return LocalMetric::kEuclidean;
  if (name == "cosine_distance" || name == "cosine") return LocalMetric::kCosineDistance;
  throw ValidationError("unknown local metric '" + name + "'");
}

double WarpPath::total_cost() const {
  double total = 0.0;
  for (double c : step_costs) total += c;
  return total;
}

void WarpPath::validate() const {
  if (steps.empty() || steps.size() != step_costs.size()) {
    throw ValidationError("warp path must be non-empty with one cost per step");
  }
  if (steps.front() != std::pair{0, 0} || steps.back() != std::pair{length_a - 1, length_b - 1}) {
    throw ValidationError("warp path must start at (0,0) and end at (T_A-1, T_B-1)");
  }
  for (std::size_t k = 1; k < steps.size(); ++k) {
    const int di = steps[k].first - steps[k - 1].first;
    const int dj = steps[k].second - steps[k - 1].second;
    if (di < 0 || di > 1 || dj < 0 || dj > 1 || (di == 0 && dj == 0)) {
      throw ValidationError("warp path step " + std::to_string(k) + " is not a unit monotone step");
    }
  }
  for (double c : step_costs) {
    if (!(c >= 0.0)) throw ValidationError("warp path step costs must be non-negative");
  }
}

WarpPath dtw_align(const FrameSequence& a, const FrameSequence& b, LocalMetric metric) {
  a.validate();
  b.validate();
  if (a.hop_ms != b.hop_ms) throw ValidationError("dtw_align: hop_ms mismatch");
  return dtw_align(a.frames, b.frames, metric);
}

std::string to_string(ThresholdPolicy::Mode mode) {
  return mode == ThresholdPolicy::Mode::kAbsolute ? "absolute" : "percentile";
}

ThresholdPolicy::Mode threshold_mode_from_string(const std::string& name) {
  if (name == "absolute") return ThresholdPolicy::Mode::kAbsolute;
  if (name == "percentile") return ThresholdPolicy::Mode::kPercentile;
  throw ValidationError("unknown threshold mode '" + name + "'");
}

void ThresholdPolicy::validate() const {
  if (smooth_window < 1 || smooth_window % 2 == 0) {
    throw ValidationError("smooth_window must be an odd positive integer");
  }
  if (mode == Mode::kPercentile && !(value > 0.0 && value < 100.0)) {
    throw ValidationError("percentile threshold must lie in (0, 100)");
  }
  if (!std::isfinite(value)) throw ValidationError("threshold must be finite");
}

std::vector<double> smooth_costs(std::span<const double> costs, int window) {
  const auto n = static_cast<long>(costs.size());
  const long half = window / 2;
  std::vector<double> out(costs.size());
  // Prefix sums keep this linear in the path length.
  std::vector<double> prefix(costs.size() + 1, 0.0);
  for (long k = 0; k < n; ++k) prefix[k + 1] = prefix[k] + costs[k];
  for (long k = 0; k < n; ++k) {
    const long lo = std::max(0L, k - half);
    const long hi = std::min(n - 1, k + half);
    out[k] = (prefix[hi + 1] - prefix[lo]) / static_cast<double>(hi - lo + 1);
  }
  return out;
}

double percentile(std::vector<double> values, double p) {
  if (values.empty()) throw ValidationError("percentile of an empty set");
  std::sort(values.begin(), values.end());
  const double pos = p / 100.0 * static_cast<double>(values.size() - 1);
  const auto lower = static_cast<std::size_t>(std::floor(pos));
  const std::size_t upper = std::min(lower + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lower);
  return values[lower] + frac * (values[upper] - values[lower]);
}

std::pair<DLabel, DLabel> derive_dlabel(const WarpPath& path, const ThresholdPolicy& policy,
                                        int hop_ms) {
  path.validate();
  policy.validate();
  const auto smoothed = smooth_costs(path.step_costs, policy.smooth_window);
  const double theta = policy.mode == ThresholdPolicy::Mode::kAbsolute
                           ? policy.value
                           : percentile(smoothed, policy.value);

  DLabel over_a{Marks(static_cast<std::size_t>(path.length_a), 0), hop_ms};
  DLabel over_b{Marks(static_cast<std::size_t>(path.length_b), 0), hop_ms};
  for (std::size_t k = 0; k < path.steps.size(); ++k) {
    if (smoothed[k] > theta) {
      over_a.marks[static_cast<std::size_t>(path.steps[k].first)] = 1;
      over_b.marks[static_cast<std::size_t>(path.steps[k].second)] = 1;
    }
  }
  return {std::move(over_a), std::move(over_b)};
}

DLabel transfer_dlabel(const DLabel& source, const WarpPath& path) {
  path.validate();
  if (source.size() != static_cast<std::size_t>(path.length_a)) {
    throw ValidationError("transfer_dlabel: label length " + std::to_string(source.size()) +
                          " differs from path source length " + std::to_string(path.length_a));
  }
  DLabel out{Marks(static_cast<std::size_t>(path.length_b), 0), source.hop_ms};
  for (const auto& [i, j] : path.steps) {
    if (source.marks[static_cast<std::size_t>(i)]) out.marks[static_cast<std::size_t>(j)] = 1;
  }
  return out;
}

Marks dlabel_frames_to_words(const DLabel& label, const std::vector<WordTiming>& timings,
                             double coverage) {
  if (!(coverage > 0.0 && coverage <= 1.0)) throw ValidationError("word coverage must lie in (0, 1]");
  validate_word_timings(timings, static_cast<long>(label.size()));
  Marks words(timings.size(), 0);
  for (std::size_t w = 0; w < timings.size(); ++w) {
    const auto& t = timings[w];
    int marked = 0;
    for (int f = t.start_frame; f < t.end_frame; ++f) marked += label.marks[static_cast<std::size_t>(f)];
    // Compare counts rather than ratios so that e.g. 5/10 >= 0.5 is exact.
    if (static_cast<double>(marked) >= coverage * static_cast<double>(t.end_frame - t.start_frame)) {
      words[w] = 1;
    }
  }
  return words;
}

TripletLabels label_triplet(const UtteranceTriplet& t, LocalMetric metric, const ThresholdPolicy& policy,
                            double coverage) {
  t.validate();
  const int hop = t.l2_read.hop_ms;
  const WarpPath shadow_path = dtw_align(t.l1_shadow, t.l1_script_shadow, metric);
  auto [over_shadow, over_script] = derive_dlabel(shadow_path, policy, hop);

  const WarpPath read_path = dtw_align(t.l1_script_shadow, t.l2_alignment_view(), metric);
  DLabel over_read = transfer_dlabel(over_script, read_path);

  TripletLabels labels;
  labels.words = dlabel_frames_to_words(over_read, t.word_timings, coverage);
  labels.l2_read = std::move(over_read);
  labels.l1_shadow = std::move(over_shadow);
  labels.l1_script_shadow = std::move(over_script);
  return labels;
}

}  // namespace shadowint
