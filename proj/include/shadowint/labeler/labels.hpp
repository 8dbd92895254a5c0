// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <utility>
#include <vector>

#include "shadowint/core/types.hpp"
#include "shadowint/labeler/dtw.hpp"

namespace shadowint {

struct ThresholdPolicy {
  enum class Mode { kAbsolute, kPercentile };

  Mode mode = Mode::kPercentile;
  double value = 85.0;
  int smooth_window = 5;

  void validate() const;
};

std::string to_string(ThresholdPolicy::Mode mode);
ThresholdPolicy::Mode threshold_mode_from_string(const std::string& name);

inline constexpr double kDefaultWordCoverage = 0.5;

/// Centered moving average of width `window` (odd); windows are truncated at
/// the edges and averaged over the samples they actually cover.
std::vector<double> smooth_costs(std::span<const double> costs, int window);

/// Linear-interpolation percentile (p in [0, 100]) of `values`.
double percentile(std::vector<double> values, double p);

/// Marks every frame of A and of B touched by a step whose smoothed cost
/// exceeds the policy threshold.
std::pair<DLabel, DLabel> derive_dlabel(const WarpPath& path, const ThresholdPolicy& policy,
                                        int hop_ms = kDefaultHopMs);

/// Maps a label over the A side of `path` onto its B side: B frame j is
/// marked iff some step (i, j) has source[i] = 1.
DLabel transfer_dlabel(const DLabel& source, const WarpPath& path);

/// Word w is marked iff the fraction of marked frames in its span is at
/// least `coverage` (in (0, 1]).
Marks dlabel_frames_to_words(const DLabel& label, const std::vector<WordTiming>& timings,
                             double coverage = kDefaultWordCoverage);

struct TripletLabels {
  DLabel l2_read;           // transferred onto the learner reading
  Marks words;              // word-level view of l2_read
  DLabel l1_shadow;         // target-side label on the first shadow
  DLabel l1_script_shadow;  // label on the script shadow before transfer
};

/// Full reverse-shadowing pipeline for one triplet: DTW(first shadow, script
/// shadow) -> threshold -> DTW(script shadow, reading) -> transfer -> words.
TripletLabels label_triplet(const UtteranceTriplet& t, LocalMetric metric = LocalMetric::kCosineDistance,
                            const ThresholdPolicy& policy = {}, double coverage = kDefaultWordCoverage);

}  // namespace shadowint
