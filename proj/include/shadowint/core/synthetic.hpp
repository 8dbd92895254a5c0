// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

#include "shadowint/core/types.hpp"

namespace shadowint {

/// Settings of the seeded triplet generator that stands in for a recorded
/// shadowing corpus.
///
/// Each word type owns two anchor vectors in the shadow (PPG-like) space; a
/// spoken word is the linear glide between them. The learner reading is the
/// glide plus reading noise, and words chosen as unintelligible additionally
/// carry an accent offset along a fixed direction. The S3R-like view of the
/// reading is a fixed linear embedding of the PPG-like view into d_src
/// dimensions. The script shadow re-renders every word time-stretched by a
/// factor in [min_warp, max_warp]; the first shadow is identical to it except
/// on unintelligible words, whose frames are replaced by large noise.
struct GeneratorConfig {
  int min_words = 6;
  int max_words = 10;
  int min_frames_per_word = 6;
  int max_frames_per_word = 12;
  int d_src = 32;
  int d_trg = 16;
  double disfluency_rate = 0.1;
  double corruption_magnitude = 3.0;
  double min_warp = 1.0;
  double max_warp = 1.4;
  double read_noise = 0.05;
  double shadow_noise = 0.05;
  double accent_magnitude = 1.5;
  int vocab_size = 40;
  /// Seeds the lexicon, the accent direction and the S3R embedding. Shared by
  /// every triplet of a corpus.
  std::uint64_t lexicon_seed = 20240917;
  int hop_ms = kDefaultHopMs;

  void validate() const;
};

/// Pure function of (seed, cfg). The id is "syn_<seed>".
UtteranceTriplet generate_synthetic_triplet(std::uint64_t seed, const GeneratorConfig& cfg);

}  // namespace shadowint
