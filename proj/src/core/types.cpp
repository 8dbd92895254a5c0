// SPDX-License-Identifier: Apache-2.0
#include "shadowint/core/types.hpp"

#include <algorithm>
#include <numeric>

namespace shadowint {

std::string to_string(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::kSourceS3r:
      return "source_s3r";
    case FeatureKind::kTargetPpg:
      return "target_ppg";
    case FeatureKind::kSynthetic:
      return "synthetic";
  }
  throw ValidationError("unknown feature kind code " + std::to_string(static_cast<int>(kind)));
}

FeatureKind feature_kind_from_string(const std::string& name) {
  if (name == "source_s3r") return FeatureKind::kSourceS3r;
  if (name == "target_ppg") return FeatureKind::kTargetPpg;
  if (name == "synthetic") return FeatureKind::kSynthetic;
  throw ValidationError("unknown feature kind '" + name + "'");
}

void FrameSequence::validate() const {
  if (frames.rows() < 1 || frames.cols() < 1) {
    throw ValidationError("frame sequence must have T >= 1 and d >= 1, got " +
                          std::to_string(frames.rows()) + "x" + std::to_string(frames.cols()));
  }
  if (hop_ms <= 0) throw ValidationError("hop_ms must be positive");
  if (!frames.allFinite()) throw ValidationError("frame sequence contains non-finite values");
}

void validate_word_timings(const std::vector<WordTiming>& timings, long limit) {
  int previous_end = 0;
  for (std::size_t w = 0; w < timings.size(); ++w) {
    const WordTiming& t = timings[w];
    if (t.start_frame < 0 || t.start_frame >= t.end_frame) {
      throw ValidationError("word " + std::to_string(w) + " has invalid span [" +
                            std::to_string(t.start_frame) + ", " + std::to_string(t.end_frame) +
                            ")");
    }
    if (t.start_frame < previous_end) {
      throw ValidationError("word " + std::to_string(w) + " overlaps or precedes the previous word");
    }
    if (limit >= 0 && t.end_frame > limit) {
      throw ValidationError("word " + std::to_string(w) + " ends at frame " +
                            std::to_string(t.end_frame) + " beyond sequence length " +
                            std::to_string(limit));
    }
    previous_end = t.end_frame;
  }
}

std::size_t DLabel::count() const {
  return static_cast<std::size_t>(std::count(marks.begin(), marks.end(), std::uint8_t{1}));
}

void DLabel::validate() const {
  if (hop_ms <= 0) throw ValidationError("label hop_ms must be positive");
  for (std::uint8_t m : marks) {
    if (m > 1) throw ValidationError("label marks must be 0 or 1");
  }
}

void UtteranceTriplet::validate() const {
  if (id.empty()) throw ValidationError("triplet id must not be empty");
  l2_read.validate();
  l1_shadow.validate();
  l1_script_shadow.validate();
  if (l2_read_align) {
    l2_read_align->validate();
    if (l2_read_align->length() != l2_read.length()) {
      throw ValidationError(id + ": l2_read_align length differs from l2_read");
    }
  }
  const int hop = l2_read.hop_ms;
  if (l1_shadow.hop_ms != hop || l1_script_shadow.hop_ms != hop ||
      (l2_read_align && l2_read_align->hop_ms != hop)) {
    throw ValidationError(id + ": hop_ms differs across the triplet");
  }
  if (transcript.size() != word_timings.size()) {
    throw ValidationError(id + ": transcript has " + std::to_string(transcript.size()) +
                          " words but " + std::to_string(word_timings.size()) + " timings");
  }
  validate_word_timings(word_timings, static_cast<long>(l2_read.length()));
  if (gold_dlabel) {
    gold_dlabel->validate();
    if (gold_dlabel->size() != static_cast<std::size_t>(l2_read.length())) {
      throw ValidationError(id + ": gold label length differs from l2_read");
    }
  }
}

std::string to_string(Split split) {
  switch (split) {
    case Split::kTrain:
      return "train";
    case Split::kDev:
      return "dev";
    case Split::kTest:
      return "test";
  }
  return "train";
}

Split split_from_string(const std::string& name) {
  if (name == "train") return Split::kTrain;
  if (name == "dev") return Split::kDev;
  if (name == "test") return Split::kTest;
  throw ValidationError("unknown split '" + name + "'");
}

}  // namespace shadowint
