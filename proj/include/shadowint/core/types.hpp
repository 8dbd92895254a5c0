// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace shadowint {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Raised when no monotone path covers every source position, i.e. the
/// target is shorter than the source.
class InfeasibleAlignmentError : public Error {
 public:
  InfeasibleAlignmentError(const std::string& what, std::string utterance_id = {})
      : Error(utterance_id.empty() ? what : utterance_id + ": " + what),
        utterance_id_(std::move(utterance_id)) {}

  const std::string& utterance_id() const { return utterance_id_; }

 private:
  std::string utterance_id_;
};

// ---------------------------------------------------------------------------
// Dense aliases
// ---------------------------------------------------------------------------

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Row-major float storage matches the on-disk FSEQ payload.
using FrameMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Marks = std::vector<std::uint8_t>;

inline constexpr int kDefaultHopMs = 10;

// ---------------------------------------------------------------------------
// Data model
// ---------------------------------------------------------------------------

enum class FeatureKind : std::uint8_t { kSourceS3r = 0, kTargetPpg = 1, kSynthetic = 2 };

std::string to_string(FeatureKind kind);
FeatureKind feature_kind_from_string(const std::string& name);

/// Time-major feature matrix (T frames x d dims) at a fixed hop.
struct FrameSequence {
  FrameMatrix frames;
  int hop_ms = kDefaultHopMs;
  FeatureKind kind = FeatureKind::kSynthetic;

  Eigen::Index length() const { return frames.rows(); }
  Eigen::Index dim() const { return frames.cols(); }

  /// Throws ValidationError unless T >= 1, d >= 1, hop_ms > 0 and all values
  /// are finite.
  void validate() const;
};

struct WordTiming {
  std::string word;
  int start_frame = 0;
  int end_frame = 0;  // exclusive
};

/// Checks start < end, non-negative starts and strictly ordered, non-overlapping
/// words. `limit` (if >= 0) bounds every end_frame.
void validate_word_timings(const std::vector<WordTiming>& timings, long limit = -1);

/// Per-frame binary disfluency mark.
struct DLabel {
  Marks marks;
  int hop_ms = kDefaultHopMs;

  std::size_t size() const { return marks.size(); }
  std::size_t count() const;
  void validate() const;
};

struct UtteranceTriplet {
  std::string id;
  FrameSequence l2_read;
  FrameSequence l1_shadow;
  FrameSequence l1_script_shadow;
  /// Learner speech in the shadow feature space. Used for the second DTW leg
  /// when l2_read is in a different feature space than the shadows.
  std::optional<FrameSequence> l2_read_align;
  std::vector<std::string> transcript;
  std::vector<WordTiming> word_timings;
  std::optional<DLabel> gold_dlabel;

  /// The l2 view that is comparable frame-by-frame with the shadows.
  const FrameSequence& l2_alignment_view() const {
    return l2_read_align ? *l2_read_align : l2_read;
  }

  void validate() const;
};

enum class Split : std::uint8_t { kTrain, kDev, kTest };

std::string to_string(Split split);
Split split_from_string(const std::string& name);

}  // namespace shadowint
