// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "shadowint/core/manifest.hpp"
#include "shadowint/core/types.hpp"

namespace shadowint {

struct WordEvalResult {
  double f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;

  /// Precision, recall and F1 from pooled counts (0 on empty denominators).
  static WordEvalResult from_counts(std::int64_t tp, std::int64_t fp, std::int64_t fn);
};

/// Positional word-level detection scores.
WordEvalResult word_prf(const Marks& predicted, const Marks& gold);

/// Fraction of frames with equal marks.
double frame_accuracy(const DLabel& predicted, const DLabel& gold);

struct PrecisionResult {
  double precision = 0.0;
  bool vacuous = false;  // no predicted positives
  std::int64_t tp = 0;
  std::int64_t fp = 0;
};

PrecisionResult annotation_precision(const Marks& predicted, const Marks& annotated);

// Annotations.

struct AnnotationInterval {
  std::int64_t start_ms = 0;
  std::int64_t end_ms = 0;

  bool operator==(const AnnotationInterval&) const = default;
};

struct AnnotationRecord {
  std::string utterance_id;
  std::string annotator_id;
  std::vector<AnnotationInterval> intervals;
  bool edited = false;
};

/// Sorts intervals and merges overlapping ones. Touching intervals are kept
/// apart. Throws ValidationError for start < 0 or start >= end.
std::vector<AnnotationInterval> normalize_intervals(std::vector<AnnotationInterval> intervals);

/// Parses a JSON array of annotation records and normalizes their intervals.
std::vector<AnnotationRecord> parse_annotations(std::string_view json_text);
std::vector<AnnotationRecord> read_annotations(const std::filesystem::path& path);
std::string annotations_json(const std::vector<AnnotationRecord>& records);
void write_annotations(const std::filesystem::path& path, const std::vector<AnnotationRecord>& records);

/// Frame i is marked iff its midpoint (i + 0.5) * hop_ms lies in some
/// half-open interval [start_ms, end_ms).
DLabel annotation_to_frames(const AnnotationRecord& record, std::size_t n_frames, int hop_ms,
                            std::vector<std::string>* warnings = nullptr);

/// Frame conversion followed by dlabel_frames_to_words. Intervals past the
/// end of the utterance are clipped and reported through `warnings`.
Marks annotation_to_words(const AnnotationRecord& record, const std::vector<WordTiming>& timings, int hop_ms,
                          double rho_word, std::size_t n_frames, std::vector<std::string>* warnings = nullptr);

// Corpus evaluation.

struct MethodReport {
  std::string method;
  std::size_t utterances = 0;
  WordEvalResult words;
  std::optional<double> frame_accuracy;  // absent when a method has no frame labels
  std::optional<PrecisionResult> annotation_precision;
};

struct CorpusReport {
  std::string note;
  std::vector<MethodReport> rows;
};

struct EvaluateOptions {
  std::optional<Split> split = Split::kTest;  // nullopt evaluates every id
  std::vector<AnnotationRecord> annotations;
  double rho_word = 0.5;
  int hop_ms = kDefaultHopMs;
};

/// Per-method evaluation from in-memory vectors; pooled (micro) word counts
/// and mean frame accuracy.
MethodReport evaluate_method(const std::string& method, const std::vector<Marks>& predicted,
                             const std::vector<Marks>& gold, const std::vector<DLabel>* predicted_frames = nullptr,
                             const std::vector<DLabel>* gold_frames = nullptr);

/// One row per subdirectory of `predictions_dir`, sorted by name. Each holds
/// <id>.words.json and optionally <id>.dlabel.json; `gold_dir` holds the same
/// for the reference. Throws ValidationError listing missing ids.
CorpusReport evaluate_corpus(const CorpusManifest& manifest, const std::filesystem::path& predictions_dir,
                             const std::filesystem::path& gold_dir, const EvaluateOptions& options = {});

/// As evaluate_corpus, with the method directories given explicitly; the row
/// name is each directory's file name.
CorpusReport evaluate_method_dirs(const CorpusManifest& manifest, const std::vector<std::filesystem::path>& method_dirs,
                                  const std::filesystem::path& gold_dir, const EvaluateOptions& options = {});

/// Percentage with one decimal, e.g. 0.2881 -> "28.8".
std::string format_percent(double fraction);

std::string report_json(const CorpusReport& report);
std::string report_table(const CorpusReport& report);

}  // namespace shadowint
