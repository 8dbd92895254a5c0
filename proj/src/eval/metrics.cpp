// SPDX-License-Identifier: Apache-2.0
#include "shadowint/eval/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include "json.hpp"
#include "shadowint/core/label_io.hpp"
#include "shadowint/labeler/labels.hpp"

namespace shadowint {

namespace {

using ordered_json = nlohmann::ordered_json;

double ratio(std::int64_t num, std::int64_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

void require_same_length(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw ValidationError(std::string(what) + ": length mismatch (" + std::to_string(a) + " vs " + std::to_string(b) +
                          ")");
  }
}

void check_binary(const Marks& m, const char* what) {
  for (auto v : m) {
    if (v > 1) throw ValidationError(std::string(what) + ": marks must be 0 or 1");
  }
}

}  // namespace

WordEvalResult WordEvalResult::from_counts(std::int64_t tp, std::int64_t fp, std::int64_t fn) {
  if (tp < 0 || fp < 0 || fn < 0) throw ValidationError("word counts must be non-negative");
  WordEvalResult r;
  r.tp = tp;
  r.fp = fp;
  r.fn = fn;
  r.precision = ratio(tp, tp + fp);
  r.recall = ratio(tp, tp + fn);
  // Harmonic mean of precision and recall, as one rounding from the counts.
  r.f1 = ratio(2 * tp, 2 * tp + fp + fn);
  return r;
}

WordEvalResult word_prf(const Marks& predicted, const Marks& gold) {
  require_same_length(predicted.size(), gold.size(), "word_prf");
  check_binary(predicted, "word_prf");
  check_binary(gold, "word_prf");
  std::int64_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    tp += predicted[i] && gold[i];
    fp += predicted[i] && !gold[i];
    fn += !predicted[i] && gold[i];
  }
  return WordEvalResult::from_counts(tp, fp, fn);
}

double frame_accuracy(const DLabel& predicted, const DLabel& gold) {
  require_same_length(predicted.size(), gold.size(), "frame_accuracy");
  if (predicted.hop_ms != gold.hop_ms) throw ValidationError("frame_accuracy: hop mismatch");
  if (gold.size() == 0) throw ValidationError("frame_accuracy: empty labels");
  std::size_t agree = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) agree += predicted.marks[i] == gold.marks[i];
  return static_cast<double>(agree) / static_cast<double>(gold.size());
}

PrecisionResult annotation_precision(const Marks& predicted, const Marks& annotated) {
  const auto r = word_prf(predicted, annotated);
  return {r.precision, r.tp + r.fp == 0, r.tp, r.fp};
}

// Annotations.

std::vector<AnnotationInterval> normalize_intervals(std::vector<AnnotationInterval> intervals) {
  for (const auto& iv : intervals) {
    if (iv.start_ms < 0 || iv.start_ms >= iv.end_ms) {
      throw ValidationError("annotation interval [" + std::to_string(iv.start_ms) + ", " + std::to_string(iv.end_ms) +
                            ") is invalid");
    }
  }
  std::sort(intervals.begin(), intervals.end(),
            [](const auto& a, const auto& b) { return std::tie(a.start_ms, a.end_ms) < std::tie(b.start_ms, b.end_ms); });
  std::vector<AnnotationInterval> out;
  for (const auto& iv : intervals) {
    if (!out.empty() && iv.start_ms < out.back().end_ms) {
      out.back().end_ms = std::max(out.back().end_ms, iv.end_ms);
    } else {
      out.push_back(iv);
    }
  }
  return out;
}

std::vector<AnnotationRecord> parse_annotations(std::string_view json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("annotations: ") + e.what());
  }
  if (!doc.is_array()) throw ParseError("annotations: expected a JSON array of records");
  std::vector<AnnotationRecord> records;
  for (std::size_t k = 0; k < doc.size(); ++k) {
    const auto& j = doc[k];
    const std::string where = "annotations[" + std::to_string(k) + "]";
    try {
      AnnotationRecord rec;
      rec.utterance_id = j.at("utterance_id").get<std::string>();
      rec.annotator_id = j.at("annotator_id").get<std::string>();
      rec.edited = j.at("edited").get<bool>();
      for (const auto& iv : j.at("intervals")) {
        rec.intervals.push_back({iv.at("start_ms").get<std::int64_t>(), iv.at("end_ms").get<std::int64_t>()});
      }
      rec.intervals = normalize_intervals(std::move(rec.intervals));
      records.push_back(std::move(rec));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(where + ": " + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError(where + ": " + e.what());
    }
  }
  return records;
}

std::vector<AnnotationRecord> read_annotations(const std::filesystem::path& path) {
  try {
    return parse_annotations(read_text_file(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

std::string annotations_json(const std::vector<AnnotationRecord>& records) {
  ordered_json doc = ordered_json::array();
  for (const auto& rec : records) {
    ordered_json j;
    j["utterance_id"] = rec.utterance_id;
    j["annotator_id"] = rec.annotator_id;
    j["intervals"] = ordered_json::array();
    for (const auto& iv : rec.intervals) j["intervals"].push_back({{"start_ms", iv.start_ms}, {"end_ms", iv.end_ms}});
    j["edited"] = rec.edited;
    doc.push_back(std::move(j));
  }
  return doc.dump(2) + "\n";
}

void write_annotations(const std::filesystem::path& path, const std::vector<AnnotationRecord>& records) {
  write_text_file(path, annotations_json(records));
}

DLabel annotation_to_frames(const AnnotationRecord& record, std::size_t n_frames, int hop_ms,
                            std::vector<std::string>* warnings) {
  if (hop_ms <= 0) throw ValidationError("annotation_to_frames: hop must be positive");
  const auto intervals = normalize_intervals(record.intervals);
  const auto duration = static_cast<std::int64_t>(n_frames) * hop_ms;
  DLabel label;
  label.hop_ms = hop_ms;
  label.marks.assign(n_frames, 0);
  for (auto iv : intervals) {
    if (iv.end_ms > duration) {
      if (warnings) {
        warnings->push_back(record.utterance_id + ": interval [" + std::to_string(iv.start_ms) + ", " +
                            std::to_string(iv.end_ms) + ") clipped to utterance end " + std::to_string(duration) +
                            " ms");
      }
      iv.end_ms = duration;
    }
    // Midpoint (i + 0.5) * hop in [start, end), in integer half-milliseconds.
    for (std::size_t i = 0; i < n_frames; ++i) {
      const std::int64_t mid2 = (2 * static_cast<std::int64_t>(i) + 1) * hop_ms;
      if (mid2 >= 2 * iv.start_ms && mid2 < 2 * iv.end_ms) label.marks[i] = 1;
    }
  }
  return label;
}

Marks annotation_to_words(const AnnotationRecord& record, const std::vector<WordTiming>& timings, int hop_ms,
                          double rho_word, std::size_t n_frames, std::vector<std::string>* warnings) {
  return dlabel_frames_to_words(annotation_to_frames(record, n_frames, hop_ms, warnings), timings, rho_word);
}

// Corpus evaluation.

MethodReport evaluate_method(const std::string& method, const std::vector<Marks>& predicted,
                             const std::vector<Marks>& gold, const std::vector<DLabel>* predicted_frames,
                             const std::vector<DLabel>* gold_frames) {
  require_same_length(predicted.size(), gold.size(), "evaluate_method");
  MethodReport row;
  row.method = method;
  row.utterances = gold.size();
  std::int64_t tp = 0, fp = 0, fn = 0;
  for (std::size_t u = 0; u < gold.size(); ++u) {
    const auto r = word_prf(predicted[u], gold[u]);
    tp += r.tp;
    fp += r.fp;
    fn += r.fn;
  }
  row.words = WordEvalResult::from_counts(tp, fp, fn);
  if (predicted_frames && gold_frames && !gold_frames->empty()) {
    require_same_length(predicted_frames->size(), gold_frames->size(), "evaluate_method frames");
    double sum = 0.0;
    for (std::size_t u = 0; u < gold_frames->size(); ++u) sum += frame_accuracy((*predicted_frames)[u], (*gold_frames)[u]);
    row.frame_accuracy = sum / static_cast<double>(gold_frames->size());
  }
  return row;
}

namespace {

std::filesystem::path words_path(const std::filesystem::path& dir, const std::string& id) {
  return dir / (id + ".words.json");
}
std::filesystem::path dlabel_path(const std::filesystem::path& dir, const std::string& id) {
  return dir / (id + ".dlabel.json");
}

std::string join_ids(const std::vector<std::string>& ids) {
  std::string out;
  for (const auto& id : ids) out += (out.empty() ? "" : ", ") + id;
  return out;
}

}  // namespace

CorpusReport evaluate_corpus(const CorpusManifest& manifest, const std::filesystem::path& predictions_dir,
                             const std::filesystem::path& gold_dir, const EvaluateOptions& options) {
  if (!std::filesystem::is_directory(predictions_dir)) {
    throw IoError("predictions directory " + predictions_dir.string() + " does not exist");
  }
  std::vector<std::filesystem::path> methods;
  for (const auto& d : std::filesystem::directory_iterator(predictions_dir)) {
    if (d.is_directory()) methods.push_back(d.path());
  }
  std::sort(methods.begin(), methods.end());
  return evaluate_method_dirs(manifest, methods, gold_dir, options);
}

CorpusReport evaluate_method_dirs(const CorpusManifest& manifest, const std::vector<std::filesystem::path>& methods,
                                  const std::filesystem::path& gold_dir, const EvaluateOptions& options) {
  std::vector<const ManifestEntry*> entries;
  for (const auto& e : manifest.entries) {
    if (!options.split || e.split == *options.split) entries.push_back(&e);
  }

  std::vector<std::string> missing_gold;
  std::vector<Marks> gold_words;
  std::vector<DLabel> gold_frames;
  bool gold_has_frames = true;
  for (const auto* e : entries) {
    if (!std::filesystem::exists(words_path(gold_dir, e->id))) {
      missing_gold.push_back(e->id);
      continue;
    }
    gold_words.push_back(read_word_label(words_path(gold_dir, e->id)).words);
    if (std::filesystem::exists(dlabel_path(gold_dir, e->id))) {
      gold_frames.push_back(read_dlabel(dlabel_path(gold_dir, e->id)).label);
    } else {
      gold_has_frames = false;
    }
  }
  if (!missing_gold.empty()) throw ValidationError("gold labels missing for ids: " + join_ids(missing_gold));

  for (const auto& dir : methods) {
    if (!std::filesystem::is_directory(dir)) throw IoError("method directory " + dir.string() + " does not exist");
  }

  // Annotation words per utterance, one entry per record.
  std::map<std::string, std::vector<Marks>> annotated;
  for (const auto& rec : options.annotations) {
    const auto* entry = manifest.find(rec.utterance_id);
    if (!entry) continue;
    auto it = std::find(entries.begin(), entries.end(), entry);
    if (it == entries.end()) continue;
    const auto u = static_cast<std::size_t>(it - entries.begin());
    const std::size_t n_frames = gold_has_frames ? gold_frames[u].size()
                                                 : static_cast<std::size_t>(entry->word_timings.empty() ? 0 : entry->word_timings.back().end_frame);
    annotated[rec.utterance_id].push_back(
        annotation_to_words(rec, entry->word_timings, options.hop_ms, options.rho_word, n_frames));
  }

  CorpusReport report;
  report.note = "Word-level metrics are micro-averaged over utterances; frame accuracy is the mean over utterances.";
  if (!options.annotations.empty()) report.note += " Annotation precision is computed over words.";
  for (const auto& dir : methods) {
    std::vector<std::string> missing;
    std::vector<Marks> words;
    std::vector<DLabel> frames;
    bool has_frames = gold_has_frames;
    for (const auto* e : entries) {
      if (!std::filesystem::exists(words_path(dir, e->id))) {
        missing.push_back(e->id);
        continue;
      }
      words.push_back(read_word_label(words_path(dir, e->id)).words);
      if (has_frames && std::filesystem::exists(dlabel_path(dir, e->id))) {
        frames.push_back(read_dlabel(dlabel_path(dir, e->id)).label);
      } else {
        has_frames = false;
      }
    }
    if (!missing.empty()) {
      throw ValidationError("method '" + dir.filename().string() + "' has no prediction for ids: " + join_ids(missing));
    }
    auto row = evaluate_method(dir.filename().string(), words, gold_words, has_frames ? &frames : nullptr,
                               has_frames ? &gold_frames : nullptr);
    if (!annotated.empty()) {
      std::int64_t tp = 0, fp = 0;
      for (std::size_t u = 0; u < entries.size(); ++u) {
        auto it = annotated.find(entries[u]->id);
        if (it == annotated.end()) continue;
        for (const auto& ann : it->second) {
          const auto p = annotation_precision(words[u], ann);
          tp += p.tp;
          fp += p.fp;
        }
      }
      row.annotation_precision = PrecisionResult{ratio(tp, tp + fp), tp + fp == 0, tp, fp};
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

std::string format_percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", 100.0 * fraction);
  return buf;
}

std::string report_json(const CorpusReport& report) {
  ordered_json doc;
  doc["note"] = report.note;
  doc["rows"] = ordered_json::array();
  for (const auto& row : report.rows) {
    ordered_json j;
    j["method"] = row.method;
    j["utterances"] = row.utterances;
    j["f1"] = row.words.f1;
    j["precision"] = row.words.precision;
    j["recall"] = row.words.recall;
    j["tp"] = row.words.tp;
    j["fp"] = row.words.fp;
    j["fn"] = row.words.fn;
    j["frame_accuracy"] = row.frame_accuracy ? ordered_json(*row.frame_accuracy) : ordered_json(nullptr);
    if (row.annotation_precision) {
      j["annotation_precision"] = {{"precision", row.annotation_precision->precision},
                                   {"vacuous", row.annotation_precision->vacuous},
                                   {"tp", row.annotation_precision->tp},
                                   {"fp", row.annotation_precision->fp}};
    }
    ordered_json display;
    display["f1"] = format_percent(row.words.f1);
    display["precision"] = format_percent(row.words.precision);
    display["recall"] = format_percent(row.words.recall);
    display["frame_accuracy"] = row.frame_accuracy ? format_percent(*row.frame_accuracy) : "---";
    if (row.annotation_precision) {
      display["annotation_precision"] =
          row.annotation_precision->vacuous ? "n/a" : format_percent(row.annotation_precision->precision);
    }
    j["display"] = std::move(display);
    doc["rows"].push_back(std::move(j));
  }
  return doc.dump(2) + "\n";
}

std::string report_table(const CorpusReport& report) {
  const bool with_annotation =
      std::any_of(report.rows.begin(), report.rows.end(), [](const auto& r) { return r.annotation_precision.has_value(); });
  std::vector<std::vector<std::string>> cells;
  std::vector<std::string> header = {"Method", "F1", "Precision", "Recall", "Acc."};
  if (with_annotation) header.push_back("Ann. precision");
  cells.push_back(header);
  for (const auto& row : report.rows) {
    std::vector<std::string> line = {row.method, format_percent(row.words.f1), format_percent(row.words.precision),
                                     format_percent(row.words.recall),
                                     row.frame_accuracy ? format_percent(*row.frame_accuracy) : "---"};
    if (with_annotation) {
      line.push_back(!row.annotation_precision            ? "---"
                     : row.annotation_precision->vacuous ? "n/a"
                                                          : format_percent(row.annotation_precision->precision));
    }
    cells.push_back(std::move(line));
  }
  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& line : cells) {
    for (std::size_t c = 0; c < line.size(); ++c) width[c] = std::max(width[c], line[c].size());
  }
  std::ostringstream out;
  out << "# " << report.note << "\n";
  for (const auto& line : cells) {
    std::string text;
    for (std::size_t c = 0; c < line.size(); ++c) {
      if (c == 0) {
        text += line[c] + std::string(width[c] - line[c].size(), ' ');
      } else {
        text += "  " + std::string(width[c] - line[c].size(), ' ') + line[c];
      }
    }
    out << text << "\n";
  }
  return out.str();
}

}  // namespace shadowint
