// SPDX-License-Identifier: Apache-2.0
#include "doctest.h"

#include <algorithm>
#include <numeric>
#include <random>
#include <sstream>

#include "json.hpp"
#include "shadowint/core/label_io.hpp"
#include "shadowint/eval/metrics.hpp"
#include "test_util.hpp"

using namespace shadowint;

namespace {

Marks positions(std::size_t n, std::initializer_list<std::size_t> marked) {
  Marks m(n, 0);
  for (auto i : marked) m[i] = 1;
  return m;
}

Marks random_marks(std::mt19937_64& rng, std::size_t n, unsigned percent = 40) {
  Marks m(n);
  for (auto& v : m) v = (rng() % 100) < percent;
  return m;
}

struct Counts {
  long tp = 0, fp = 0, fn = 0;
};

Counts count(const Marks& p, const Marks& g) {
  Counts c;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (p[i] == 1 && g[i] == 1) ++c.tp;
    if (p[i] == 1 && g[i] == 0) ++c.fp;
    if (p[i] == 0 && g[i] == 1) ++c.fn;
  }
  return c;
}

/// Ten words of four frames each at 10 ms: word w spans frames [4w, 4w + 4).
std::vector<WordTiming> ten_words() {
  std::vector<WordTiming> t;
  for (int w = 0; w < 10; ++w) t.push_back({"w" + std::to_string(w), 4 * w, 4 * w + 4});
  return t;
}

ManifestEntry entry(const std::string& id, Split split, std::vector<WordTiming> timings = {}) {
  ManifestEntry e;
  e.id = id;
  e.split = split;
  e.word_timings = std::move(timings);
  return e;
}

}  // namespace

TEST_CASE("word_prf: hand-counted examples") {
  const Marks gold = positions(6, {1, 4});
  const auto perfect = word_prf(gold, gold);
  CHECK(perfect.precision == 1.0);
  CHECK(perfect.recall == 1.0);
  CHECK(perfect.f1 == 1.0);

  // Gold words 2 and 5, predicted 2 and 3 (1-based positions).
  const auto r = word_prf(positions(6, {1, 2}), positions(6, {1, 4}));
  CHECK(r.tp == 1);
  CHECK(r.fp == 1);
  CHECK(r.fn == 1);
  CHECK(r.precision == 0.5);
  CHECK(r.recall == 0.5);
  CHECK(r.f1 == 0.5);

  const auto none = word_prf(Marks(4, 0), Marks(4, 0));
  CHECK(none.precision == 0.0);
  CHECK(none.recall == 0.0);
  CHECK(none.f1 == 0.0);
  CHECK_THROWS_AS(word_prf(Marks(3, 0), Marks(4, 0)), ValidationError);
}

TEST_CASE("word_prf: swap symmetry, permutation equivariance and bounds") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng() % 30;
    const Marks p = random_marks(rng, n), g = random_marks(rng, n);
    const auto r = word_prf(p, g);
    const auto c = count(p, g);
    CHECK(r.tp == c.tp);
    CHECK(r.fp == c.fp);
    CHECK(r.fn == c.fn);

    const auto s = word_prf(g, p);
    CHECK(s.precision == r.recall);
    CHECK(s.recall == r.precision);

    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Marks pp(n), gp(n);
    for (std::size_t i = 0; i < n; ++i) {
      pp[i] = p[perm[i]];
      gp[i] = g[perm[i]];
    }
    const auto q = word_prf(pp, gp);
    CHECK(q.f1 == r.f1);
    CHECK(q.precision == r.precision);
    CHECK(q.recall == r.recall);

    for (double v : {r.f1, r.precision, r.recall}) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
    if (r.precision > 0.0 && r.recall > 0.0) {
      CHECK(r.f1 <= std::max(r.precision, r.recall));
      CHECK(r.f1 >= std::min(r.precision, r.recall));
      CHECK(r.f1 == doctest::Approx(2.0 / (1.0 / r.precision + 1.0 / r.recall)).epsilon(1e-12));
    }
  }
}

TEST_CASE("frame_accuracy: examples and errors") {
  DLabel a{{0, 1, 1, 0}, 10}, b{{1, 0, 0, 1}, 10}, c{{0, 1, 0, 0}, 10};
  CHECK(frame_accuracy(a, a) == 1.0);
  CHECK(frame_accuracy(a, b) == 0.0);
  CHECK(frame_accuracy(a, c) == 0.75);
  CHECK_THROWS_AS(frame_accuracy(a, DLabel{{0, 1, 1}, 10}), ValidationError);
  CHECK_THROWS_AS(frame_accuracy(a, DLabel{{0, 1, 1, 0}, 20}), ValidationError);
}

TEST_CASE("annotation_precision: examples and vacuity flag") {
  const auto subset = annotation_precision(positions(5, {1}), positions(5, {1, 3}));
  CHECK(subset.precision == 1.0);
  CHECK_FALSE(subset.vacuous);
  // Predicted words 1 and 2, annotated word 2.
  CHECK(annotation_precision(positions(3, {0, 1}), positions(3, {1})).precision == 0.5);
  const auto empty = annotation_precision(Marks(4, 0), positions(4, {2}));
  CHECK(empty.precision == 0.0);
  CHECK(empty.vacuous);
  CHECK_THROWS_AS(annotation_precision(Marks(2, 0), Marks(3, 0)), ValidationError);
}

TEST_CASE("annotations: overlapping holds merge on import") {
  const auto records = parse_annotations(R"([{"utterance_id": "u1", "annotator_id": "a", "edited": false,
      "intervals": [{"start_ms": 250, "end_ms": 400}, {"start_ms": 100, "end_ms": 300}]}])");
  REQUIRE(records.size() == 1);
  CHECK(records[0].intervals == std::vector<AnnotationInterval>{{100, 400}});

  // Touching intervals stay separate; contained intervals disappear.
  CHECK(normalize_intervals({{0, 10}, {10, 20}, {2, 5}}) == std::vector<AnnotationInterval>{{0, 10}, {10, 20}});
  CHECK_THROWS_AS(normalize_intervals({{5, 5}}), ValidationError);
  CHECK_THROWS_AS(normalize_intervals({{-1, 5}}), ValidationError);
}

TEST_CASE("annotations: export then import preserves records exactly") {
  std::vector<AnnotationRecord> records = {
      {"u1", "rater_a", {{0, 120}, {500, 910}}, true},
      {"u2", "rater_b", {}, false},
  };
  test::TempDir dir;
  write_annotations(dir.path() / "ann.json", records);
  const auto back = read_annotations(dir.path() / "ann.json");
  REQUIRE(back.size() == 2);
  for (std::size_t k = 0; k < 2; ++k) {
    CHECK(back[k].utterance_id == records[k].utterance_id);
    CHECK(back[k].annotator_id == records[k].annotator_id);
    CHECK(back[k].intervals == records[k].intervals);
    CHECK(back[k].edited == records[k].edited);
  }
  CHECK(annotations_json(back) == annotations_json(records));
}

TEST_CASE("annotations: malformed input") {
  CHECK_THROWS_AS(parse_annotations("{}"), ParseError);
  CHECK_THROWS_AS(parse_annotations("[{\"utterance_id\": \"u\"}]"), ParseError);
  CHECK_THROWS_AS(parse_annotations("not json"), ParseError);
  CHECK_THROWS_AS(parse_annotations(R"([{"utterance_id": "u", "annotator_id": "a", "edited": false,
      "intervals": [{"start_ms": 30, "end_ms": 10}]}])"),
                  ValidationError);
}

TEST_CASE("annotation_to_words: worked examples") {
  const auto timings = ten_words();
  AnnotationRecord rec{"u", "a", {}, false};
  CHECK(annotation_to_words(rec, timings, 10, 0.5, 40) == Marks(10, 0));

  // Word 3 (index 2) spans frames 8..11, i.e. [80, 120) ms.
  rec.intervals = {{80, 120}};
  CHECK(annotation_to_words(rec, timings, 10, 0.5, 40) == positions(10, {2}));

  // Second half of word 2 (frames 6, 7) plus all of word 3: midpoints 65, 75, ..., 115 ms.
  rec.intervals = {{60, 120}};
  const auto frames = annotation_to_frames(rec, 40, 10);
  std::vector<std::size_t> marked;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (frames.marks[i]) marked.push_back(i);
  }
  CHECK(marked == std::vector<std::size_t>{6, 7, 8, 9, 10, 11});
  CHECK(annotation_to_words(rec, timings, 10, 0.5, 40) == positions(10, {1, 2}));

  // Midpoint exactly on the interval end is excluded.
  rec.intervals = {{0, 15}};
  CHECK(annotation_to_frames(rec, 40, 10).marks[1] == 0);
  CHECK(annotation_to_frames(rec, 40, 10).marks[0] == 1);
}

TEST_CASE("annotation_to_words: intervals past the end are clipped with a warning") {
  AnnotationRecord rec{"u7", "a", {{360, 900}}, false};
  std::vector<std::string> warnings;
  const auto words = annotation_to_words(rec, ten_words(), 10, 0.5, 40, &warnings);
  CHECK(words == positions(10, {9}));
  REQUIRE(warnings.size() == 1);
  CHECK(warnings[0].find("u7") != std::string::npos);
}

TEST_CASE("annotation_to_words: adding an interval never unmarks a word") {
  std::mt19937_64 rng(5);
  const auto timings = ten_words();
  for (int trial = 0; trial < 100; ++trial) {
    AnnotationRecord rec{"u", "a", {}, false};
    Marks previous(10, 0);
    for (int k = 0; k < 5; ++k) {
      const std::int64_t start = static_cast<std::int64_t>(rng() % 400);
      rec.intervals.push_back({start, start + 1 + static_cast<std::int64_t>(rng() % 120)});
      const auto words = annotation_to_words(rec, timings, 10, 0.5, 40);
      for (std::size_t w = 0; w < 10; ++w) CHECK(words[w] >= previous[w]);
      previous = words;
    }
  }
}

TEST_CASE("evaluate_method: percent formatting of pooled counts") {
  const auto row = WordEvalResult::from_counts(34, 84, 91);
  CHECK(format_percent(row.f1) == "28.0");
  CHECK(format_percent(row.precision) == "28.8");
  CHECK(format_percent(row.recall) == "27.2");
  CHECK(format_percent(1.0) == "100.0");
  CHECK(format_percent(0.0) == "0.0");
}

TEST_CASE("evaluate_corpus: pooled counts, fixtures and report formats") {
  test::TempDir dir;
  const auto gold_dir = dir.path() / "gold";
  const auto pred_dir = dir.path() / "predictions";
  std::filesystem::create_directories(gold_dir);
  std::filesystem::create_directories(pred_dir / "ASR-based");
  std::filesystem::create_directories(pred_dir / "proposed");

  // One 209-word utterance with 34 hits, 84 false alarms and 91 misses.
  CorpusManifest manifest;
  manifest.entries.push_back(entry("big", Split::kTest));
  Marks gold(209, 0), asr(209, 0);
  for (int i = 0; i < 34; ++i) gold[i] = asr[i] = 1;
  for (int i = 34; i < 118; ++i) asr[i] = 1;
  for (int i = 118; i < 209; ++i) gold[i] = 1;
  write_word_label(gold_dir / "big.words.json", "big", gold);
  write_word_label(pred_dir / "ASR-based" / "big.words.json", "big", asr);
  write_word_label(pred_dir / "proposed" / "big.words.json", "big", gold);
  write_dlabel(gold_dir / "big.dlabel.json", "big", DLabel{{0, 1, 1, 0}, 10});
  write_dlabel(pred_dir / "proposed" / "big.dlabel.json", "big", DLabel{{0, 1, 0, 0}, 10});

  // A train-split id without files is ignored by the default split filter.
  manifest.entries.push_back(entry("train_only", Split::kTrain));

  const auto report = evaluate_corpus(manifest, pred_dir, gold_dir);
  REQUIRE(report.rows.size() == 2);
  const auto& asr_row = report.rows[0];
  CHECK(asr_row.method == "ASR-based");
  CHECK(asr_row.words.tp == 34);
  CHECK(asr_row.words.fp == 84);
  CHECK(asr_row.words.fn == 91);
  CHECK_FALSE(asr_row.frame_accuracy.has_value());
  CHECK(report.rows[1].words.f1 == 1.0);
  CHECK(report.rows[1].frame_accuracy.value() == 0.75);

  const std::string table = report_table(report);
  std::istringstream lines(table);
  std::string line, asr_line;
  while (std::getline(lines, line)) {
    if (line.rfind("ASR-based", 0) == 0) asr_line = line;
  }
  std::istringstream cells(asr_line);
  std::vector<std::string> tokens{std::istream_iterator<std::string>(cells), {}};
  CHECK(tokens == std::vector<std::string>{"ASR-based", "28.0", "28.8", "27.2", "---"});

  // JSON and table agree cell by cell.
  const auto json = nlohmann::json::parse(report_json(report));
  for (const auto& row : json["rows"]) {
    std::istringstream t(table);
    bool found = false;
    while (std::getline(t, line)) {
      std::istringstream c(line);
      std::vector<std::string> cols{std::istream_iterator<std::string>(c), {}};
      if (cols.empty() || cols[0] != row["method"].get<std::string>()) continue;
      found = true;
      const auto& d = row["display"];
      CHECK(cols[1] == d["f1"].get<std::string>());
      CHECK(cols[2] == d["precision"].get<std::string>());
      CHECK(cols[3] == d["recall"].get<std::string>());
      CHECK(cols[4] == d["frame_accuracy"].get<std::string>());
      CHECK(d["f1"].get<std::string>() == format_percent(row["f1"].get<double>()));
    }
    CHECK(found);
  }
}

TEST_CASE("evaluate_corpus: micro average equals concatenation and single utterance equals per-utterance") {
  std::mt19937_64 rng(9);
  test::TempDir dir;
  const auto gold_dir = dir.path() / "gold";
  const auto method = dir.path() / "pred" / "m";
  std::filesystem::create_directories(gold_dir);
  std::filesystem::create_directories(method);
  CorpusManifest manifest;
  Marks all_pred, all_gold;
  Counts independent;
  for (int u = 0; u < 12; ++u) {
    const std::string id = "utt" + std::to_string(u);
    manifest.entries.push_back(entry(id, Split::kTest));
    const std::size_t n = 3 + rng() % 12;
    const Marks p = random_marks(rng, n), g = random_marks(rng, n);
    write_word_label(method / (id + ".words.json"), id, p);
    write_word_label(gold_dir / (id + ".words.json"), id, g);
    all_pred.insert(all_pred.end(), p.begin(), p.end());
    all_gold.insert(all_gold.end(), g.begin(), g.end());
    const auto c = count(p, g);
    independent.tp += c.tp;
    independent.fp += c.fp;
    independent.fn += c.fn;
  }
  const auto report = evaluate_corpus(manifest, dir.path() / "pred", gold_dir);
  REQUIRE(report.rows.size() == 1);
  const auto& r = report.rows[0].words;
  CHECK(r.tp == independent.tp);
  CHECK(r.fp == independent.fp);
  CHECK(r.fn == independent.fn);
  const auto concat = word_prf(all_pred, all_gold);
  CHECK(r.f1 == concat.f1);
  CHECK(r.precision == concat.precision);
  CHECK(r.recall == concat.recall);

  CorpusManifest single;
  single.entries.push_back(manifest.entries[3]);
  const auto one = evaluate_corpus(single, dir.path() / "pred", gold_dir);
  const auto direct = word_prf(read_word_label(method / "utt3.words.json").words,
                               read_word_label(gold_dir / "utt3.words.json").words);
  CHECK(one.rows[0].words.f1 == direct.f1);
  CHECK(one.rows[0].words.precision == direct.precision);
  CHECK(one.rows[0].words.recall == direct.recall);
}

TEST_CASE("evaluate_corpus: missing ids are listed") {
  test::TempDir dir;
  std::filesystem::create_directories(dir.path() / "gold");
  std::filesystem::create_directories(dir.path() / "pred" / "m");
  CorpusManifest manifest;
  manifest.entries.push_back(entry("a", Split::kTest));
  manifest.entries.push_back(entry("b", Split::kTest));
  write_word_label(dir.path() / "gold" / "a.words.json", "a", Marks{1});
  write_word_label(dir.path() / "gold" / "b.words.json", "b", Marks{1});
  write_word_label(dir.path() / "pred" / "m" / "a.words.json", "a", Marks{1});
  try {
    evaluate_corpus(manifest, dir.path() / "pred", dir.path() / "gold");
    FAIL("expected a missing-id error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("b") != std::string::npos);
  }
  std::filesystem::remove(dir.path() / "gold" / "a.words.json");
  CHECK_THROWS_WITH_AS(evaluate_corpus(manifest, dir.path() / "pred", dir.path() / "gold"),
                       doctest::Contains("gold labels missing for ids: a"), ValidationError);
}

TEST_CASE("evaluate_corpus: annotation precision column") {
  test::TempDir dir;
  const auto gold_dir = dir.path() / "gold";
  const auto method = dir.path() / "pred" / "m";
  std::filesystem::create_directories(gold_dir);
  std::filesystem::create_directories(method);
  CorpusManifest manifest;
  manifest.entries.push_back(entry("u", Split::kTest, ten_words()));
  write_word_label(gold_dir / "u.words.json", "u", Marks(10, 0));
  write_dlabel(gold_dir / "u.dlabel.json", "u", DLabel{Marks(40, 0), 10});
  write_word_label(method / "u.words.json", "u", positions(10, {2, 5}));
  EvaluateOptions options;
  options.annotations = {{"u", "rater", {{80, 120}}, false}, {"unknown", "rater", {{0, 10}}, false}};
  const auto report = evaluate_corpus(manifest, dir.path() / "pred", gold_dir, options);
  REQUIRE(report.rows[0].annotation_precision.has_value());
  CHECK(report.rows[0].annotation_precision->precision == 0.5);
  CHECK(report_table(report).find("Ann. precision") != std::string::npos);
  CHECK(report.note.find("over words") != std::string::npos);
}
