// SPDX-License-Identifier: Apache-2.0
#include "doctest.h"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

#include "shadowint/core/fseq_io.hpp"
#include "shadowint/core/label_io.hpp"
#include "shadowint/core/manifest.hpp"
#include "shadowint/core/synthetic.hpp"
#include "test_util.hpp"

using namespace shadowint;
namespace fs = std::filesystem;

namespace {

FrameSequence make_seq(int frames, int dims, float fill = 0.0f) {
  FrameSequence s;
  s.frames = FrameMatrix::Constant(frames, dims, fill);
  return s;
}

bool bit_equal(const FrameSequence& a, const FrameSequence& b) {
  if (a.frames.rows() != b.frames.rows() || a.frames.cols() != b.frames.cols()) return false;
  return std::memcmp(a.frames.data(), b.frames.data(), sizeof(float) * a.frames.size()) == 0 &&
         a.hop_ms == b.hop_ms && a.kind == b.kind;
}

}  // namespace

TEST_CASE("fseq: zeros 2x3 produce the documented header and 24 payload bytes") {
  const auto bytes = encode_frames(make_seq(2, 3));
  REQUIRE(bytes.size() == kFseqHeaderBytes + 24);
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "FSEQ");
  CHECK(get_u32(bytes, 4) == 1);
  CHECK(get_u32(bytes, 8) == 2);
  CHECK(get_u32(bytes, 12) == 3);
  CHECK(get_u32(bytes, 16) == 10);
  CHECK(bytes[20] == static_cast<std::uint8_t>(FeatureKind::kSynthetic));
  CHECK(bytes[21] == 0);
  CHECK(bytes[22] == 0);
  CHECK(bytes[23] == 0);
}

TEST_CASE("fseq: a single 1.0 is stored as IEEE little-endian 0x3F800000") {
  const auto bytes = encode_frames(make_seq(1, 1, 1.0f));
  REQUIRE(bytes.size() == kFseqHeaderBytes + 4);
  const std::vector<std::uint8_t> payload(bytes.begin() + kFseqHeaderBytes, bytes.end());
  CHECK(payload == std::vector<std::uint8_t>{0x00, 0x00, 0x80, 0x3F});
}

TEST_CASE("fseq: round trip is bit exact for random shapes") {
  test::TempDir dir;
  std::mt19937_64 rng(3);
  std::normal_distribution<float> g(0.0f, 5.0f);
  for (int trial = 0; trial < 20; ++trial) {
    auto s = make_seq(1 + static_cast<int>(rng() % 40), 1 + static_cast<int>(rng() % 9));
    for (Eigen::Index k = 0; k < s.frames.size(); ++k) s.frames.data()[k] = g(rng);
    s.hop_ms = 5 + trial;
    s.kind = static_cast<FeatureKind>(trial % 3);
    const auto path = dir.path() / "x.fseq";
    write_frames(s, path);
    CHECK(bit_equal(read_frames(path), s));
  }
}

TEST_CASE("fseq: identical input writes identical bytes") {
  test::TempDir dir;
  auto s = make_seq(4, 2, 0.25f);
  write_frames(s, dir.path() / "a.fseq");
  write_frames(s, dir.path() / "b.fseq");
  CHECK(read_file_bytes(dir.path() / "a.fseq") == read_file_bytes(dir.path() / "b.fseq"));
}

TEST_CASE("fseq: NaN is rejected and nothing is written") {
  test::TempDir dir;
  auto s = make_seq(2, 2);
  s.frames(1, 1) = std::numeric_limits<float>::quiet_NaN();
  CHECK_THROWS_AS(write_frames(s, dir.path() / "nan.fseq"), ValidationError);
  CHECK_FALSE(fs::exists(dir.path() / "nan.fseq"));
}

TEST_CASE("fseq: bad magic and truncated payload are format errors") {
  auto bytes = encode_frames(make_seq(2, 3));
  auto bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(decode_frames(bad), FormatError);
  auto truncated = bytes;
  truncated.pop_back();
  CHECK_THROWS_AS(decode_frames(truncated), FormatError);
  CHECK_THROWS_AS(read_frames("/nonexistent/file.fseq"), IoError);
}

TEST_CASE("fseq: unwritable path is an I/O error") {
  CHECK_THROWS_AS(write_frames(make_seq(1, 1), "/nonexistent-dir/x.fseq"), IoError);
}

TEST_CASE("synthetic: zero disfluency rate leaves the shadow untouched") {
  GeneratorConfig cfg;
  cfg.disfluency_rate = 0.0;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto t = generate_synthetic_triplet(seed, cfg);
    CHECK(t.gold_dlabel->count() == 0);
    CHECK(bit_equal(t.l1_shadow, t.l1_script_shadow));
  }
}

TEST_CASE("synthetic: full disfluency rate marks every word") {
  GeneratorConfig cfg;
  cfg.disfluency_rate = 1.0;
  const auto t = generate_synthetic_triplet(11, cfg);
  for (const auto& w : t.word_timings) {
    for (int f = w.start_frame; f < w.end_frame; ++f) CHECK(t.gold_dlabel->marks[f] == 1);
  }
}

TEST_CASE("synthetic: generation is a pure function of seed and config") {
  GeneratorConfig cfg;
  const auto a = generate_synthetic_triplet(7, cfg);
  const auto b = generate_synthetic_triplet(7, cfg);
  CHECK(bit_equal(a.l2_read, b.l2_read));
  CHECK(bit_equal(a.l1_shadow, b.l1_shadow));
  CHECK(bit_equal(a.l1_script_shadow, b.l1_script_shadow));
  CHECK(bit_equal(*a.l2_read_align, *b.l2_read_align));
  CHECK(a.transcript == b.transcript);
  CHECK(a.gold_dlabel->marks == b.gold_dlabel->marks);
  const auto c = generate_synthetic_triplet(8, cfg);
  CHECK_FALSE(bit_equal(a.l2_read, c.l2_read));
}

TEST_CASE("synthetic: invariants hold over many seeds") {
  GeneratorConfig cfg;
  cfg.disfluency_rate = 0.3;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto t = generate_synthetic_triplet(seed, cfg);
    CHECK_NOTHROW(t.validate());
    REQUIRE(t.gold_dlabel->size() == static_cast<std::size_t>(t.l2_read.length()));
    CHECK(t.l2_read.dim() == cfg.d_src);
    CHECK(t.l1_shadow.dim() == cfg.d_trg);
    CHECK(t.l1_shadow.length() >= t.l2_read.length());
    for (std::size_t f = 0; f < t.gold_dlabel->size(); ++f) {
      if (!t.gold_dlabel->marks[f]) continue;
      bool inside = false;
      for (const auto& w : t.word_timings) inside |= w.start_frame <= static_cast<int>(f) && static_cast<int>(f) < w.end_frame;
      CHECK(inside);
    }
  }
}

TEST_CASE("synthetic: invalid configs are rejected") {
  GeneratorConfig cfg;
  cfg.disfluency_rate = 1.5;
  CHECK_THROWS_AS(generate_synthetic_triplet(1, cfg), ValidationError);
  cfg = {};
  cfg.min_words = 5;
  cfg.max_words = 4;
  CHECK_THROWS_AS(generate_synthetic_triplet(1, cfg), ValidationError);
  cfg = {};
  cfg.max_frames_per_word = 0;
  CHECK_THROWS_AS(generate_synthetic_triplet(1, cfg), ValidationError);
}

TEST_CASE("manifest: empty file is an empty corpus") {
  test::TempDir dir;
  write_text_file(dir.path() / "m.jsonl", "");
  CHECK(load_manifest(dir.path() / "m.jsonl").entries.empty());
}

TEST_CASE("manifest: missing file is an I/O error") {
  CHECK_THROWS_AS(load_manifest("/nonexistent/m.jsonl"), IoError);
}

TEST_CASE("manifest: writer/reader round trip keeps three entries in order") {
  test::TempDir dir;
  write_frames(make_seq(5, 2), dir.path() / "f.fseq");
  CorpusManifest m;
  for (const char* id : {"c", "a", "b"}) {
    ManifestEntry e;
    e.id = id;
    e.l2_read = e.l1_shadow = e.l1_script_shadow = "f.fseq";
    e.transcript = {"hello", "world"};
    e.word_timings = {{"hello", 0, 2}, {"world", 3, 5}};
    e.split = Split::kTest;
    m.entries.push_back(e);
  }
  write_manifest(m, dir.path() / "m.jsonl");
  const auto loaded = load_manifest(dir.path() / "m.jsonl");
  REQUIRE(loaded.entries.size() == 3);
  CHECK(loaded.entries[0].id == "c");
  CHECK(loaded.entries[1].id == "a");
  CHECK(loaded.entries[2].id == "b");
  for (std::size_t k = 0; k < 3; ++k) CHECK(manifest_line(loaded.entries[k]) == manifest_line(m.entries[k]));
  const auto t = load_triplet(loaded, loaded.entries[0]);
  CHECK(t.word_timings[1].end_frame == 5);
}

TEST_CASE("manifest: missing l1_shadow is a parse error naming field and line") {
  test::TempDir dir;
  write_frames(make_seq(5, 2), dir.path() / "f.fseq");
  const std::string good =
      R"({"id":"u1","l2_read":"f.fseq","l1_shadow":"f.fseq","l1_script_shadow":"f.fseq","transcript":[],"word_timings":[],"split":"train"})";
  const std::string bad =
      R"({"id":"u2","l2_read":"f.fseq","l1_script_shadow":"f.fseq","transcript":[],"word_timings":[],"split":"train"})";
  write_text_file(dir.path() / "m.jsonl", good + "\n" + bad + "\n");
  try {
    load_manifest(dir.path() / "m.jsonl");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    const std::string what = e.what();
    CHECK(what.find("l1_shadow") != std::string::npos);
    CHECK(what.find("line 2") != std::string::npos);
  }
}

TEST_CASE("manifest: malformed JSON and dangling paths") {
  test::TempDir dir;
  write_text_file(dir.path() / "m.jsonl", "{not json\n");
  CHECK_THROWS_AS(load_manifest(dir.path() / "m.jsonl"), ParseError);

  write_text_file(dir.path() / "d.jsonl",
                  R"({"id":"lost","l2_read":"nope.fseq","l1_shadow":"nope.fseq","l1_script_shadow":"nope.fseq","transcript":[],"word_timings":[]})"
                  "\n");
  try {
    load_manifest(dir.path() / "d.jsonl");
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("lost") != std::string::npos);
  }
}

TEST_CASE("manifest: duplicate ids and overlapping timings are rejected") {
  test::TempDir dir;
  write_frames(make_seq(5, 2), dir.path() / "f.fseq");
  const std::string line =
      R"({"id":"u","l2_read":"f.fseq","l1_shadow":"f.fseq","l1_script_shadow":"f.fseq","transcript":[],"word_timings":[]})";
  write_text_file(dir.path() / "dup.jsonl", line + "\n" + line + "\n");
  CHECK_THROWS_AS(load_manifest(dir.path() / "dup.jsonl"), ValidationError);

  write_text_file(dir.path() / "ov.jsonl",
                  R"({"id":"u","l2_read":"f.fseq","l1_shadow":"f.fseq","l1_script_shadow":"f.fseq","transcript":["a","b"],"word_timings":[[0,3],[2,4]]})"
                  "\n");
  CHECK_THROWS_AS(load_manifest(dir.path() / "ov.jsonl"), ParseError);
}

TEST_CASE("label files round trip") {
  test::TempDir dir;
  DLabel l{{0, 1, 1, 0}, 10};
  write_dlabel(dir.path() / "x.dlabel.json", "utt", l);
  const auto back = read_dlabel(dir.path() / "x.dlabel.json");
  CHECK(back.id == "utt");
  CHECK(back.label.marks == l.marks);
  CHECK(back.label.hop_ms == 10);
  write_word_label(dir.path() / "x.words.json", "utt", {1, 0});
  CHECK(read_word_label(dir.path() / "x.words.json").words == Marks{1, 0});
  CHECK(dlabel_json("utt", l) == "{\"id\":\"utt\",\"hop_ms\":10,\"marks\":[0,1,1,0]}\n");
}
