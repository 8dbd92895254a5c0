// SPDX-License-Identifier: Apache-2.0
#include "shadowint/core/manifest.hpp"

#include <fstream>
#include <unordered_set>

#include "json.hpp"
#include "shadowint/core/fseq_io.hpp"
#include "shadowint/core/label_io.hpp"

namespace shadowint {

using nlohmann::json;

namespace {

std::string line_prefix(std::size_t line_no) { return "manifest line " + std::to_string(line_no) + ": "; }

const json& require_field(const json& obj, const char* field, std::size_t line_no) {
  if (!obj.contains(field)) {
    throw ParseError(line_prefix(line_no) + "missing field '" + field + "'");
  }
  return obj.at(field);
}

std::string require_string(const json& obj, const char* field, std::size_t line_no) {
  const json& v = require_field(obj, field, line_no);
  if (!v.is_string()) throw ParseError(line_prefix(line_no) + "field '" + field + "' must be a string");
  return v.get<std::string>();
}

std::optional<std::string> optional_string(const json& obj, const char* field, std::size_t line_no) {
  if (!obj.contains(field) || obj.at(field).is_null()) return std::nullopt;
  if (!obj.at(field).is_string()) {
    throw ParseError(line_prefix(line_no) + "field '" + field + "' must be a string");
  }
  return obj.at(field).get<std::string>();
}

ManifestEntry parse_entry(const std::string& text, std::size_t line_no) {
  json obj;
  try {
    obj = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(line_prefix(line_no) + e.what());
  }
  if (!obj.is_object()) throw ParseError(line_prefix(line_no) + "record must be a JSON object");

  ManifestEntry entry;
  entry.id = require_string(obj, "id", line_no);
  entry.l2_read = require_string(obj, "l2_read", line_no);
  entry.l1_shadow = require_string(obj, "l1_shadow", line_no);
  entry.l1_script_shadow = require_string(obj, "l1_script_shadow", line_no);
  entry.l2_read_align = optional_string(obj, "l2_read_align", line_no);
  entry.gold_dlabel = optional_string(obj, "gold_dlabel", line_no);

  const json& transcript = require_field(obj, "transcript", line_no);
  if (!transcript.is_array()) throw ParseError(line_prefix(line_no) + "field 'transcript' must be an array");
  for (const auto& w : transcript) {
    if (!w.is_string()) throw ParseError(line_prefix(line_no) + "field 'transcript' must hold strings");
    entry.transcript.push_back(w.get<std::string>());
  }

  const json& timings = require_field(obj, "word_timings", line_no);
  if (!timings.is_array()) throw ParseError(line_prefix(line_no) + "field 'word_timings' must be an array");
  if (timings.size() != entry.transcript.size()) {
    throw ParseError(line_prefix(line_no) + "field 'word_timings' length differs from 'transcript'");
  }
  for (std::size_t w = 0; w < timings.size(); ++w) {
    const json& pair = timings[w];
    if (!pair.is_array() || pair.size() != 2 || !pair[0].is_number_integer() ||
        !pair[1].is_number_integer()) {
      throw ParseError(line_prefix(line_no) + "field 'word_timings' entries must be [start, end]");
    }
    entry.word_timings.push_back({entry.transcript[w], pair[0].get<int>(), pair[1].get<int>()});
  }

  const std::string split = obj.contains("split") ? require_string(obj, "split", line_no) : "train";
  try {
    entry.split = split_from_string(split);
    validate_word_timings(entry.word_timings);
  } catch (const ValidationError& e) {
    throw ParseError(line_prefix(line_no) + e.what());
  }
  return entry;
}

}  // namespace

std::vector<const ManifestEntry*> CorpusManifest::select(Split split) const {
  std::vector<const ManifestEntry*> out;
  for (const auto& e : entries) {
    if (e.split == split) out.push_back(&e);
  }
  return out;
}

const ManifestEntry* CorpusManifest::find(const std::string& id) const {
  for (const auto& e : entries) {
    if (e.id == id) return &e;
  }
  return nullptr;
}

CorpusManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());

  CorpusManifest manifest;
  manifest.base_dir = path.parent_path();
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ManifestEntry entry = parse_entry(line, line_no);
    if (!seen.insert(entry.id).second) {
      throw ValidationError("duplicate manifest id '" + entry.id + "'");
    }
    std::vector<std::string> paths = {entry.l2_read, entry.l1_shadow, entry.l1_script_shadow};
    if (entry.l2_read_align) paths.push_back(*entry.l2_read_align);
    if (entry.gold_dlabel) paths.push_back(*entry.gold_dlabel);
    for (const auto& p : paths) {
      if (!std::filesystem::exists(manifest.resolve(p))) {
        throw ValidationError(entry.id + ": referenced file does not exist: " + p);
      }
    }
    manifest.entries.push_back(std::move(entry));
  }
  return manifest;
}

std::string manifest_line(const ManifestEntry& entry) {
  nlohmann::ordered_json j;
  j["id"] = entry.id;
  j["l2_read"] = entry.l2_read;
  j["l1_shadow"] = entry.l1_shadow;
  j["l1_script_shadow"] = entry.l1_script_shadow;
  if (entry.l2_read_align) j["l2_read_align"] = *entry.l2_read_align;
  j["transcript"] = entry.transcript;
  auto timings = nlohmann::ordered_json::array();
  for (const auto& t : entry.word_timings) timings.push_back({t.start_frame, t.end_frame});
  j["word_timings"] = timings;
  if (entry.gold_dlabel) j["gold_dlabel"] = *entry.gold_dlabel;
  j["split"] = to_string(entry.split);
  return j.dump();
}

void write_manifest(const CorpusManifest& manifest, const std::filesystem::path& path) {
  std::string text;
  for (const auto& e : manifest.entries) {
    text += manifest_line(e);
    text += '\n';
  }
  write_text_file(path, text);
}

UtteranceTriplet load_triplet(const CorpusManifest& manifest, const ManifestEntry& entry) {
  UtteranceTriplet t;
  t.id = entry.id;
  auto read = [&](const std::string& rel) {
    try {
      return read_frames(manifest.resolve(rel));
    } catch (const Error& e) {
      throw FormatError(entry.id + ": " + rel + ": " + e.what());
    }
  };
  t.l2_read = read(entry.l2_read);
  t.l1_shadow = read(entry.l1_shadow);
  t.l1_script_shadow = read(entry.l1_script_shadow);
  if (entry.l2_read_align) t.l2_read_align = read(*entry.l2_read_align);
  t.transcript = entry.transcript;
  t.word_timings = entry.word_timings;
  if (entry.gold_dlabel) t.gold_dlabel = read_dlabel(manifest.resolve(*entry.gold_dlabel)).label;
  t.validate();
  return t;
}

}  // namespace shadowint
