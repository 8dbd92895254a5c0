// SPDX-License-Identifier: Apache-2.0
#include "shadowint/core/label_io.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace shadowint {

using ordered_json = nlohmann::ordered_json;

namespace {

Marks marks_from_json(const nlohmann::json& array, const std::filesystem::path& path,
                      const char* field) {
  if (!array.is_array()) throw ParseError(path.string() + ": field '" + field + "' must be an array");
  Marks marks;
  marks.reserve(array.size());
  for (const auto& v : array) {
    if (!v.is_number_integer() || (v.get<int>() != 0 && v.get<int>() != 1)) {
      throw ParseError(path.string() + ": field '" + field + "' must hold 0/1 values");
    }
    marks.push_back(static_cast<std::uint8_t>(v.get<int>()));
  }
  return marks;
}

nlohmann::json parse_file(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

const nlohmann::json& require(const nlohmann::json& obj, const char* field,
                              const std::filesystem::path& path) {
  if (!obj.is_object() || !obj.contains(field)) {
    throw ParseError(path.string() + ": missing field '" + field + "'");
  }
  return obj.at(field);
}

}  // namespace

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::string dlabel_json(const std::string& id, const DLabel& label) {
  ordered_json j;
  j["id"] = id;
  j["hop_ms"] = label.hop_ms;
  j["marks"] = label.marks;
  return j.dump() + "\n";
}

std::string word_label_json(const std::string& id, const Marks& words) {
  ordered_json j;
  j["id"] = id;
  j["words"] = words;
  return j.dump() + "\n";
}

void write_dlabel(const std::filesystem::path& path, const std::string& id, const DLabel& label) {
  label.validate();
  write_text_file(path, dlabel_json(id, label));
}

LabelFile read_dlabel(const std::filesystem::path& path) {
  const auto j = parse_file(path);
  LabelFile file;
  try {
    file.id = require(j, "id", path).get<std::string>();
    file.label.hop_ms = require(j, "hop_ms", path).get<int>();
  } catch (const nlohmann::json::type_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  file.label.marks = marks_from_json(require(j, "marks", path), path, "marks");
  file.label.validate();
  return file;
}

void write_word_label(const std::filesystem::path& path, const std::string& id, const Marks& words) {
  write_text_file(path, word_label_json(id, words));
}

WordLabelFile read_word_label(const std::filesystem::path& path) {
  const auto j = parse_file(path);
  WordLabelFile file;
  try {
    file.id = require(j, "id", path).get<std::string>();
  } catch (const nlohmann::json::type_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  file.words = marks_from_json(require(j, "words", path), path, "words");
  return file;
}

}  // namespace shadowint
