// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>

#include "shadowint/core/types.hpp"

namespace shadowint {

// DLabel file:      {"id": ..., "hop_ms": ..., "marks": [0/1, ...]}
// Word-label file:  {"id": ..., "words": [0/1, ...]}

struct LabelFile {
  std::string id;
  DLabel label;
};

struct WordLabelFile {
  std::string id;
  Marks words;
};

std::string dlabel_json(const std::string& id, const DLabel& label);
std::string word_label_json(const std::string& id, const Marks& words);

void write_dlabel(const std::filesystem::path& path, const std::string& id, const DLabel& label);
LabelFile read_dlabel(const std::filesystem::path& path);

void write_word_label(const std::filesystem::path& path, const std::string& id, const Marks& words);
WordLabelFile read_word_label(const std::filesystem::path& path);

/// Truncates and writes; throws IoError on failure.
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace shadowint
