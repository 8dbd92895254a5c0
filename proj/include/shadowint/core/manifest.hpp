// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "shadowint/core/types.hpp"

namespace shadowint {

/// One JSON-lines record. Feature paths are stored as written in the file and
/// resolved against the manifest directory on load.
struct ManifestEntry {
  std::string id;
  std::string l2_read;
  std::string l1_shadow;
  std::string l1_script_shadow;
  std::optional<std::string> l2_read_align;
  std::vector<std::string> transcript;
  std::vector<WordTiming> word_timings;
  std::optional<std::string> gold_dlabel;
  Split split = Split::kTrain;
};

struct CorpusManifest {
  std::filesystem::path base_dir;
  std::vector<ManifestEntry> entries;

  std::filesystem::path resolve(const std::string& relative) const { return base_dir / relative; }
  std::vector<const ManifestEntry*> select(Split split) const;
  const ManifestEntry* find(const std::string& id) const;
};

/// Parses and validates a JSON-lines manifest. Blank lines are skipped.
/// Throws IoError for a missing file, ParseError (with line number and field)
/// for malformed records, ValidationError (with id) for duplicate ids,
/// inconsistent timings or dangling feature paths.
CorpusManifest load_manifest(const std::filesystem::path& path);

/// Serialises one entry as a single JSON line (no trailing newline).
std::string manifest_line(const ManifestEntry& entry);
void write_manifest(const CorpusManifest& manifest, const std::filesystem::path& path);

/// Reads the feature files (and gold label if present) of one entry.
UtteranceTriplet load_triplet(const CorpusManifest& manifest, const ManifestEntry& entry);

}  // namespace shadowint
