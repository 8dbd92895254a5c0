// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "shadowint/core/synthetic.hpp"
#include "shadowint/labeler/labels.hpp"
#include "shadowint/model/trainer.hpp"

namespace shadowint::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

inline constexpr const char* kOutputRootEnv = "SHADOWINT_OUTPUT_ROOT";

/// Everything a run depends on. Serialized into the config hash.
struct RunConfig {
  std::filesystem::path corpus_root = "corpus";
  std::filesystem::path output_root = "runs";
  int n = 100;
  std::uint64_t seed = 1;
  GeneratorConfig generator;
  LocalMetric metric = LocalMetric::kCosineDistance;
  ThresholdPolicy threshold;
  ModelConfig model;
  double tau = -0.6931471805599453;  // ln 0.5
  double rho_word = 0.5;
  PredictMode mode = PredictMode::kMultitask;
  std::optional<Split> split = Split::kTest;  // predict / evaluate / export scope
  int jobs = 1;

  void validate() const;
};

nlohmann::ordered_json run_config_to_json(const RunConfig& cfg);

/// Overlays the keys present in `j` onto `base`; unknown keys are rejected.
RunConfig run_config_from_json(const nlohmann::json& j, RunConfig base = {});

/// FNV-1a 64 over the canonical JSON of the config.
std::uint64_t config_hash(const RunConfig& cfg);
std::uint64_t fnv1a64(std::string_view bytes);

/// Deterministic split: ids ordered by FNV-1a hash (ties by id); the first
/// floor(0.8 N) train, the next floor(0.1 N) dev, the rest test.
std::vector<Split> assign_splits(const std::vector<std::string>& ids);

/// Runs fn(i) for i in [0, n) on up to `jobs` threads. Exceptions are
/// collected per index instead of propagating.
std::vector<std::optional<std::string>> parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

/// Entry point behind the `shadowint` binary. args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace shadowint::cli
