// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "shadowint/core/types.hpp"
#include "shadowint/model/model.hpp"

namespace shadowint {

/// Batch-mean loss terms of one step. The composites are computed from the
/// stored components, so the identities hold exactly.
struct LossBreakdown {
  double l_f = 0.0;
  double l_lr = 0.0;
  double l_forward_sum = 0.0;
  double l_bin = 0.0;
  double l_d_enc = 0.0;
  double l_d_dec = 0.0;
  double l_vc = 0.0;
  double l_all = 0.0;

  /// Fills l_vc and l_all from the components.
  void compose(double lambda);
};

struct TrainState {
  ModelConfig config;
  ParameterSet<float> params;
  ParameterSet<float> moments;  // Adam first and second moments, empty for SGD
  std::uint64_t step = 0;
  std::mt19937_64 rng;
};

/// Fresh state with parameters drawn from config.seed. focal_alpha must be
/// resolved before training.
TrainState init_train_state(const ModelConfig& cfg);

/// 1 - positive prior over all source and target frame labels, clamped to
/// [0.01, 0.99]. Returns 0.5 when there are no frames.
double estimate_focal_alpha(const std::vector<TrainingExample<float>>& examples);

/// Builds training examples from a triplet and its derived labels.
TrainingExample<float> make_training_example(const UtteranceTriplet& triplet, const DLabel& src_label,
                                             const DLabel& trg_label);

/// One gradient update on `batch`. Throws InfeasibleAlignmentError naming
/// the utterance when a target is shorter than its source.
LossBreakdown training_step(TrainState& state, const std::vector<const TrainingExample<float>*>& batch);

/// Draws batch_size example indices from the state's generator.
std::vector<std::size_t> sample_batch(TrainState& state, std::size_t n_examples);

struct TrainLogEntry {
  std::uint64_t step = 0;
  double wall_time = 0.0;
  LossBreakdown losses;
};

struct TrainSummary {
  std::vector<TrainLogEntry> log;
  std::vector<std::string> skipped_ids;
};

/// Runs until state.step reaches config.max_steps. Examples whose alignment
/// is infeasible are dropped with their ids reported. `on_step` sees every
/// entry as it is produced.
TrainSummary train(TrainState& state, std::vector<TrainingExample<float>> examples,
                   const std::function<void(const TrainLogEntry&)>& on_step = {});

std::string train_log_line(const TrainLogEntry& entry);

/// Binary checkpoint: magic, version, config JSON (with step and generator
/// state), then named float32 tensors.
std::vector<std::uint8_t> encode_checkpoint(const TrainState& state);
TrainState decode_checkpoint(const std::vector<std::uint8_t>& bytes);
void save_checkpoint(const std::filesystem::path& path, const TrainState& state);
TrainState load_checkpoint(const std::filesystem::path& path);

enum class PredictMode { kMultitask, kAlignment };

std::string to_string(PredictMode mode);
PredictMode predict_mode_from_string(std::string_view name);

struct PredictOptions {
  PredictMode mode = PredictMode::kMultitask;
  double tau = -0.6931471805599453;  // ln 0.5
  double rho_word = 0.5;
};

struct Prediction {
  DLabel frames;
  Marks words;
};

/// Frame marks from the trained model. Alignment mode needs `reference`
/// (the rater's shadowing features).
Prediction predict_unintelligibility(const FrameSequence& l2_read, const TrainState& state,
                                     const PredictOptions& options, const std::vector<WordTiming>& timings,
                                     const FrameSequence* reference = nullptr);

}  // namespace shadowint
