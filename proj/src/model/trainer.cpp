// SPDX-License-Identifier: Apache-2.0
#include "shadowint/model/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include "json.hpp"
#include "shadowint/core/fseq_io.hpp"
#include "shadowint/labeler/labels.hpp"
#include "shadowint/model/config_json.hpp"

namespace shadowint {

void LossBreakdown::compose(double lambda) {
  l_vc = l_f + l_lr + l_forward_sum + l_bin;
  l_all = lambda * (l_d_enc + l_d_dec) + l_vc;
}

TrainState init_train_state(const ModelConfig& cfg) {
  cfg.validate();
  TrainState state;
  state.config = cfg;
  state.rng.seed(cfg.seed);
  state.params = init_parameters<float>(cfg, state.rng);
  if (cfg.optimizer == OptimizerKind::kAdam) {
    for (const auto& [name, m] : state.params) {
      state.moments.emplace("m:" + name, MatrixX<float>::Zero(m.rows(), m.cols()));
      state.moments.emplace("v:" + name, MatrixX<float>::Zero(m.rows(), m.cols()));
    }
  }
  return state;
}

double estimate_focal_alpha(const std::vector<TrainingExample<float>>& examples) {
  std::size_t positives = 0, total = 0;
  for (const auto& ex : examples) {
    for (const Marks* m : {&ex.src_label, &ex.trg_label}) {
      positives += static_cast<std::size_t>(std::count(m->begin(), m->end(), 1));
      total += m->size();
    }
  }
  if (total == 0) return 0.5;
  return std::clamp(1.0 - static_cast<double>(positives) / static_cast<double>(total), 0.01, 0.99);
}

TrainingExample<float> make_training_example(const UtteranceTriplet& triplet, const DLabel& src_label,
                                             const DLabel& trg_label) {
  if (src_label.size() != static_cast<std::size_t>(triplet.l2_read.length()) ||
      trg_label.size() != static_cast<std::size_t>(triplet.l1_shadow.length())) {
    throw ValidationError("utterance '" + triplet.id + "': label lengths do not match its features");
  }
  return {triplet.id, triplet.l2_read.frames.cast<float>(), triplet.l1_shadow.frames.cast<float>(), src_label.marks,
          trg_label.marks};
}

std::vector<std::size_t> sample_batch(TrainState& state, std::size_t n_examples) {
  if (n_examples == 0) throw ValidationError("sample_batch: no training examples");
  std::vector<std::size_t> out(static_cast<std::size_t>(state.config.batch_size));
  for (auto& i : out) i = static_cast<std::size_t>(state.rng() % n_examples);
  return out;
}

namespace {

double resolved_alpha(const ModelConfig& cfg) {
  if (!cfg.focal_alpha) throw ValidationError("focal_alpha is unresolved; estimate it from the training labels first");
  return *cfg.focal_alpha;
}

void apply_update(TrainState& state, ParameterSet<float>& grads) {
  const auto& cfg = state.config;
  float scale = 1.0f;
  if (cfg.grad_clip > 0.0) {
    double sq = 0.0;
    for (const auto& [name, g] : grads) sq += g.cast<double>().squaredNorm();
    const double norm = std::sqrt(sq);
    if (norm > cfg.grad_clip) scale = static_cast<float>(cfg.grad_clip / norm);
  }
  const auto lr = static_cast<float>(cfg.learn_rate);
  if (cfg.optimizer == OptimizerKind::kSgd) {
    for (auto& [name, p] : state.params) p -= (lr * scale) * grads.at(name);
    return;
  }
  constexpr float b1 = 0.9f, b2 = 0.999f, eps = 1e-8f;
  const auto t = static_cast<double>(state.step + 1);
  const auto c1 = static_cast<float>(1.0 - std::pow(0.9, t));
  const auto c2 = static_cast<float>(1.0 - std::pow(0.999, t));
  for (auto& [name, p] : state.params) {
    const MatrixX<float> g = grads.at(name) * scale;
    auto& m = state.moments.at("m:" + name);
    auto& v = state.moments.at("v:" + name);
    m = b1 * m + (1.0f - b1) * g;
    v = b2 * v + (1.0f - b2) * g.cwiseProduct(g);
    p.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  }
}

}  // namespace

LossBreakdown training_step(TrainState& state, const std::vector<const TrainingExample<float>*>& batch) {
  if (batch.empty()) throw ValidationError("training_step: empty batch");
  const auto& cfg = state.config;
  const double alpha = resolved_alpha(cfg);
  ParameterSet<float> grads;
  for (const auto& [name, p] : state.params) grads.emplace(name, MatrixX<float>::Zero(p.rows(), p.cols()));

  LossBreakdown sum;
  const float weight = 1.0f / static_cast<float>(batch.size());
  for (const auto* ex : batch) {
    Graph<float> g(state.params, cfg, true);
    auto vars = build_training_graph(g, *ex, alpha);
    auto& t = g.tape();
    auto value = [&](const std::optional<nn::Var>& v) { return v ? static_cast<double>(t.scalar(*v)) : 0.0; };
    sum.l_f += value(vars.l_f);
    sum.l_lr += value(vars.l_lr);
    sum.l_forward_sum += value(vars.l_forward_sum);
    sum.l_bin += value(vars.l_bin);
    sum.l_d_enc += value(vars.l_d_enc);
    sum.l_d_dec += value(vars.l_d_dec);
    if (!t.requires_grad(vars.total)) continue;
    t.backward(vars.total);
    for (const auto& [name, v] : g.params()) grads.at(name) += weight * t.grad(v);
  }
  const double n = static_cast<double>(batch.size());
  LossBreakdown out;
  out.l_f = sum.l_f / n;
  out.l_lr = sum.l_lr / n;
  out.l_forward_sum = sum.l_forward_sum / n;
  out.l_bin = sum.l_bin / n;
  out.l_d_enc = sum.l_d_enc / n;
  out.l_d_dec = sum.l_d_dec / n;
  out.compose(cfg.lambda);
  if (!std::isfinite(out.l_all)) {
    throw Error("training diverged at step " + std::to_string(state.step) + " (non-finite loss)");
  }

  apply_update(state, grads);
  ++state.step;
  return out;
}

TrainSummary train(TrainState& state, std::vector<TrainingExample<float>> examples,
                   const std::function<void(const TrainLogEntry&)>& on_step) {
  TrainSummary summary;
  std::vector<TrainingExample<float>> usable;
  for (auto& ex : examples) {
    if (ex.f_trg.rows() < ex.f_src.rows()) {
      summary.skipped_ids.push_back(ex.id);
    } else {
      usable.push_back(std::move(ex));
    }
  }
  if (!state.config.focal_alpha) state.config.focal_alpha = estimate_focal_alpha(usable);
  const auto max_steps = static_cast<std::uint64_t>(state.config.max_steps);
  if (state.step >= max_steps) return summary;
  if (usable.empty()) throw ValidationError("no trainable utterances (all alignments infeasible or corpus empty)");

  const auto start = std::chrono::steady_clock::now();
  while (state.step < max_steps) {
    std::vector<const TrainingExample<float>*> batch;
    for (auto i : sample_batch(state, usable.size())) batch.push_back(&usable[i]);
    TrainLogEntry entry;
    entry.step = state.step;
    entry.losses = training_step(state, batch);
    entry.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (on_step) on_step(entry);
    summary.log.push_back(entry);
  }
  return summary;
}

std::string train_log_line(const TrainLogEntry& entry) {
  nlohmann::ordered_json j;
  j["step"] = entry.step;
  j["wall_time"] = entry.wall_time;
  j["l_f"] = entry.losses.l_f;
  j["l_lr"] = entry.losses.l_lr;
  j["l_forward_sum"] = entry.losses.l_forward_sum;
  j["l_bin"] = entry.losses.l_bin;
  j["l_d_enc"] = entry.losses.l_d_enc;
  j["l_d_dec"] = entry.losses.l_d_dec;
  j["l_vc"] = entry.losses.l_vc;
  j["l_all"] = entry.losses.l_all;
  return j.dump();
}

// Checkpoint container.

namespace {

constexpr char kCheckpointMagic[4] = {'V', 'C', 'K', 'P'};
constexpr std::uint32_t kCheckpointVersion = 1;

void put_bytes(std::vector<std::uint8_t>& out, const std::string& s) { out.insert(out.end(), s.begin(), s.end()); }

void put_tensor(std::vector<std::uint8_t>& out, const std::string& name, const MatrixX<float>& m) {
  put_u32(out, static_cast<std::uint32_t>(name.size()));
  put_bytes(out, name);
  put_u32(out, static_cast<std::uint32_t>(m.rows()));
  put_u32(out, static_cast<std::uint32_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) put_f32(out, m(r, c));
  }
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint32_t u32() {
    need(4);
    const auto v = get_u32(bytes_, pos_);
    pos_ += 4;
    return v;
  }
  float f32() {
    need(4);
    const auto v = get_f32(bytes_, pos_);
    pos_ += 4;
    return v;
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s(bytes_.begin() + static_cast<std::ptrdiff_t>(pos_), bytes_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw FormatError("checkpoint is truncated");
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const TrainState& state) {
  nlohmann::ordered_json header;
  header["config"] = model_config_to_json(state.config);
  header["step"] = state.step;
  std::ostringstream rng;
  rng << state.rng;
  header["rng"] = rng.str();
  const std::string text = header.dump();

  std::vector<std::uint8_t> out(std::begin(kCheckpointMagic), std::end(kCheckpointMagic));
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  put_bytes(out, text);
  put_u32(out, static_cast<std::uint32_t>(state.params.size() + state.moments.size()));
  for (const auto& [name, m] : state.params) put_tensor(out, "param/" + name, m);
  for (const auto& [name, m] : state.moments) put_tensor(out, "moment/" + name, m);
  return out;
}

TrainState decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  Reader in(bytes);
  if (in.str(4) != std::string(kCheckpointMagic, 4)) throw FormatError("not a checkpoint (bad magic)");
  const auto version = in.u32();
  if (version != kCheckpointVersion) throw FormatError("unsupported checkpoint version " + std::to_string(version));
  TrainState state;
  try {
    const auto header = nlohmann::json::parse(in.str(in.u32()));
    state.config = model_config_from_json(header.at("config"));
    state.step = header.at("step").get<std::uint64_t>();
    std::istringstream rng(header.at("rng").get<std::string>());
    rng >> state.rng;
    if (!rng) throw FormatError("checkpoint generator state is malformed");
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint header: ") + e.what());
  }
  const auto count = in.u32();
  for (std::uint32_t k = 0; k < count; ++k) {
    const std::string name = in.str(in.u32());
    const auto rows = in.u32(), cols = in.u32();
    MatrixX<float> m(rows, cols);
    for (std::uint32_t r = 0; r < rows; ++r) {
      for (std::uint32_t c = 0; c < cols; ++c) m(r, c) = in.f32();
    }
    if (name.rfind("param/", 0) == 0) {
      state.params.emplace(name.substr(6), std::move(m));
    } else if (name.rfind("moment/", 0) == 0) {
      state.moments.emplace(name.substr(7), std::move(m));
    } else {
      throw FormatError("checkpoint tensor '" + name + "' has an unknown namespace");
    }
  }
  if (!in.done()) throw FormatError("checkpoint has trailing bytes");
  for (const auto& spec : parameter_specs(state.config)) {
    auto it = state.params.find(spec.name);
    if (it == state.params.end()) throw FormatError("checkpoint is missing parameter '" + spec.name + "'");
    if (it->second.rows() != spec.rows || it->second.cols() != spec.cols) {
      throw FormatError("checkpoint parameter '" + spec.name + "' has the wrong shape");
    }
  }
  return state;
}

void save_checkpoint(const std::filesystem::path& path, const TrainState& state) {
  write_file_bytes(path, encode_checkpoint(state));
}

TrainState load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_file_bytes(path)); }

// Inference.

std::string to_string(PredictMode mode) { return mode == PredictMode::kAlignment ? "alignment" : "multitask"; }

PredictMode predict_mode_from_string(std::string_view name) {
  if (name == "multitask") return PredictMode::kMultitask;
  if (name == "alignment") return PredictMode::kAlignment;
  throw ValidationError("unknown prediction mode '" + std::string(name) + "' (expected multitask or alignment)");
}

Prediction predict_unintelligibility(const FrameSequence& l2_read, const TrainState& state,
                                     const PredictOptions& options, const std::vector<WordTiming>& timings,
                                     const FrameSequence* reference) {
  l2_read.validate();
  const MatrixX<float> src = l2_read.frames.cast<float>();
  Prediction out;
  out.frames.hop_ms = l2_read.hop_ms;
  if (options.mode == PredictMode::kMultitask) {
    const VectorX<float> logits = multitask_logits(src, state.params, state.config);
    out.frames.marks.resize(static_cast<std::size_t>(logits.size()));
    for (Eigen::Index i = 0; i < logits.size(); ++i) out.frames.marks[static_cast<std::size_t>(i)] = logits(i) > 0.0f;
  } else {
    if (reference == nullptr) throw ValidationError("alignment mode requires a reference target sequence");
    reference->validate();
    const auto soft = model_soft_alignment<float>(src, reference->frames.cast<float>(), state.params, state.config);
    out.frames.marks = focus_rate(soft, options.tau);
  }
  out.words = dlabel_frames_to_words(out.frames, timings, options.rho_word);
  return out;
}

}  // namespace shadowint
