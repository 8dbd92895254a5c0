// SPDX-License-Identifier: Apache-2.0
#include "shadowint/core/synthetic.hpp"

#include <cmath>
#include <random>

namespace shadowint {

namespace {

using Rng = std::mt19937_64;
using Vec = Eigen::VectorXd;

Vec gaussian(Rng& rng, int dim, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vec v(dim);
  for (int k = 0; k < dim; ++k) v[k] = scale * normal(rng);
  return v;
}

int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

double uniform_real(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

struct Lexicon {
  std::vector<std::pair<Vec, Vec>> anchors;
  Vec accent;
  Eigen::MatrixXd embedding;  // d_src x d_trg
};

Lexicon build_lexicon(const GeneratorConfig& cfg) {
  Rng rng(cfg.lexicon_seed);
  Lexicon lex;
  for (int w = 0; w < cfg.vocab_size; ++w) {
    Vec a = gaussian(rng, cfg.d_trg);
    Vec b = gaussian(rng, cfg.d_trg);
    lex.anchors.emplace_back(std::move(a), std::move(b));
  }
  lex.accent = gaussian(rng, cfg.d_trg);
  lex.accent *= cfg.accent_magnitude / std::max(lex.accent.norm(), 1e-12);
  lex.embedding.resize(cfg.d_src, cfg.d_trg);
  const double scale = 1.0 / std::sqrt(static_cast<double>(cfg.d_trg));
  for (int r = 0; r < cfg.d_src; ++r) lex.embedding.row(r) = gaussian(rng, cfg.d_trg, scale).transpose();
  return lex;
}

Vec glide(const std::pair<Vec, Vec>& anchors, int k, int length) {
  const double alpha = length == 1 ? 0.0 : static_cast<double>(k) / (length - 1);
  return (1.0 - alpha) * anchors.first + alpha * anchors.second;
}

FrameSequence to_sequence(const std::vector<Vec>& rows, FeatureKind kind, int hop_ms) {
  FrameSequence seq;
  seq.kind = kind;
  seq.hop_ms = hop_ms;
  seq.frames.resize(static_cast<Eigen::Index>(rows.size()), rows.front().size());
  for (std::size_t t = 0; t < rows.size(); ++t) {
    seq.frames.row(static_cast<Eigen::Index>(t)) = rows[t].cast<float>().transpose();
  }
  return seq;
}

}  // namespace

void GeneratorConfig::validate() const {
  if (min_words < 1 || max_words < min_words) throw ValidationError("invalid word count range");
  if (min_frames_per_word < 1 || max_frames_per_word < min_frames_per_word) {
    throw ValidationError("invalid frames-per-word range");
  }
  if (d_src < 1 || d_trg < 1) throw ValidationError("feature dims must be positive");
  if (!(disfluency_rate >= 0.0 && disfluency_rate <= 1.0)) {
    throw ValidationError("disfluency rate must lie in [0, 1]");
  }
  if (!(corruption_magnitude >= 0.0)) throw ValidationError("corruption magnitude must be non-negative");
  if (!(min_warp >= 1.0 && max_warp >= min_warp)) {
    throw ValidationError("warp range must satisfy 1 <= min_warp <= max_warp");
  }
  if (!(read_noise >= 0.0 && shadow_noise >= 0.0 && accent_magnitude >= 0.0)) {
    throw ValidationError("noise and accent magnitudes must be non-negative");
  }
  if (vocab_size < 1) throw ValidationError("vocabulary must be non-empty");
  if (hop_ms <= 0) throw ValidationError("hop_ms must be positive");
}

UtteranceTriplet generate_synthetic_triplet(std::uint64_t seed, const GeneratorConfig& cfg) {
  cfg.validate();
  const Lexicon lex = build_lexicon(cfg);
  Rng rng(seed);

  UtteranceTriplet t;
  t.id = "syn_" + std::to_string(seed);

  std::vector<Vec> read_rows;
  std::vector<Vec> script_rows;
  std::vector<Vec> shadow_rows;
  std::vector<bool> corrupted_frames;

  const int n_words = uniform_int(rng, cfg.min_words, cfg.max_words);
  for (int w = 0; w < n_words; ++w) {
    const int type = uniform_int(rng, 0, cfg.vocab_size - 1);
    const int length = uniform_int(rng, cfg.min_frames_per_word, cfg.max_frames_per_word);
    const bool corrupted = uniform_real(rng, 0.0, 1.0) < cfg.disfluency_rate;
    const auto& anchors = lex.anchors[static_cast<std::size_t>(type)];

    const int start = static_cast<int>(read_rows.size());
    for (int k = 0; k < length; ++k) {
      Vec x = glide(anchors, k, length) + gaussian(rng, cfg.d_trg, cfg.read_noise);
      if (corrupted) x += lex.accent;
      read_rows.push_back(std::move(x));
      corrupted_frames.push_back(corrupted);
    }
    t.transcript.push_back("w" + std::to_string(type));
    t.word_timings.push_back({t.transcript.back(), start, start + length});

    const double warp = uniform_real(rng, cfg.min_warp, cfg.max_warp);
    const int shadow_length = std::max(length, static_cast<int>(std::lround(length * warp)));
    for (int k = 0; k < shadow_length; ++k) {
      Vec y = glide(anchors, k, shadow_length) + gaussian(rng, cfg.d_trg, cfg.shadow_noise);
      script_rows.push_back(y);
      if (corrupted) {
        shadow_rows.push_back(gaussian(rng, cfg.d_trg, cfg.corruption_magnitude));
      } else {
        shadow_rows.push_back(std::move(y));
      }
    }
  }

  t.l2_read_align = to_sequence(read_rows, FeatureKind::kTargetPpg, cfg.hop_ms);
  std::vector<Vec> s3r_rows;
  s3r_rows.reserve(read_rows.size());
  for (const auto& x : read_rows) s3r_rows.push_back(lex.embedding * x);
  t.l2_read = to_sequence(s3r_rows, FeatureKind::kSourceS3r, cfg.hop_ms);
  t.l1_script_shadow = to_sequence(script_rows, FeatureKind::kTargetPpg, cfg.hop_ms);
  t.l1_shadow = to_sequence(shadow_rows, FeatureKind::kTargetPpg, cfg.hop_ms);

  DLabel gold;
  gold.hop_ms = cfg.hop_ms;
  gold.marks.reserve(corrupted_frames.size());
  for (bool c : corrupted_frames) gold.marks.push_back(c ? 1 : 0);
  t.gold_dlabel = std::move(gold);
  return t;
}

}  // namespace shadowint
