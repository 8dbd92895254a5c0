// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "shadowint/align/alignment.hpp"
#include "shadowint/core/types.hpp"
#include "shadowint/model/losses.hpp"
#include "shadowint/model/tape.hpp"

namespace shadowint {

enum class OptimizerKind { kSgd, kAdam };

std::string to_string(OptimizerKind kind);
OptimizerKind optimizer_from_string(std::string_view name);

/// Per-term switches for ablations. A disabled term is reported as 0 and
/// contributes no gradient.
struct LossToggles {
  bool l_f = true;
  bool l_lr = true;
  bool l_align = true;
  bool l_d_enc = true;
  bool l_d_dec = true;
};

struct ModelConfig {
  int d_src = 32;
  int d_trg = 16;
  int hidden = 64;
  int enc_layers = 2;
  int dec_layers = 2;
  int conv_kernel = 3;
  int dlp_channels = 32;
  int dlp_kernel = 5;
  int duration_hidden = 32;
  double lambda = 10.0;
  double focal_gamma = 2.0;
  std::optional<double> focal_alpha;  // estimated from training labels when unset
  double temperature = 1.0;
  OptimizerKind optimizer = OptimizerKind::kSgd;
  double learn_rate = 1e-3;
  double grad_clip = 0.0;  // global norm, 0 disables
  int max_steps = 500;
  int batch_size = 4;
  std::uint64_t seed = 1;
  LossToggles toggles;

  void validate() const;
};

/// Number of convolution layers in each disfluency label predictor,
/// including the width-1 output layer.
inline constexpr int kDlpLayers = 5;

template <typename Scalar>
using ParameterSet = std::map<std::string, MatrixX<Scalar>>;

/// Parameter names and shapes in creation order.
struct ParameterSpec {
  std::string name;
  Eigen::Index rows;
  Eigen::Index cols;
  Eigen::Index fan_in;  // 0 marks zero initialization
};

std::vector<ParameterSpec> parameter_specs(const ModelConfig& cfg);

/// Glorot-uniform weights, zero biases, zero fuse layer.
template <typename Scalar>
ParameterSet<Scalar> init_parameters(const ModelConfig& cfg, std::mt19937_64& rng) {
  cfg.validate();
  ParameterSet<Scalar> params;
  for (const auto& spec : parameter_specs(cfg)) {
    MatrixX<Scalar> m = MatrixX<Scalar>::Zero(spec.rows, spec.cols);
    if (spec.fan_in > 0) {
      const double limit = std::sqrt(6.0 / static_cast<double>(spec.fan_in + spec.cols));
      // Column-major fill, one draw per entry, so the stream is platform independent.
      for (Eigen::Index c = 0; c < spec.cols; ++c) {
        for (Eigen::Index r = 0; r < spec.rows; ++r) {
          const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
          m(r, c) = Scalar((2.0 * u - 1.0) * limit);
        }
      }
    }
    params.emplace(spec.name, std::move(m));
  }
  return params;
}

template <typename To, typename From>
ParameterSet<To> cast_parameters(const ParameterSet<From>& params) {
  ParameterSet<To> out;
  for (const auto& [name, m] : params) out.emplace(name, m.template cast<To>());
  return out;
}

/// A tape with the model parameters registered on it. Parameters are
/// differentiable when `trainable` is set, constants otherwise.
template <typename Scalar>
class Graph {
 public:
  Graph(const ParameterSet<Scalar>& params, const ModelConfig& cfg, bool trainable) : cfg_(cfg) {
    for (const auto& [name, m] : params) {
      vars_.emplace(name, trainable ? tape_.parameter(m) : tape_.constant(m));
    }
  }
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  nn::Tape<Scalar>& tape() { return tape_; }
  const ModelConfig& config() const { return cfg_; }

  nn::Var param(const std::string& name) const {
    auto it = vars_.find(name);
    if (it == vars_.end()) throw ValidationError("model parameter '" + name + "' is missing");
    return it->second;
  }
  const std::map<std::string, nn::Var>& params() const { return vars_; }

 private:
  nn::Tape<Scalar> tape_;
  ModelConfig cfg_;
  std::map<std::string, nn::Var> vars_;
};

namespace model_detail {

inline void require_cols(Eigen::Index cols, Eigen::Index expected, const char* what) {
  if (cols != expected) {
    throw ValidationError(std::string(what) + ": input has " + std::to_string(cols) + " columns, expected " +
                          std::to_string(expected));
  }
}

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& x, const char* what) {
  if (!x.allFinite()) throw ValidationError(std::string(what) + ": input contains non-finite values");
}

/// Residual conv + ReLU followed by residual single-head self-attention.
template <typename Scalar>
nn::Var residual_block(Graph<Scalar>& g, nn::Var h, const std::string& prefix) {
  auto& t = g.tape();
  const auto& cfg = g.config();
  nn::Var c = t.relu(t.conv1d(h, g.param(prefix + ".conv.w"), g.param(prefix + ".conv.b"), cfg.conv_kernel));
  h = t.add(h, c);
  nn::Var q = t.matmul(h, g.param(prefix + ".attn.q"));
  nn::Var k = t.matmul(h, g.param(prefix + ".attn.k"));
  nn::Var v = t.matmul(h, g.param(prefix + ".attn.v"));
  nn::Var a = t.softmax_rows(t.scale(t.matmul_nt(q, k), Scalar(1.0 / std::sqrt(static_cast<double>(cfg.hidden)))));
  return t.add(h, t.matmul(t.matmul(a, v), g.param(prefix + ".attn.o")));
}

}  // namespace model_detail

template <typename Scalar>
nn::Var encode(Graph<Scalar>& g, nn::Var f_src) {
  auto& t = g.tape();
  model_detail::require_cols(t.value(f_src).cols(), g.config().d_src, "encode");
  nn::Var h = t.affine(f_src, g.param("enc.in.w"), g.param("enc.in.b"));
  for (int l = 0; l < g.config().enc_layers; ++l) h = model_detail::residual_block(g, h, "enc.l" + std::to_string(l));
  return h;
}

template <typename Scalar>
nn::Var decode(Graph<Scalar>& g, nn::Var h_reg) {
  model_detail::require_cols(g.tape().value(h_reg).cols(), g.config().hidden, "decode");
  for (int l = 0; l < g.config().dec_layers; ++l) h_reg = model_detail::residual_block(g, h_reg, "dec.l" + std::to_string(l));
  return h_reg;
}

template <typename Scalar>
nn::Var postnet(Graph<Scalar>& g, nn::Var z) {
  auto& t = g.tape();
  model_detail::require_cols(t.value(z).cols(), g.config().hidden, "postnet");
  nn::Var y = t.affine(z, g.param("post.w"), g.param("post.b"));
  return t.add(y, t.tanh(t.conv1d(y, g.param("post.conv.w"), g.param("post.conv.b"), g.config().dlp_kernel)));
}

/// Learned projection of target features into the encoder space.
template <typename Scalar>
nn::Var project_target(Graph<Scalar>& g, nn::Var f_trg) {
  model_detail::require_cols(g.tape().value(f_trg).cols(), g.config().d_trg, "project_target");
  return g.tape().affine(f_trg, g.param("trg.proj.w"), g.param("trg.proj.b"));
}

/// Predicted log-durations, T_src x 1.
template <typename Scalar>
nn::Var predict_log_durations(Graph<Scalar>& g, nn::Var h) {
  auto& t = g.tape();
  nn::Var a = t.relu(t.affine(h, g.param("dur.w1"), g.param("dur.b1")));
  return t.affine(a, g.param("dur.w2"), g.param("dur.b2"));
}

/// Five convolution layers over time; `prefix` is "dlp_enc" or "dlp_dec".
template <typename Scalar>
nn::Var dlp_forward(Graph<Scalar>& g, nn::Var x, const std::string& prefix) {
  auto& t = g.tape();
  for (int l = 0; l + 1 < kDlpLayers; ++l) {
    const std::string p = prefix + ".c" + std::to_string(l);
    x = t.relu(t.conv1d(x, g.param(p + ".w"), g.param(p + ".b"), g.config().dlp_kernel));
  }
  return t.affine(x, g.param(prefix + ".out.w"), g.param(prefix + ".out.b"));
}

template <typename Scalar>
nn::Var fuse_dlabel(Graph<Scalar>& g, nn::Var logits_enc, nn::Var logits_dec_mapped) {
  auto& t = g.tape();
  if (t.value(logits_enc).rows() != t.value(logits_dec_mapped).rows()) {
    throw ValidationError("fuse_dlabel: " + std::to_string(t.value(logits_enc).rows()) + " encoder logits but " +
                          std::to_string(t.value(logits_dec_mapped).rows()) + " mapped decoder logits");
  }
  return t.affine(t.concat_cols(logits_enc, logits_dec_mapped), g.param("fuse.w"), g.param("fuse.b"));
}

// Matrix-level entry points. Each builds a throwaway inference graph.

template <typename Derived>
MatrixX<typename Derived::Scalar> encode(const Eigen::MatrixBase<Derived>& f_src,
                                         const ParameterSet<typename Derived::Scalar>& params, const ModelConfig& cfg) {
  using Scalar = typename Derived::Scalar;
  model_detail::require_finite(f_src, "encode");
  Graph<Scalar> g(params, cfg, false);
  return g.tape().value(encode(g, g.tape().constant(f_src)));
}

template <typename Derived>
MatrixX<typename Derived::Scalar> decode(const Eigen::MatrixBase<Derived>& h_reg,
                                         const ParameterSet<typename Derived::Scalar>& params, const ModelConfig& cfg) {
  using Scalar = typename Derived::Scalar;
  model_detail::require_finite(h_reg, "decode");
  Graph<Scalar> g(params, cfg, false);
  return g.tape().value(decode(g, g.tape().constant(h_reg)));
}

template <typename Derived>
MatrixX<typename Derived::Scalar> postnet(const Eigen::MatrixBase<Derived>& z,
                                          const ParameterSet<typename Derived::Scalar>& params, const ModelConfig& cfg) {
  using Scalar = typename Derived::Scalar;
  model_detail::require_finite(z, "postnet");
  Graph<Scalar> g(params, cfg, false);
  return g.tape().value(postnet(g, g.tape().constant(z)));
}

template <typename Derived>
VectorX<typename Derived::Scalar> dlp_forward(const Eigen::MatrixBase<Derived>& x,
                                              const ParameterSet<typename Derived::Scalar>& params,
                                              const ModelConfig& cfg, const std::string& prefix) {
  using Scalar = typename Derived::Scalar;
  model_detail::require_finite(x, "dlp_forward");
  Graph<Scalar> g(params, cfg, false);
  return g.tape().value(dlp_forward(g, g.tape().constant(x), prefix)).col(0);
}

template <typename DerivedA, typename DerivedB>
VectorX<typename DerivedA::Scalar> fuse_dlabel(const Eigen::MatrixBase<DerivedA>& logits_enc,
                                               const Eigen::MatrixBase<DerivedB>& logits_dec_mapped,
                                               const ParameterSet<typename DerivedA::Scalar>& params,
                                               const ModelConfig& cfg) {
  using Scalar = typename DerivedA::Scalar;
  if (logits_enc.size() != logits_dec_mapped.size()) {
    throw ValidationError("fuse_dlabel: " + std::to_string(logits_enc.size()) + " encoder logits but " +
                          std::to_string(logits_dec_mapped.size()) + " mapped decoder logits");
  }
  Graph<Scalar> g(params, cfg, false);
  auto& t = g.tape();
  const MatrixX<Scalar> a = logits_enc.reshaped(logits_enc.size(), 1);
  const MatrixX<Scalar> b = logits_dec_mapped.reshaped(logits_dec_mapped.size(), 1);
  return t.value(fuse_dlabel(g, t.constant(a), t.constant(b))).col(0);
}

/// One utterance prepared for training.
template <typename Scalar>
struct TrainingExample {
  std::string id;
  MatrixX<Scalar> f_src;  // L2 reading, T_src x d_src
  MatrixX<Scalar> f_trg;  // first shadowing, T_trg x d_trg
  Marks src_label;
  Marks trg_label;
};

/// Loss nodes for one utterance. Disabled terms are left unset.
struct UtteranceLossVars {
  std::optional<nn::Var> l_f, l_lr, l_forward_sum, l_bin, l_d_enc, l_d_dec;
  nn::Var total;
  HardAlignment hard;
};

/// Builds the full training graph of one utterance. The alignment losses are
/// normalized by the number of target frames.
template <typename Scalar>
UtteranceLossVars build_training_graph(Graph<Scalar>& g, const TrainingExample<Scalar>& ex, double focal_alpha) {
  auto& t = g.tape();
  const auto& cfg = g.config();
  const Eigen::Index t_src = ex.f_src.rows(), t_trg = ex.f_trg.rows();
  if (t_src == 0 || t_trg == 0) throw ValidationError("utterance '" + ex.id + "' has an empty sequence");
  if (static_cast<Eigen::Index>(ex.src_label.size()) != t_src || static_cast<Eigen::Index>(ex.trg_label.size()) != t_trg) {
    throw ValidationError("utterance '" + ex.id + "': label lengths do not match feature lengths");
  }
  if (t_trg < t_src) {
    throw InfeasibleAlignmentError("utterance '" + ex.id + "': target has " + std::to_string(t_trg) +
                                       " frames but source has " + std::to_string(t_src),
                                   ex.id);
  }
  model_detail::require_finite(ex.f_src, "training source");
  model_detail::require_finite(ex.f_trg, "training target");

  UtteranceLossVars out;
  nn::Var h = encode(g, t.constant(ex.f_src));
  nn::Var q = project_target(g, t.constant(ex.f_trg));
  nn::Var log_probs = t.log_softmax_cols(t.alignment_logits(h, q, Scalar(cfg.temperature)));
  out.hard = viterbi_from_log(t.value(log_probs));
  const Scalar per_frame = Scalar(1.0 / static_cast<double>(t_trg));

  std::vector<nn::Var> terms;
  std::vector<Scalar> weights;
  auto add_term = [&](std::optional<nn::Var>& slot, nn::Var v, Scalar w) {
    slot = v;
    terms.push_back(v);
    weights.push_back(w);
  };

  nn::Var z = decode(g, t.gather_rows(h, out.hard.assign));
  if (cfg.toggles.l_f) add_term(out.l_f, t.mean_abs_error(postnet(g, z), ex.f_trg), Scalar(1));
  if (cfg.toggles.l_lr) add_term(out.l_lr, t.duration(predict_log_durations(g, h), out.hard.durations), Scalar(1));
  if (cfg.toggles.l_align) {
    add_term(out.l_forward_sum, t.scale(t.forward_sum(log_probs), per_frame), Scalar(1));
    add_term(out.l_bin, t.scale(t.path_nll(log_probs, out.hard), per_frame), Scalar(1));
  }
  std::optional<nn::Var> dec_logits;
  if (cfg.toggles.l_d_enc || cfg.toggles.l_d_dec) dec_logits = dlp_forward(g, z, "dlp_dec");
  if (cfg.toggles.l_d_enc) {
    nn::Var mapped = t.inverse_length_regulate(*dec_logits, out.hard.durations);
    nn::Var d_src = fuse_dlabel(g, dlp_forward(g, h, "dlp_enc"), mapped);
    add_term(out.l_d_enc, t.focal(d_src, ex.src_label, cfg.focal_gamma, focal_alpha), Scalar(cfg.lambda));
  }
  if (cfg.toggles.l_d_dec) {
    add_term(out.l_d_dec, t.focal(*dec_logits, ex.trg_label, cfg.focal_gamma, focal_alpha), Scalar(cfg.lambda));
  }
  if (terms.empty()) {
    out.total = t.constant(MatrixX<Scalar>::Zero(1, 1));
    return out;
  }
  nn::Var total = t.scale(terms[0], weights[0]);
  for (std::size_t i = 1; i < terms.size(); ++i) total = t.add(total, t.scale(terms[i], weights[i]));
  out.total = total;
  return out;
}

/// D_src logits for inference in multitask mode; durations come from the
/// duration predictor.
template <typename Scalar>
VectorX<Scalar> multitask_logits(const MatrixX<Scalar>& f_src, const ParameterSet<Scalar>& params,
                                 const ModelConfig& cfg) {
  model_detail::require_finite(f_src, "predict");
  if (f_src.rows() == 0) return VectorX<Scalar>();
  Graph<Scalar> g(params, cfg, false);
  auto& t = g.tape();
  nn::Var h = encode(g, t.constant(f_src));
  const MatrixX<Scalar>& log_d = t.value(predict_log_durations(g, h));
  std::vector<int> durations(static_cast<std::size_t>(f_src.rows()));
  for (Eigen::Index i = 0; i < f_src.rows(); ++i) {
    const double d = std::round(std::exp(std::clamp(static_cast<double>(log_d(i, 0)), -10.0, 6.0)));
    durations[static_cast<std::size_t>(i)] = std::max(1, static_cast<int>(d));
  }
  nn::Var z = decode(g, t.gather_rows(h, durations_to_assign(durations)));
  nn::Var mapped = t.inverse_length_regulate(dlp_forward(g, z, "dlp_dec"), durations);
  return t.value(fuse_dlabel(g, dlp_forward(g, h, "dlp_enc"), mapped)).col(0);
}

/// Soft alignment between the encoded source and a projected reference.
template <typename Scalar>
SoftAlignment<Scalar> model_soft_alignment(const MatrixX<Scalar>& f_src, const MatrixX<Scalar>& f_ref,
                                           const ParameterSet<Scalar>& params, const ModelConfig& cfg) {
  model_detail::require_finite(f_src, "predict");
  model_detail::require_finite(f_ref, "predict reference");
  Graph<Scalar> g(params, cfg, false);
  auto& t = g.tape();
  nn::Var h = encode(g, t.constant(f_src));
  nn::Var q = project_target(g, t.constant(f_ref));
  return SoftAlignment<Scalar>{log_softmax_columns(t.value(t.alignment_logits(h, q, Scalar(cfg.temperature))))
                                   .array()
                                   .exp()
                                   .matrix()};
}

}  // namespace shadowint
