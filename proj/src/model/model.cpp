// SPDX-License-Identifier: Apache-2.0
#include "shadowint/model/model.hpp"

#include <cmath>

#include "shadowint/model/config_json.hpp"

namespace shadowint {

std::string to_string(OptimizerKind kind) { return kind == OptimizerKind::kAdam ? "adam" : "sgd"; }

OptimizerKind optimizer_from_string(std::string_view name) {
  if (name == "sgd") return OptimizerKind::kSgd;
  if (name == "adam") return OptimizerKind::kAdam;
  throw ValidationError("unknown optimizer '" + std::string(name) + "' (expected sgd or adam)");
}

void ModelConfig::validate() const {
  auto positive = [](int v, const char* name) {
    if (v <= 0) throw ValidationError(std::string("model config: ") + name + " must be positive");
  };
  positive(d_src, "d_src");
  positive(d_trg, "d_trg");
  positive(hidden, "hidden");
  positive(enc_layers, "enc_layers");
  positive(dec_layers, "dec_layers");
  positive(dlp_channels, "dlp_channels");
  positive(duration_hidden, "duration_hidden");
  positive(batch_size, "batch_size");
  if (conv_kernel % 2 == 0 || conv_kernel <= 0) throw ValidationError("model config: conv_kernel must be odd");
  if (dlp_kernel % 2 == 0 || dlp_kernel <= 0) throw ValidationError("model config: dlp_kernel must be odd");
  if (!(lambda >= 0.0)) throw ValidationError("model config: lambda must be non-negative");
  if (!(focal_gamma >= 0.0)) throw ValidationError("model config: focal_gamma must be non-negative");
  if (focal_alpha && !(*focal_alpha > 0.0 && *focal_alpha < 1.0)) {
    throw ValidationError("model config: focal_alpha must lie in (0, 1)");
  }
  if (!(temperature > 0.0)) throw ValidationError("model config: temperature must be positive");
  if (!(learn_rate > 0.0)) throw ValidationError("model config: learn_rate must be positive");
  if (!(grad_clip >= 0.0)) throw ValidationError("model config: grad_clip must be non-negative");
  if (max_steps < 0) throw ValidationError("model config: max_steps must be non-negative");
}

std::vector<ParameterSpec> parameter_specs(const ModelConfig& cfg) {
  const Eigen::Index h = cfg.hidden;
  std::vector<ParameterSpec> specs;
  auto linear = [&](const std::string& name, Eigen::Index in, Eigen::Index out) {
    specs.push_back({name + ".w", in, out, in});
    specs.push_back({name + ".b", 1, out, 0});
  };
  auto block = [&](const std::string& prefix) {
    linear(prefix + ".conv", cfg.conv_kernel * h, h);
    for (const char* m : {".attn.q", ".attn.k", ".attn.v", ".attn.o"}) specs.push_back({prefix + m, h, h, h});
  };
  linear("enc.in", cfg.d_src, h);
  for (int l = 0; l < cfg.enc_layers; ++l) block("enc.l" + std::to_string(l));
  linear("trg.proj", cfg.d_trg, h);
  for (int l = 0; l < cfg.dec_layers; ++l) block("dec.l" + std::to_string(l));
  linear("post", h, cfg.d_trg);
  linear("post.conv", cfg.dlp_kernel * cfg.d_trg, cfg.d_trg);
  specs.push_back({"dur.w1", h, cfg.duration_hidden, h});
  specs.push_back({"dur.b1", 1, cfg.duration_hidden, 0});
  specs.push_back({"dur.w2", cfg.duration_hidden, 1, cfg.duration_hidden});
  specs.push_back({"dur.b2", 1, 1, 0});
  for (const char* prefix : {"dlp_enc", "dlp_dec"}) {
    Eigen::Index in = h;
    for (int l = 0; l + 1 < kDlpLayers; ++l) {
      linear(std::string(prefix) + ".c" + std::to_string(l), cfg.dlp_kernel * in, cfg.dlp_channels);
      in = cfg.dlp_channels;
    }
    linear(std::string(prefix) + ".out", in, 1);
  }
  specs.push_back({"fuse.w", 2, 1, 0});
  specs.push_back({"fuse.b", 1, 1, 0});
  return specs;
}

nlohmann::ordered_json model_config_to_json(const ModelConfig& cfg) {
  nlohmann::ordered_json j;
  j["d_src"] = cfg.d_src;
  j["d_trg"] = cfg.d_trg;
  j["hidden"] = cfg.hidden;
  j["enc_layers"] = cfg.enc_layers;
  j["dec_layers"] = cfg.dec_layers;
  j["conv_kernel"] = cfg.conv_kernel;
  j["dlp_channels"] = cfg.dlp_channels;
  j["dlp_kernel"] = cfg.dlp_kernel;
  j["duration_hidden"] = cfg.duration_hidden;
  j["lambda"] = cfg.lambda;
  j["focal_gamma"] = cfg.focal_gamma;
  j["focal_alpha"] = cfg.focal_alpha ? nlohmann::ordered_json(*cfg.focal_alpha) : nlohmann::ordered_json(nullptr);
  j["temperature"] = cfg.temperature;
  j["optimizer"] = to_string(cfg.optimizer);
  j["learn_rate"] = cfg.learn_rate;
  j["grad_clip"] = cfg.grad_clip;
  j["max_steps"] = cfg.max_steps;
  j["batch_size"] = cfg.batch_size;
  j["seed"] = cfg.seed;
  j["toggles"] = {{"l_f", cfg.toggles.l_f},
                  {"l_lr", cfg.toggles.l_lr},
                  {"l_align", cfg.toggles.l_align},
                  {"l_d_enc", cfg.toggles.l_d_enc},
                  {"l_d_dec", cfg.toggles.l_d_dec}};
  return j;
}

ModelConfig model_config_from_json(const nlohmann::json& j, ModelConfig cfg) {
  if (!j.is_object()) throw ParseError("model config must be a JSON object");
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "d_src") cfg.d_src = value.get<int>();
      else if (key == "d_trg") cfg.d_trg = value.get<int>();
      else if (key == "hidden") cfg.hidden = value.get<int>();
      else if (key == "enc_layers") cfg.enc_layers = value.get<int>();
      else if (key == "dec_layers") cfg.dec_layers = value.get<int>();
      else if (key == "conv_kernel") cfg.conv_kernel = value.get<int>();
      else if (key == "dlp_channels") cfg.dlp_channels = value.get<int>();
      else if (key == "dlp_kernel") cfg.dlp_kernel = value.get<int>();
      else if (key == "duration_hidden") cfg.duration_hidden = value.get<int>();
      else if (key == "lambda") cfg.lambda = value.get<double>();
      else if (key == "focal_gamma") cfg.focal_gamma = value.get<double>();
      else if (key == "focal_alpha") cfg.focal_alpha = value.is_null() ? std::nullopt : std::optional<double>(value.get<double>());
      else if (key == "temperature") cfg.temperature = value.get<double>();
      else if (key == "optimizer") cfg.optimizer = optimizer_from_string(value.get<std::string>());
      else if (key == "learn_rate") cfg.learn_rate = value.get<double>();
      else if (key == "grad_clip") cfg.grad_clip = value.get<double>();
      else if (key == "max_steps") cfg.max_steps = value.get<int>();
      else if (key == "batch_size") cfg.batch_size = value.get<int>();
      else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
      else if (key == "toggles") {
        for (const auto& [name, flag] : value.items()) {
          if (name == "l_f") cfg.toggles.l_f = flag.get<bool>();
          else if (name == "l_lr") cfg.toggles.l_lr = flag.get<bool>();
          else if (name == "l_align") cfg.toggles.l_align = flag.get<bool>();
          else if (name == "l_d_enc") cfg.toggles.l_d_enc = flag.get<bool>();
          else if (name == "l_d_dec") cfg.toggles.l_d_dec = flag.get<bool>();
          else throw ParseError("model config: unknown toggle '" + name + "'");
        }
      } else {
        throw ParseError("model config: unknown key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("model config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

}  // namespace shadowint
