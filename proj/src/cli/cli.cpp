// SPDX-License-Identifier: Apache-2.0
#include "shadowint/cli/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <ostream>
#include <thread>

#include "CLI11.hpp"
#include "shadowint/core/fseq_io.hpp"
#include "shadowint/core/label_io.hpp"
#include "shadowint/core/manifest.hpp"
#include "shadowint/eval/metrics.hpp"
#include "shadowint/model/config_json.hpp"

namespace shadowint::cli {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

// Configuration.

void RunConfig::validate() const {
  if (n < 0) throw ValidationError("n must be non-negative");
  if (jobs < 1) throw ValidationError("jobs must be at least 1");
  if (!(rho_word > 0.0 && rho_word <= 1.0)) throw ValidationError("rho_word must lie in (0, 1]");
  if (std::isnan(tau)) throw ValidationError("tau must not be NaN");
  generator.validate();
  threshold.validate();
  model.validate();
}

namespace {

ordered_json number_or_infinity(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

double parse_real(const nlohmann::json& v) {
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    throw ParseError("expected a number, got '" + s + "'");
  }
  return v.get<double>();
}

ordered_json generator_to_json(const GeneratorConfig& g) {
  ordered_json j;
  j["min_words"] = g.min_words;
  j["max_words"] = g.max_words;
  j["min_frames_per_word"] = g.min_frames_per_word;
  j["max_frames_per_word"] = g.max_frames_per_word;
  j["d_src"] = g.d_src;
  j["d_trg"] = g.d_trg;
  j["disfluency_rate"] = g.disfluency_rate;
  j["corruption_magnitude"] = g.corruption_magnitude;
  j["min_warp"] = g.min_warp;
  j["max_warp"] = g.max_warp;
  j["read_noise"] = g.read_noise;
  j["shadow_noise"] = g.shadow_noise;
  j["accent_magnitude"] = g.accent_magnitude;
  j["vocab_size"] = g.vocab_size;
  j["lexicon_seed"] = g.lexicon_seed;
  j["hop_ms"] = g.hop_ms;
  return j;
}

void generator_from_json(const nlohmann::json& j, GeneratorConfig& g) {
  for (const auto& [key, v] : j.items()) {
    if (key == "min_words") g.min_words = v.get<int>();
    else if (key == "max_words") g.max_words = v.get<int>();
    else if (key == "min_frames_per_word") g.min_frames_per_word = v.get<int>();
    else if (key == "max_frames_per_word") g.max_frames_per_word = v.get<int>();
    else if (key == "d_src") g.d_src = v.get<int>();
    else if (key == "d_trg") g.d_trg = v.get<int>();
    else if (key == "disfluency_rate") g.disfluency_rate = v.get<double>();
    else if (key == "corruption_magnitude") g.corruption_magnitude = v.get<double>();
    else if (key == "min_warp") g.min_warp = v.get<double>();
    else if (key == "max_warp") g.max_warp = v.get<double>();
    else if (key == "read_noise") g.read_noise = v.get<double>();
    else if (key == "shadow_noise") g.shadow_noise = v.get<double>();
    else if (key == "accent_magnitude") g.accent_magnitude = v.get<double>();
    else if (key == "vocab_size") g.vocab_size = v.get<int>();
    else if (key == "lexicon_seed") g.lexicon_seed = v.get<std::uint64_t>();
    else if (key == "hop_ms") g.hop_ms = v.get<int>();
    else throw ParseError("generator: unknown key '" + key + "'");
  }
}

}  // namespace

ordered_json run_config_to_json(const RunConfig& cfg) {
  ordered_json j;
  j["paths"] = {{"corpus_root", cfg.corpus_root.string()}, {"output_root", cfg.output_root.string()}};
  j["n"] = cfg.n;
  j["seed"] = cfg.seed;
  j["generator"] = generator_to_json(cfg.generator);
  j["labeler"] = {{"metric", to_string(cfg.metric)},
                  {"threshold_mode", to_string(cfg.threshold.mode)},
                  {"threshold_value", cfg.threshold.value},
                  {"smooth_window", cfg.threshold.smooth_window}};
  j["model"] = model_config_to_json(cfg.model);
  j["predict"] = {{"mode", to_string(cfg.mode)}, {"tau", number_or_infinity(cfg.tau)}, {"rho_word", cfg.rho_word}};
  j["split"] = cfg.split ? ordered_json(to_string(*cfg.split)) : ordered_json("all");
  j["jobs"] = cfg.jobs;
  return j;
}

RunConfig run_config_from_json(const nlohmann::json& j, RunConfig cfg) {
  if (!j.is_object()) throw ParseError("config must be a JSON object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "paths") {
        for (const auto& [k, p] : v.items()) {
          if (k == "corpus_root") cfg.corpus_root = p.get<std::string>();
          else if (k == "output_root") cfg.output_root = p.get<std::string>();
          else throw ParseError("paths: unknown key '" + k + "'");
        }
      } else if (key == "n") {
        cfg.n = v.get<int>();
      } else if (key == "seed") {
        cfg.seed = v.get<std::uint64_t>();
      } else if (key == "generator") {
        generator_from_json(v, cfg.generator);
      } else if (key == "labeler") {
        for (const auto& [k, x] : v.items()) {
          if (k == "metric") cfg.metric = local_metric_from_string(x.get<std::string>());
          else if (k == "threshold_mode") cfg.threshold.mode = threshold_mode_from_string(x.get<std::string>());
          else if (k == "threshold_value") cfg.threshold.value = x.get<double>();
          else if (k == "smooth_window") cfg.threshold.smooth_window = x.get<int>();
          else throw ParseError("labeler: unknown key '" + k + "'");
        }
      } else if (key == "model") {
        cfg.model = model_config_from_json(v, cfg.model);
      } else if (key == "predict") {
        for (const auto& [k, x] : v.items()) {
          if (k == "mode") cfg.mode = predict_mode_from_string(x.get<std::string>());
          else if (k == "tau") cfg.tau = parse_real(x);
          else if (k == "rho_word") cfg.rho_word = x.get<double>();
          else throw ParseError("predict: unknown key '" + k + "'");
        }
      } else if (key == "split") {
        const auto s = v.get<std::string>();
        cfg.split = s == "all" ? std::nullopt : std::optional<Split>(split_from_string(s));
      } else if (key == "jobs") {
        cfg.jobs = v.get<int>();
      } else {
        throw ParseError("config: unknown key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t config_hash(const RunConfig& cfg) { return fnv1a64(run_config_to_json(cfg).dump()); }

std::vector<Split> assign_splits(const std::vector<std::string>& ids) {
  const std::size_t n = ids.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto ha = fnv1a64(ids[a]), hb = fnv1a64(ids[b]);
    return ha != hb ? ha < hb : ids[a] < ids[b];
  });
  const std::size_t n_train = n * 8 / 10, n_dev = n / 10;
  std::vector<Split> out(n);
  for (std::size_t rank = 0; rank < n; ++rank) {
    out[order[rank]] = rank < n_train ? Split::kTrain : rank < n_train + n_dev ? Split::kDev : Split::kTest;
  }
  return out;
}

std::vector<std::optional<std::string>> parallel_for(std::size_t n, int jobs,
                                                     const std::function<void(std::size_t)>& fn) {
  std::vector<std::optional<std::string>> errors(n);
  auto run_one = [&](std::size_t i) {
    try {
      fn(i);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  };
  const auto workers = static_cast<std::size_t>(std::max(1, jobs));
  if (workers == 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) run_one(i);
    return errors;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < std::min(workers, n); ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) run_one(i);
    });
  }
  for (auto& t : pool) t.join();
  return errors;
}

// Commands.

namespace {

struct Context {
  RunConfig cfg;
  std::ostream& out;
  std::ostream& err;
};

fs::path manifest_path(const RunConfig& cfg) { return cfg.corpus_root / "manifest.jsonl"; }
fs::path labels_dir(const RunConfig& cfg) { return cfg.output_root / "labels"; }
fs::path model_dir(const RunConfig& cfg) { return cfg.output_root / "model"; }
fs::path checkpoint_path(const RunConfig& cfg) { return model_dir(cfg) / "checkpoint.vckp"; }
fs::path predictions_root(const RunConfig& cfg) { return cfg.output_root / "predictions"; }
fs::path annotations_dir(const RunConfig& cfg) { return cfg.output_root / "annotations"; }

std::vector<const ManifestEntry*> scoped_entries(const CorpusManifest& m, const std::optional<Split>& split) {
  std::vector<const ManifestEntry*> out;
  for (const auto& e : m.entries) {
    if (!split || e.split == *split) out.push_back(&e);
  }
  return out;
}

/// Prints per-id failures in id order; returns the number of failures.
std::size_t report_errors(Context& ctx, const std::vector<const ManifestEntry*>& entries,
                          const std::vector<std::optional<std::string>>& errors) {
  std::size_t failed = 0;
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (!errors[i]) continue;
    ++failed;
    ctx.err << "error: " << entries[i]->id << ": " << *errors[i] << "\n";
  }
  return failed;
}

int cmd_gen_data(Context& ctx) {
  const auto& cfg = ctx.cfg;
  fs::create_directories(cfg.corpus_root / "features");
  fs::create_directories(cfg.corpus_root / "gold");
  std::vector<UtteranceTriplet> triplets(static_cast<std::size_t>(cfg.n));
  auto errors = parallel_for(triplets.size(), cfg.jobs, [&](std::size_t i) {
    const std::uint64_t seed = cfg.seed * 1000000ULL + i;
    auto t = generate_synthetic_triplet(seed, cfg.generator);
    const fs::path features = cfg.corpus_root / "features";
    write_frames(t.l2_read, features / (t.id + ".l2_read.fseq"));
    write_frames(t.l1_shadow, features / (t.id + ".l1_shadow.fseq"));
    write_frames(t.l1_script_shadow, features / (t.id + ".l1_script_shadow.fseq"));
    write_frames(*t.l2_read_align, features / (t.id + ".l2_read_align.fseq"));
    write_dlabel(cfg.corpus_root / "gold" / (t.id + ".dlabel.json"), t.id, *t.gold_dlabel);
    write_word_label(cfg.corpus_root / "gold" / (t.id + ".words.json"), t.id,
                     dlabel_frames_to_words(*t.gold_dlabel, t.word_timings, cfg.rho_word));
    triplets[i] = std::move(t);
  });
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (errors[i]) throw IoError("gen-data: item " + std::to_string(i) + ": " + *errors[i]);
  }

  std::vector<std::string> ids;
  for (const auto& t : triplets) ids.push_back(t.id);
  const auto splits = assign_splits(ids);
  CorpusManifest manifest;
  manifest.base_dir = cfg.corpus_root;
  for (std::size_t i = 0; i < triplets.size(); ++i) {
    const auto& t = triplets[i];
    ManifestEntry e;
    e.id = t.id;
    e.l2_read = "features/" + t.id + ".l2_read.fseq";
    e.l1_shadow = "features/" + t.id + ".l1_shadow.fseq";
    e.l1_script_shadow = "features/" + t.id + ".l1_script_shadow.fseq";
    e.l2_read_align = "features/" + t.id + ".l2_read_align.fseq";
    e.transcript = t.transcript;
    e.word_timings = t.word_timings;
    e.gold_dlabel = "gold/" + t.id + ".dlabel.json";
    e.split = splits[i];
    manifest.entries.push_back(std::move(e));
  }
  write_manifest(manifest, manifest_path(cfg));
  std::size_t counts[3] = {0, 0, 0};
  for (auto s : splits) ++counts[static_cast<int>(s)];
  ctx.out << "wrote " << triplets.size() << " triplets to " << cfg.corpus_root.string() << " (train " << counts[0]
          << ", dev " << counts[1] << ", test " << counts[2] << ")\n";
  return kExitOk;
}

int cmd_label(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const auto manifest = load_manifest(manifest_path(cfg));
  const auto entries = scoped_entries(manifest, std::nullopt);
  fs::create_directories(labels_dir(cfg));
  auto errors = parallel_for(entries.size(), cfg.jobs, [&](std::size_t i) {
    const auto& e = *entries[i];
    const auto t = load_triplet(manifest, e);
    const auto labels = label_triplet(t, cfg.metric, cfg.threshold, cfg.rho_word);
    write_dlabel(labels_dir(cfg) / (e.id + ".dlabel.json"), e.id, labels.l2_read);
    write_word_label(labels_dir(cfg) / (e.id + ".words.json"), e.id, labels.words);
    write_dlabel(labels_dir(cfg) / (e.id + ".shadow.dlabel.json"), e.id, labels.l1_shadow);
  });
  const auto failed = report_errors(ctx, entries, errors);
  ctx.out << "labeled " << entries.size() - failed << " of " << entries.size() << " utterances into "
          << labels_dir(cfg).string() << "\n";
  return failed == 0 ? kExitOk : kExitData;
}

int cmd_train(Context& ctx) {
  auto& cfg = ctx.cfg;
  const auto manifest = load_manifest(manifest_path(cfg));
  const auto entries = scoped_entries(manifest, Split::kTrain);
  std::vector<std::optional<TrainingExample<float>>> loaded(entries.size());
  auto errors = parallel_for(entries.size(), cfg.jobs, [&](std::size_t i) {
    const auto& e = *entries[i];
    const auto t = load_triplet(manifest, e);
    const auto src = read_dlabel(labels_dir(cfg) / (e.id + ".dlabel.json"));
    const auto trg = read_dlabel(labels_dir(cfg) / (e.id + ".shadow.dlabel.json"));
    loaded[i] = make_training_example(t, src.label, trg.label);
  });
  if (report_errors(ctx, entries, errors) > 0) return kExitData;

  std::vector<TrainingExample<float>> examples;
  for (auto& ex : loaded) examples.push_back(std::move(*ex));
  ModelConfig model = cfg.model;
  if (!examples.empty()) {
    model.d_src = static_cast<int>(examples.front().f_src.cols());
    model.d_trg = static_cast<int>(examples.front().f_trg.cols());
  }
  auto state = init_train_state(model);

  fs::create_directories(model_dir(cfg));
  std::ofstream log(model_dir(cfg) / "train_log.jsonl", std::ios::trunc);
  if (!log) throw IoError("cannot write " + (model_dir(cfg) / "train_log.jsonl").string());
  const auto summary = train(state, std::move(examples), [&](const TrainLogEntry& entry) {
    log << train_log_line(entry) << "\n";
  });
  log.close();
  for (const auto& id : summary.skipped_ids) ctx.err << "warning: " << id << ": skipped (target shorter than source)\n";
  save_checkpoint(checkpoint_path(cfg), state);
  ctx.out << "trained " << state.step << " steps on " << entries.size() - summary.skipped_ids.size()
          << " utterances (" << summary.skipped_ids.size() << " skipped)";
  if (!summary.log.empty()) ctx.out << ", final l_all " << summary.log.back().losses.l_all;
  ctx.out << "\ncheckpoint: " << checkpoint_path(cfg).string() << "\n";
  return kExitOk;
}

int cmd_predict(Context& ctx) {
  const auto& cfg = ctx.cfg;
  if (!fs::exists(checkpoint_path(cfg))) {
    ctx.err << "error: no checkpoint at " << checkpoint_path(cfg).string() << " (run train first)\n";
    return kExitData;
  }
  const auto state = load_checkpoint(checkpoint_path(cfg));
  const auto manifest = load_manifest(manifest_path(cfg));
  const auto entries = scoped_entries(manifest, cfg.split);
  const fs::path dir = predictions_root(cfg) / to_string(cfg.mode);
  fs::create_directories(dir);
  PredictOptions options{cfg.mode, cfg.tau, cfg.rho_word};
  auto errors = parallel_for(entries.size(), cfg.jobs, [&](std::size_t i) {
    const auto& e = *entries[i];
    const auto t = load_triplet(manifest, e);
    const auto p = predict_unintelligibility(t.l2_read, state, options, t.word_timings,
                                             cfg.mode == PredictMode::kAlignment ? &t.l1_shadow : nullptr);
    write_dlabel(dir / (e.id + ".dlabel.json"), e.id, p.frames);
    write_word_label(dir / (e.id + ".words.json"), e.id, p.words);
  });
  const auto failed = report_errors(ctx, entries, errors);
  ordered_json meta;
  meta["mode"] = to_string(cfg.mode);
  meta["tau"] = number_or_infinity(cfg.tau);
  meta["rho_word"] = cfg.rho_word;
  meta["split"] = cfg.split ? to_string(*cfg.split) : "all";
  meta["checkpoint_step"] = state.step;
  meta["utterances"] = entries.size() - failed;
  write_text_file(dir / "metadata.json", meta.dump(2) + "\n");
  ctx.out << "wrote " << entries.size() - failed << " predictions to " << dir.string() << "\n";
  return failed == 0 ? kExitOk : kExitData;
}

int cmd_evaluate(Context& ctx, const std::vector<std::string>& method_dirs, const std::string& annotations,
                 const std::string& gold) {
  const auto& cfg = ctx.cfg;
  const auto manifest = load_manifest(manifest_path(cfg));
  EvaluateOptions options;
  options.split = cfg.split;
  options.rho_word = cfg.rho_word;
  options.hop_ms = cfg.generator.hop_ms;
  fs::path ann_path = annotations.empty() ? annotations_dir(cfg) / "annotations.json" : fs::path(annotations);
  if (!annotations.empty() || fs::exists(ann_path)) options.annotations = read_annotations(ann_path);

  std::vector<fs::path> dirs;
  if (fs::is_directory(predictions_root(cfg))) {
    for (const auto& d : fs::directory_iterator(predictions_root(cfg))) {
      if (d.is_directory()) dirs.push_back(d.path());
    }
  }
  std::sort(dirs.begin(), dirs.end());
  for (const auto& d : method_dirs) dirs.emplace_back(d);
  if (dirs.empty()) {
    ctx.err << "error: no prediction directories under " << predictions_root(cfg).string() << "\n";
    return kExitData;
  }
  const fs::path gold_dir = gold.empty() ? cfg.corpus_root / "gold" : fs::path(gold);
  const auto report = evaluate_method_dirs(manifest, dirs, gold_dir, options);
  const fs::path out_dir = cfg.output_root / "reports";
  fs::create_directories(out_dir);
  write_text_file(out_dir / "report.json", report_json(report));
  const auto table = report_table(report);
  write_text_file(out_dir / "report.txt", table);
  ctx.out << table << "report: " << (out_dir / "report.json").string() << "\n";
  return kExitOk;
}

int cmd_export_tasks(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const auto manifest = load_manifest(manifest_path(cfg));
  const auto entries = scoped_entries(manifest, cfg.split);
  ordered_json tasks = ordered_json::array();
  for (const auto* e : entries) {
    const auto seq = read_frames(manifest.resolve(e->l2_read));
    std::string transcript;
    for (const auto& w : e->transcript) transcript += (transcript.empty() ? "" : " ") + w;
    ordered_json task;
    task["utterance_id"] = e->id;
    task["media_url"] = fs::relative(manifest.resolve(e->l2_read), cfg.corpus_root).generic_string();
    task["duration_ms"] = static_cast<std::int64_t>(seq.length()) * seq.hop_ms;
    task["transcript"] = transcript;
    tasks.push_back(std::move(task));
  }
  fs::create_directories(annotations_dir(cfg));
  const fs::path path = annotations_dir(cfg) / "tasks.json";
  write_text_file(path, tasks.dump(2) + "\n");
  ctx.out << "exported " << entries.size() << " annotation tasks to " << path.string() << "\n";
  return kExitOk;
}

int cmd_import_annotations(Context& ctx, const std::string& file) {
  const auto& cfg = ctx.cfg;
  const auto records = read_annotations(file);
  const auto manifest = load_manifest(manifest_path(cfg));
  std::size_t unknown = 0;
  for (const auto& rec : records) {
    const auto* e = manifest.find(rec.utterance_id);
    if (!e) {
      ++unknown;
      ctx.err << "warning: " << rec.utterance_id << ": not in the manifest\n";
      continue;
    }
    const auto seq = read_frames(manifest.resolve(e->l2_read));
    std::vector<std::string> warnings;
    annotation_to_frames(rec, static_cast<std::size_t>(seq.length()), seq.hop_ms, &warnings);
    for (const auto& w : warnings) ctx.err << "warning: " << w << "\n";
  }
  fs::create_directories(annotations_dir(cfg));
  write_annotations(annotations_dir(cfg) / "annotations.json", records);
  ctx.out << "imported " << records.size() << " annotation records (" << unknown << " unknown ids) into "
          << (annotations_dir(cfg) / "annotations.json").string() << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Reverse-shadowing unintelligibility detection toolkit"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_file, corpus, output, split, mode, optimizer, metric, annotations, gold, import_file;
  std::optional<int> jobs, n, steps, batch_size, hidden, smooth_window;
  std::optional<std::uint64_t> seed, model_seed;
  std::optional<double> lambda, learn_rate, tau, rho_word, percentile;
  std::vector<std::string> method_dirs;

  app.add_option("--config", config_file, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--corpus", corpus, "Corpus root (manifest, features, gold)");
  app.add_option("--output", output, "Output root (labels, model, predictions, reports)");
  app.add_option("--jobs", jobs, "Worker threads for per-utterance work");
  app.add_option("--seed", seed, "Corpus generation seed");
  app.add_option("--rho-word", rho_word, "Word coverage ratio");
  app.add_option("--split", split, "Split to process: train, dev, test or all");

  auto* gen = app.add_subcommand("gen-data", "Generate a seeded synthetic corpus");
  gen->add_option("--n", n, "Number of triplets");
  auto* label = app.add_subcommand("label", "Derive frame and word labels from the shadowing triplets");
  label->add_option("--metric", metric, "Local DTW metric: cosine or euclidean");
  label->add_option("--percentile", percentile, "Percentile threshold on smoothed step costs");
  label->add_option("--smooth-window", smooth_window, "Odd smoothing window");
  auto* train_cmd = app.add_subcommand("train", "Train the multi-task model");
  train_cmd->add_option("--steps", steps, "Training steps");
  train_cmd->add_option("--lambda", lambda, "Weight of the disfluency label losses");
  train_cmd->add_option("--learn-rate", learn_rate, "Learning rate");
  train_cmd->add_option("--optimizer", optimizer, "sgd or adam");
  train_cmd->add_option("--batch-size", batch_size, "Utterances per step");
  train_cmd->add_option("--hidden", hidden, "Hidden width");
  train_cmd->add_option("--model-seed", model_seed, "Parameter initialization and batching seed");
  auto* predict = app.add_subcommand("predict", "Predict unintelligible frames and words");
  predict->add_option("--mode", mode, "multitask or alignment");
  predict->add_option("--tau", tau, "Focus-rate threshold (alignment mode; -inf allowed)");
  auto* evaluate = app.add_subcommand("evaluate", "Score every prediction directory against gold labels");
  evaluate->add_option("--method-dir", method_dirs, "Extra prediction directory, e.g. an external baseline");
  evaluate->add_option("--annotations", annotations, "Imported annotation file");
  evaluate->add_option("--gold", gold, "Gold label directory (default <corpus>/gold)");
  auto* export_cmd = app.add_subcommand("export-annotation-tasks", "Bundle utterances for the annotation tool");
  auto* import_cmd = app.add_subcommand("import-annotations", "Import annotation records from the annotation tool");
  import_cmd->add_option("--file", import_file, "AnnotationRecord JSON array")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  RunConfig cfg;
  try {
    if (!config_file.empty()) cfg = run_config_from_json(nlohmann::json::parse(read_text_file(config_file)), cfg);
    if (const char* env = std::getenv(kOutputRootEnv); env != nullptr && *env != '\0') cfg.output_root = env;
    if (!corpus.empty()) cfg.corpus_root = corpus;
    if (!output.empty()) cfg.output_root = output;
    if (jobs) cfg.jobs = *jobs;
    if (seed) cfg.seed = *seed;
    if (n) cfg.n = *n;
    if (rho_word) cfg.rho_word = *rho_word;
    if (!split.empty()) cfg.split = split == "all" ? std::nullopt : std::optional<Split>(split_from_string(split));
    if (!metric.empty()) cfg.metric = local_metric_from_string(metric);
    if (percentile) {
      cfg.threshold.mode = ThresholdPolicy::Mode::kPercentile;
      cfg.threshold.value = *percentile;
    }
    if (smooth_window) cfg.threshold.smooth_window = *smooth_window;
    if (steps) cfg.model.max_steps = *steps;
    if (lambda) cfg.model.lambda = *lambda;
    if (learn_rate) cfg.model.learn_rate = *learn_rate;
    if (!optimizer.empty()) cfg.model.optimizer = optimizer_from_string(optimizer);
    if (batch_size) cfg.model.batch_size = *batch_size;
    if (hidden) cfg.model.hidden = *hidden;
    if (model_seed) cfg.model.seed = *model_seed;
    if (!mode.empty()) cfg.mode = predict_mode_from_string(mode);
    if (tau) cfg.tau = *tau;
    cfg.validate();
  } catch (const std::exception& e) {
    // Bad flag values and malformed config files are usage errors.
    err << "error: config: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    char hash[17];
    std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(config_hash(cfg)));
    out << "config hash: " << hash << "\n";

    Context ctx{cfg, out, err};
    if (gen->parsed()) return cmd_gen_data(ctx);
    if (label->parsed()) return cmd_label(ctx);
    if (train_cmd->parsed()) return cmd_train(ctx);
    if (predict->parsed()) return cmd_predict(ctx);
    if (evaluate->parsed()) return cmd_evaluate(ctx, method_dirs, annotations, gold);
    if (export_cmd->parsed()) return cmd_export_tasks(ctx);
    if (import_cmd->parsed()) return cmd_import_annotations(ctx, import_file);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace shadowint::cli
