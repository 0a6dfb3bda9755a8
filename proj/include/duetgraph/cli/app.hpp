// Copyright 2026 The duetgraph Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line front end. Every subcommand resolves its full configuration,
// runs, and writes a manifest that replays the run when passed back through
// --config.

#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "json.hpp"

#include "duetgraph/cli/render.hpp"
#include "duetgraph/core/error.hpp"
#include "duetgraph/model/checkpoint.hpp"
#include "duetgraph/pose/dataset.hpp"
#include "duetgraph/pose/synthetic.hpp"
#include "duetgraph/sim/particles.hpp"
#include "duetgraph/train/evaluate.hpp"
#include "duetgraph/train/trainer.hpp"

namespace duetgraph::cli {

namespace fs = std::filesystem;

inline constexpr const char* kVersion = "0.1.0";
inline constexpr const char* kManifestFormat = "duetgraph.manifest/1";
inline constexpr const char* kManifestName = "manifest.json";

enum ExitCode : int { kOk = 0, kFailure = 1, kConfigFailure = 2, kIoFailure = 3 };

// --- logging ----------------------------------------------------------------

/// Log verbosity comes from DUETGRAPH_LOG_LEVEL (trace, debug, info, warn,
/// error, off); the default is info. Logs go to stderr.
inline std::shared_ptr<spdlog::logger> logger() {
  static std::shared_ptr<spdlog::logger> log = [] {
    auto l = std::make_shared<spdlog::logger>("duetgraph", std::make_shared<spdlog::sinks::stderr_sink_st>());
    l->set_pattern("[%l] %v");
    const char* level = std::getenv("DUETGRAPH_LOG_LEVEL");
    l->set_level(level ? spdlog::level::from_str(level) : spdlog::level::info);
    return l;
  }();
  return log;
}

// --- config files and manifests --------------------------------------------

inline json read_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open '" + path + "' for reading");
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    throw ConfigError("", "'" + path + "' is not valid JSON: " + e.what());
  }
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  os << text;
  if (!os) throw IoError("write failed for '" + path.string() + "'");
}

inline void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());
}

/// Loads a config document. A manifest from an earlier run yields its
/// resolved config, provided it came from the same subcommand.
inline json load_config(const std::string& path, const std::string& subcommand) {
  json doc = read_json_file(path);
  if (doc.is_object() && doc.value("format", "") == kManifestFormat) {
    const auto sub = doc.value("subcommand", "");
    if (sub != subcommand)
      throw ConfigError("subcommand", "manifest was written by '" + sub + "', not '" + subcommand + "'");
    return doc.at("config");
  }
  if (!doc.is_object()) throw ConfigError("", "config root must be a JSON object");
  return doc;
}

/// Rejects fields outside `allowed` so typos do not pass silently.
inline void check_fields(const json& doc, const std::set<std::string>& allowed, const std::string& prefix = "") {
  if (!doc.is_object()) throw ConfigError(prefix, "expected a JSON object");
  for (const auto& [key, value] : doc.items())
    if (!allowed.count(key)) throw ConfigError(prefix + key, "unknown field");
}

inline void require_fields(const json& doc, const std::vector<std::string>& fields, const std::string& prefix = "") {
  for (const auto& f : fields)
    if (!doc.contains(f)) throw ConfigError(prefix + f, "required field is missing");
}

struct Manifest {
  std::string subcommand;
  std::string config_path;
  json config;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::uint64_t seed = 0;

  json to_json() const {
    return {{"format", kManifestFormat}, {"version", kVersion}, {"subcommand", subcommand},
            {"config_path", config_path}, {"config", config},   {"inputs", inputs},
            {"outputs", outputs},         {"seed", seed}};
  }
};

inline void write_manifest(const fs::path& out_dir, const Manifest& m) {
  write_text(out_dir / kManifestName, m.to_json().dump(2) + "\n");
}

// --- subcommands ------------------------------------------------------------

struct CommonArgs {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
};

inline json config_or_empty(const CommonArgs& a, const std::string& sub) {
  return a.config.empty() ? json::object() : load_config(a.config, sub);
}

/// simulate: particle trajectories with ground-truth graphs.
inline int cmd_simulate(const CommonArgs& a) {
  if (a.config.empty()) throw ConfigError("config", "simulate needs --config");
  json cfg = load_config(a.config, "simulate");
  check_fields(cfg, {"num_trajectories", "num_particles", "frames", "substeps_per_frame", "dt", "force_softening",
                     "box_halfwidth", "spawn_halfwidth", "velocity_scale", "seed"});
  require_fields(cfg, {"num_trajectories", "num_particles", "frames"});
  if (a.seed) cfg["seed"] = *a.seed;
  const auto sc = sim::sim_config_from_json(cfg);
  const fs::path out(a.out);
  ensure_dir(out);
  logger()->info("simulating {} trajectories of {} particles", sc.num_trajectories, sc.num_particles);
  const auto records = sim::simulate_dataset(sc);
  const auto dataset = (out / "dataset.bin").string();
  sim::write_dataset(dataset, sc, records);
  write_manifest(out, {"simulate", a.config, json(sc), {}, {dataset}, sc.seed});
  return kOk;
}

/// synth-duet: procedural two-dancer keypoint streams as JSON lines.
inline int cmd_synth_duet(const CommonArgs& a) {
  json cfg = config_or_empty(a, "synth-duet");
  if (a.seed) cfg["seed"] = *a.seed;
  check_fields(cfg, {"num_sequences", "frames", "fps", "separation", "coupling", "lag_frames", "jitter",
                     "drop_frame_prob", "miss_prob", "extra_prob", "swap_prob", "seed"});
  const auto sc = pose::synth_config_from_json(cfg);
  const fs::path out(a.out);
  ensure_dir(out);
  std::vector<std::string> outputs;
  for (std::size_t i = 0; i < sc.num_sequences; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "duet_%03zu.jsonl", i);
    const auto path = (out / name).string();
    pose::write_keypoints_jsonl(path, pose::synth_duet_stream(sc, i));
    outputs.push_back(path);
  }
  write_manifest(out, {"synth-duet", a.config, json(sc), {}, outputs, sc.seed});
  return kOk;
}

inline bool is_sim_dataset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path + "' for reading");
  std::string line;
  std::getline(is, line);
  const json head = json::parse(line, nullptr, false);
  return head.is_object() && head.value("format", "") == sim::kDatasetFormat;
}

struct PreprocessArgs {
  std::vector<std::string> inputs;
  std::optional<std::size_t> seq_len, joints_per_dancer;
  std::optional<double> keep_ratio, split;
  std::optional<bool> center;
};

/// preprocess: raw keypoints (or a particle dataset) to a training tensor file.
inline int cmd_preprocess(const CommonArgs& a, const PreprocessArgs& p) {
  json cfg = config_or_empty(a, "preprocess");
  check_fields(cfg, {"inputs", "seq_len", "joints_per_dancer", "split", "keep_ratio", "center_windows", "seed"});
  if (!p.inputs.empty()) cfg["inputs"] = p.inputs;
  if (p.seq_len) cfg["seq_len"] = *p.seq_len;
  if (p.joints_per_dancer) cfg["joints_per_dancer"] = *p.joints_per_dancer;
  if (p.keep_ratio) cfg["keep_ratio"] = *p.keep_ratio;
  if (p.split) cfg["split"] = *p.split;
  if (p.center) cfg["center_windows"] = *p.center;
  if (a.seed) cfg["seed"] = *a.seed;
  require_fields(cfg, {"inputs", "seq_len"});

  pose::PreprocessConfig pc;
  std::vector<std::string> inputs;
  read_required(cfg, "inputs", inputs);
  read_required(cfg, "seq_len", pc.seq_len);
  read_optional(cfg, "joints_per_dancer", pc.joints_per_dancer);
  read_optional(cfg, "split", pc.split);
  read_optional(cfg, "keep_ratio", pc.keep_ratio);
  read_optional(cfg, "center_windows", pc.center_windows);
  read_optional(cfg, "seed", pc.seed);
  if (inputs.empty()) throw ConfigError("inputs", "needs at least one input file");
  pc.validate();

  const fs::path out(a.out);
  ensure_dir(out);
  const auto tensor_path = (out / "tensor.bin").string();
  json header;
  json resolved = pc;
  resolved["inputs"] = inputs;
  header["preprocess"] = resolved;
  std::vector<TensorBlock> extra;
  std::pair<pose::TrainingTensor, pose::TrainingTensor> splits;

  if (is_sim_dataset(inputs.front())) {
    if (inputs.size() != 1) throw ConfigError("inputs", "particle data must come from a single dataset file");
    const auto records = sim::read_dataset(inputs.front());
    logger()->info("windowing {} particle trajectories", records.size());
    auto all = pose::particle_windows(records, pc.seq_len);
    if (pc.center_windows) throw ConfigError("center_windows", "only applies to pose data");
    splits = pose::split_windows(all, pc.split, pc.seed);
    header["source"] = "particles";
  } else {
    std::vector<pose::PoseSequence> cleaned;
    for (const auto& path : inputs) {
      const auto raw = pose::read_keypoints_jsonl(path);
      auto seq = pose::clean_stream(raw);
      if (seq.frames >= 2) seq = pose::smooth_sequence(std::move(seq), pc.keep_ratio);
      logger()->info("{}: {} frames cleaned", path, seq.frames);
      TensorBlock b{"poses." + std::to_string(cleaned.size()), {seq.frames, 2, pose::kNumJoints, 3}, {}};
      for (double v : seq.data) b.data.push_back(static_cast<float>(v));
      extra.push_back(std::move(b));
      cleaned.push_back(std::move(seq));
    }
    splits = pose::build_training_tensor(cleaned, pc);
    header["source"] = "pose";
    header["fps"] = cleaned.front().fps;
  }
  logger()->info("{} training / {} validation windows, {} candidate edges", splits.first.num_windows(),
                 splits.second.num_windows(), splits.first.num_edges());
  write_tensor_file(tensor_path, pose::tensors_to_file({&splits.first, &splits.second}, header, std::move(extra)));
  write_manifest(out, {"preprocess", a.config, resolved, inputs, {tensor_path}, pc.seed});
  return kOk;
}

struct TrainArgs {
  std::string data;
  std::optional<std::size_t> epochs;
};

/// train: fits the model. Writes best and last checkpoints plus a CSV log.
inline int cmd_train(const CommonArgs& a, const TrainArgs& t) {
  json cfg = config_or_empty(a, "train");
  check_fields(cfg, {"data", "model", "train"});
  if (!t.data.empty()) cfg["data"] = t.data;
  if (!cfg.contains("model")) cfg["model"] = json::object();
  if (!cfg.contains("train")) cfg["train"] = json::object();
  if (a.seed) cfg["train"]["seed"] = *a.seed;
  if (t.epochs) cfg["train"]["epochs"] = *t.epochs;
  require_fields(cfg, {"data"});
  check_fields(cfg["model"], {"hidden_dim", "n_edge_types", "dropout_p", "use_batchnorm", "batchnorm_momentum", "prior",
                              "temperature", "hard_sample", "seq_len", "feature_dim"},
               "model.");
  check_fields(cfg["train"], {"epochs", "batch_size", "learning_rate", "lr_decay_epochs", "lr_decay_factor", "beta",
                              "beta_schedule", "beta_warmup_fraction", "augment_factor", "grad_clip_norm", "seed",
                              "checkpoint_every"},
               "train.");
  const auto data_path = cfg.at("data").get<std::string>();
  const auto file = read_tensor_file(data_path);
  const auto splits = pose::tensors_from_file(file);
  const auto& train_data = pose::find_split(splits, "train");
  const auto& val_data = pose::find_split(splits, "val");
  // Window shape comes from the data unless the config pins it.
  if (!cfg["model"].contains("seq_len")) cfg["model"]["seq_len"] = train_data.seq_len;
  if (!cfg["model"].contains("feature_dim")) cfg["model"]["feature_dim"] = train_data.feature_dim;
  const auto mc = model::model_config_from_json(cfg["model"], "model.");
  const auto tc = train::train_config_from_json(cfg["train"], "train.");
  json resolved = {{"data", data_path}, {"model", mc}, {"train", tc}};

  const fs::path out(a.out);
  ensure_dir(out);
  std::vector<std::string> outputs;
  auto save = [&](const fs::path& path, const model::Parameters<float>& params, const train::EpochLog& row) {
    model::write_checkpoint(path.string(), {mc, params, {{"epoch", row.epoch}, {"val_mse", row.val_mse}}});
  };
  auto on_epoch = [&](const train::EpochLog& row, const model::Parameters<float>& params) {
    logger()->info("epoch {:3d}  train_mse {:.6f}  val_mse {:.6f}  kl {:.5f}  lr {:.2e}", row.epoch, row.train_mse,
                   row.val_mse, row.kl, row.lr);
    if (tc.checkpoint_every > 0 && row.epoch > 0 && row.epoch % tc.checkpoint_every == 0) {
      char name[48];
      std::snprintf(name, sizeof(name), "checkpoint_epoch_%03zu.bin", row.epoch);
      save(out / name, params, row);
      outputs.push_back((out / name).string());
    }
  };
  const auto result = train::train<float>(mc, tc, train_data, val_data, on_epoch);
  save(out / "checkpoint.bin", result.best, result.log[result.best_epoch]);
  save(out / "checkpoint_last.bin", result.last, result.log.back());
  write_text(out / "train_log.csv", train::log_csv(result.log));
  outputs.insert(outputs.begin(), {(out / "checkpoint.bin").string(), (out / "checkpoint_last.bin").string(),
                                   (out / "train_log.csv").string()});
  logger()->info("best epoch {} with val_mse {:.6f}", result.best_epoch, result.best_val_mse());
  write_manifest(out, {"train", a.config, resolved, {data_path}, outputs, tc.seed});
  return kOk;
}

struct EvalArgs {
  std::string checkpoint, data, split;
  std::optional<double> threshold;
};

/// eval: teacher-forced reconstruction error and high-confidence edges.
inline int cmd_eval(const CommonArgs& a, const EvalArgs& e) {
  json cfg = config_or_empty(a, "eval");
  check_fields(cfg, {"checkpoint", "data", "split", "threshold", "seed"});
  if (!e.checkpoint.empty()) cfg["checkpoint"] = e.checkpoint;
  if (!e.data.empty()) cfg["data"] = e.data;
  if (!e.split.empty()) cfg["split"] = e.split;
  if (e.threshold) cfg["threshold"] = *e.threshold;
  if (a.seed) cfg["seed"] = *a.seed;
  require_fields(cfg, {"checkpoint", "data"});
  std::string checkpoint, data, split = "val";
  double threshold = 0.8;
  std::uint64_t seed = 0;
  read_required(cfg, "checkpoint", checkpoint);
  read_required(cfg, "data", data);
  read_optional(cfg, "split", split);
  read_optional(cfg, "threshold", threshold);
  read_optional(cfg, "seed", seed);
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw ConfigError("threshold", "must lie in [0, 1]");

  const auto ck = model::read_checkpoint(checkpoint);
  const auto splits = pose::tensors_from_file(read_tensor_file(data));
  const auto& set = pose::find_split(splits, split);
  train::check_compatible(ck.config, set, "evaluation");
  const auto report = train::evaluate(ck.params, set, ck.config, threshold, seed);
  json doc = train::to_json_value(report, set.edges);
  doc["split"] = split;
  json nodes = json::array();
  for (const auto& n : set.nodes) nodes.push_back({{"group", n.group}, {"joint", n.source_index}});
  doc["nodes"] = nodes;

  const fs::path out(a.out);
  ensure_dir(out);
  write_text(out / "report.json", doc.dump(2) + "\n");
  logger()->info("{} windows: recon_mse {:.6f}, {} edges at or above {}", report.windows, report.recon_mse,
                 report.high_confidence_edges.size(), threshold);
  json resolved = {{"checkpoint", checkpoint}, {"data", data}, {"split", split}, {"threshold", threshold}, {"seed", seed}};
  write_manifest(out, {"eval", a.config, resolved, {checkpoint, data}, {(out / "report.json").string()}, seed});
  return kOk;
}

struct RenderArgs {
  std::string report, data, split;
  std::optional<std::size_t> frames;
};

/// render: SVG frames with the selected edges and a CSV edge table.
inline int cmd_render(const CommonArgs& a, const RenderArgs& r) {
  json cfg = config_or_empty(a, "render");
  check_fields(cfg, {"report", "data", "split", "frames"});
  if (!r.report.empty()) cfg["report"] = r.report;
  if (!r.data.empty()) cfg["data"] = r.data;
  if (!r.split.empty()) cfg["split"] = r.split;
  if (r.frames) cfg["frames"] = *r.frames;
  require_fields(cfg, {"report", "data"});
  std::string report_path, data_path, split = "val";
  std::size_t frames = 4;
  read_required(cfg, "report", report_path);
  read_required(cfg, "data", data_path);
  read_optional(cfg, "split", split);
  read_optional(cfg, "frames", frames);
  if (frames < 1) throw ConfigError("frames", "must be >= 1");

  const json report = read_json_file(report_path);
  const auto file = read_tensor_file(data_path);
  const auto splits = pose::tensors_from_file(file);
  const auto& set = pose::find_split(splits, split);
  const auto edges = report_edges(report, set);

  const fs::path out(a.out);
  ensure_dir(out);
  std::vector<std::string> outputs{(out / "edges.csv").string()};
  write_text(out / "edges.csv", edges_csv(edges, set));
  const auto scenes = build_scenes(file, set, edges, frames);
  for (std::size_t k = 0; k < scenes.size(); ++k) {
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%03zu.svg", k);
    write_text(out / name, render_svg(scenes[k]));
    outputs.push_back((out / name).string());
  }
  json resolved = {{"report", report_path}, {"data", data_path}, {"split", split}, {"frames", frames}};
  write_manifest(out, {"render", a.config, resolved, {report_path, data_path}, outputs, 0});
  return kOk;
}

// --- entry point ------------------------------------------------------------

/// Machine-readable failure record, one JSON line.
inline void report_error(std::ostream& err, const std::string& kind, const std::string& message, int code,
                         const std::string& field = "") {
  json rec = {{"error", kind}, {"message", message}, {"exit_code", code}};
  if (!field.empty()) rec["field"] = field;
  err << rec.dump() << std::endl;
}

inline int run(int argc, const char* const* argv, std::ostream& err = std::cerr) {
  CLI::App app{"duetgraph: latent interaction graphs between two sets of moving points"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  CommonArgs common;
  auto add_common = [&](CLI::App* sub, bool out_required = true) {
    sub->add_option("--config", common.config, "JSON config, or a manifest from an earlier run");
    auto* o = sub->add_option("--out", common.out, "output directory");
    if (out_required) o->required();
    sub->add_option("--seed", common.seed, "overrides the config seed");
  };

  auto* simulate = app.add_subcommand("simulate", "simulate charged-particle trajectories");
  add_common(simulate);

  auto* synth = app.add_subcommand("synth-duet", "generate synthetic duet keypoint streams");
  add_common(synth);

  PreprocessArgs pre;
  auto* preprocess = app.add_subcommand("preprocess", "clean, smooth and window keypoints into a training tensor");
  add_common(preprocess);
  preprocess->add_option("--in", pre.inputs, "keypoint JSON-lines files, or one particle dataset");
  preprocess->add_option("--seq-len", pre.seq_len, "window length L");
  preprocess->add_option("--joints-per-dancer", pre.joints_per_dancer, "joints sampled per dancer (3 to 5)");
  preprocess->add_option("--keep-ratio", pre.keep_ratio, "fraction of DCT coefficients kept");
  preprocess->add_option("--split", pre.split, "training fraction of windows");
  preprocess->add_flag("--center", pre.center, "center each window on its input centroid");

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "train the encoder and decoder");
  add_common(train_cmd);
  train_cmd->add_option("--data", tr.data, "training tensor file");
  train_cmd->add_option("--epochs", tr.epochs, "overrides train.epochs");

  EvalArgs ev;
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  add_common(eval);
  eval->add_option("--checkpoint", ev.checkpoint, "checkpoint file");
  eval->add_option("--data", ev.data, "training tensor file");
  eval->add_option("--split", ev.split, "split to evaluate (default val)");
  eval->add_option("--threshold", ev.threshold, "confidence threshold (default 0.8)");

  RenderArgs rd;
  auto* render = app.add_subcommand("render", "draw SVG frames and an edge table");
  add_common(render);
  render->add_option("--report", rd.report, "eval report.json");
  render->add_option("--data", rd.data, "training tensor file");
  render->add_option("--split", rd.split, "split whose windows are drawn (default val)");
  render->add_option("--frames", rd.frames, "number of frames to draw (default 4)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report_error(err, "UsageError", e.what(), kConfigFailure);
    return kConfigFailure;
  }

  try {
    if (simulate->parsed()) return cmd_simulate(common);
    if (synth->parsed()) return cmd_synth_duet(common);
    if (preprocess->parsed()) return cmd_preprocess(common, pre);
    if (train_cmd->parsed()) return cmd_train(common, tr);
    if (eval->parsed()) return cmd_eval(common, ev);
    if (render->parsed()) return cmd_render(common, rd);
  } catch (const ConfigError& e) {
    report_error(err, e.kind(), e.what(), kConfigFailure, e.field());
    return kConfigFailure;
  } catch (const IoError& e) {
    report_error(err, e.kind(), e.what(), kIoFailure);
    return kIoFailure;
  } catch (const Error& e) {
    report_error(err, e.kind(), e.what(), kFailure);
    return kFailure;
  } catch (const json::exception& e) {
    report_error(err, "ConfigError", e.what(), kConfigFailure);
    return kConfigFailure;
  } catch (const std::exception& e) {
    report_error(err, "InternalError", e.what(), kFailure);
    return kFailure;
  }
  return kFailure;
}

/// Convenience for tests: argv[0] is supplied.
inline int run(const std::vector<std::string>& args, std::ostream& err = std::cerr) {
  std::vector<const char*> argv{"duetgraph"};
  for (const auto& s : args) argv.push_back(s.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), err);
}

}  // namespace duetgraph::cli
