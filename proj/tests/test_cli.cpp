// Copyright 2026 The duetgraph Authors
// SPDX-License-Identifier: Apache-2.0

#include <expat.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "duetgraph/cli/app.hpp"

using namespace duetgraph;
namespace fs = std::filesystem;

namespace {

const int kQuietLogs = (setenv("DUETGRAPH_LOG_LEVEL", "warn", 0), 0);

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() / ("duetgraph_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string operator/(const std::string& name) const { return (path_ / name).string(); }

 private:
  fs::path path_;
};

std::string slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

void write_json(const std::string& path, const json& j) { std::ofstream(path) << j.dump(2); }

struct Outcome {
  int code;
  json error;  // parsed error record, null on success
};

Outcome run(const std::vector<std::string>& args) {
  std::ostringstream err;
  const int code = cli::run(args, err);
  const auto text = err.str();
  return {code, text.empty() ? json(nullptr) : json::parse(text.substr(0, text.find('\n')))};
}

bool well_formed_xml(const std::string& text, std::string* message = nullptr) {
  XML_Parser p = XML_ParserCreate(nullptr);
  const bool ok = XML_Parse(p, text.data(), static_cast<int>(text.size()), 1) == XML_STATUS_OK;
  if (!ok && message) *message = XML_ErrorString(XML_GetErrorCode(p));
  XML_ParserFree(p);
  return ok;
}

std::size_t count_of(const std::string& hay, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + 1)) ++n;
  return n;
}

json small_sim_config() {
  return {{"num_trajectories", 6}, {"num_particles", 5}, {"frames", 49}, {"substeps_per_frame", 20},
          {"dt", 0.005},           {"spawn_halfwidth", 1.0}, {"seed", 4}};
}

// Report consistent with the layout of `tensor` whose selected edges are given.
json hand_report(const std::string& tensor, const std::vector<std::pair<std::size_t, double>>& picks) {
  const auto splits = pose::tensors_from_file(read_tensor_file(tensor));
  const auto& val = pose::find_split(splits, "val");
  json conf = json::array(), high = json::array();
  for (std::size_t e = 0; e < val.num_edges(); ++e)
    conf.push_back({{"edge", e}, {"source", val.edges[e].source}, {"target", val.edges[e].target}, {"probabilities", {0.5, 0.5}}});
  for (const auto& [e, p] : picks)
    high.push_back({{"edge", e}, {"source", val.edges[e].source}, {"target", val.edges[e].target}, {"type", 1}, {"probability", p}});
  return {{"edge_confidences", conf}, {"high_confidence_edges", high}};
}

}  // namespace

TEST(Cli, SimulateWritesFramesByParticlesByFeatures) {
  TempDir dir;
  write_json(dir / "sim.json", small_sim_config());
  const auto r = run({"simulate", "--config", dir / "sim.json", "--out", dir / "out"});
  ASSERT_EQ(r.code, 0) << r.error;
  const auto file = read_tensor_file(dir / "out/dataset.bin");
  EXPECT_EQ(file.header.at("shape"), json({49, 5, 4}));
  const auto manifest = json::parse(slurp(dir / "out/manifest.json"));
  EXPECT_EQ(manifest.at("format"), cli::kManifestFormat);
  EXPECT_EQ(manifest.at("subcommand"), "simulate");
  EXPECT_EQ(manifest.at("config").at("substeps_per_frame"), 20);
  EXPECT_EQ(manifest.at("seed"), 4);
}

TEST(Cli, MissingConfigFieldIsReportedWithExitTwo) {
  TempDir dir;
  auto cfg = small_sim_config();
  cfg.erase("frames");
  write_json(dir / "sim.json", cfg);
  const auto r = run({"simulate", "--config", dir / "sim.json", "--out", dir / "out"});
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(r.error.at("error"), "ConfigError");
  EXPECT_EQ(r.error.at("field"), "frames");
  EXPECT_EQ(r.error.at("exit_code"), 2);
}

TEST(Cli, UnknownAndMistypedFieldsAreConfigErrors) {
  TempDir dir;
  auto cfg = small_sim_config();
  cfg["substep"] = 3;
  write_json(dir / "a.json", cfg);
  auto r = run({"simulate", "--config", dir / "a.json", "--out", dir / "out"});
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(r.error.at("field"), "substep");

  cfg.erase("substep");
  cfg["dt"] = "small";
  write_json(dir / "b.json", cfg);
  r = run({"simulate", "--config", dir / "b.json", "--out", dir / "out"});
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(r.error.at("field"), "dt");

  std::ofstream(dir / "c.json") << "{ not json";
  EXPECT_EQ(run({"simulate", "--config", dir / "c.json", "--out", dir / "out"}).code, 2);
}

TEST(Cli, UsageAndIoErrorsHaveDistinctCodes) {
  EXPECT_EQ(run({"fly"}).code, 2);
  EXPECT_EQ(run({}).code, 2);
  const auto r = run({"simulate", "--config", "/nonexistent/sim.json", "--out", "/tmp/x"});
  EXPECT_EQ(r.code, 3);
  EXPECT_EQ(r.error.at("error"), "IoError");
}

TEST(Cli, ManifestFromAnotherSubcommandIsRejected) {
  TempDir dir;
  write_json(dir / "sim.json", small_sim_config());
  ASSERT_EQ(run({"simulate", "--config", dir / "sim.json", "--out", dir / "s"}).code, 0);
  const auto r = run({"synth-duet", "--config", dir / "s/manifest.json", "--out", dir / "d"});
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(r.error.at("field"), "subcommand");
}

TEST(Cli, EverySubcommandReplaysByteIdenticallyFromItsManifest) {
  TempDir dir;
  write_json(dir / "sim.json", small_sim_config());
  write_json(dir / "train.json", {{"model", {{"hidden_dim", 8}}}, {"train", {{"epochs", 2}, {"checkpoint_every", 1}}}});
  ASSERT_EQ(run({"simulate", "--config", dir / "sim.json", "--out", dir / "s"}).code, 0);
  ASSERT_EQ(run({"preprocess", "--in", dir / "s/dataset.bin", "--seq-len", "12", "--out", dir / "p"}).code, 0);
  ASSERT_EQ(run({"train", "--config", dir / "train.json", "--data", dir / "p/tensor.bin", "--out", dir / "t"}).code, 0);
  ASSERT_EQ(run({"eval", "--checkpoint", dir / "t/checkpoint.bin", "--data", dir / "p/tensor.bin", "--threshold", "0.3",
                 "--out", dir / "e"})
                .code,
            0);
  ASSERT_EQ(run({"render", "--report", dir / "e/report.json", "--data", dir / "p/tensor.bin", "--out", dir / "r"}).code, 0);
  ASSERT_EQ(run({"synth-duet", "--seed", "2", "--out", dir / "d"}).code, 0);

  for (const std::string step : {"s", "p", "t", "e", "r", "d"}) {
    const auto manifest = json::parse(slurp(dir / (step + "/manifest.json")));
    const std::string sub = manifest.at("subcommand");
    ASSERT_EQ(run({sub, "--config", dir / (step + "/manifest.json"), "--out", dir / (step + "2")}).code, 0) << sub;
    for (const auto& out : manifest.at("outputs")) {
      const fs::path original = out.get<std::string>();
      const auto replay = dir / (step + "2/" + original.filename().string());
      EXPECT_EQ(slurp(original.string()), slurp(replay)) << sub << " " << original.filename();
    }
  }
}

TEST(Cli, FlagsOverrideConfigFields) {
  TempDir dir;
  write_json(dir / "sim.json", small_sim_config());
  ASSERT_EQ(run({"simulate", "--config", dir / "sim.json", "--seed", "9", "--out", dir / "s"}).code, 0);
  EXPECT_EQ(json::parse(slurp(dir / "s/manifest.json")).at("config").at("seed"), 9);
  ASSERT_EQ(run({"preprocess", "--in", dir / "s/dataset.bin", "--seq-len", "6", "--split", "0.5", "--out", dir / "p"}).code, 0);
  const auto pre = json::parse(slurp(dir / "p/manifest.json")).at("config");
  EXPECT_EQ(pre.at("seq_len"), 6);
  EXPECT_EQ(pre.at("split"), 0.5);
}

TEST(Cli, RenderWithoutSelectedEdgesDrawsNoEdgeLines) {
  TempDir dir;
  ASSERT_EQ(run({"synth-duet", "--seed", "1", "--out", dir / "d"}).code, 0);
  ASSERT_EQ(run({"preprocess", "--in", dir / "d/duet_000.jsonl", "--seq-len", "8", "--out", dir / "p"}).code, 0);
  write_json(dir / "report.json", hand_report(dir / "p/tensor.bin", {}));
  ASSERT_EQ(run({"render", "--report", dir / "report.json", "--data", dir / "p/tensor.bin", "--frames", "3", "--out",
                 dir / "r"})
                .code,
            0);
  EXPECT_EQ(slurp(dir / "r/edges.csv"), "source_group,source_joint,target_group,target_joint,type,confidence\n");
  for (int k = 0; k < 3; ++k) {
    const auto svg = slurp(dir / ("r/frame_00" + std::to_string(k) + ".svg"));
    std::string why;
    EXPECT_TRUE(well_formed_xml(svg, &why)) << why;
    EXPECT_EQ(count_of(svg, "class=\"edge\""), 0u);
    // Both skeletons: 29 joints and 28 bones each.
    EXPECT_EQ(count_of(svg, "<circle"), 58u);
    EXPECT_EQ(count_of(svg, "<line"), 56u);
  }
}

TEST(Cli, RenderSortsEdgesAndMapsConfidenceToOpacity) {
  TempDir dir;
  ASSERT_EQ(run({"synth-duet", "--seed", "1", "--out", dir / "d"}).code, 0);
  ASSERT_EQ(run({"preprocess", "--in", dir / "d/duet_000.jsonl", "--seq-len", "8", "--out", dir / "p"}).code, 0);
  write_json(dir / "report.json", hand_report(dir / "p/tensor.bin", {{4, 0.85}, {7, 1.0}, {2, 0.9}}));
  ASSERT_EQ(run({"render", "--report", dir / "report.json", "--data", dir / "p/tensor.bin", "--frames", "1", "--out",
                 dir / "r"})
                .code,
            0);
  std::istringstream csv(slurp(dir / "r/edges.csv"));
  std::string line;
  std::getline(csv, line);
  std::vector<double> conf;
  while (std::getline(csv, line)) conf.push_back(std::stod(line.substr(line.rfind(',') + 1)));
  EXPECT_EQ(conf, (std::vector<double>{1.0, 0.9, 0.85}));
  const auto svg = slurp(dir / "r/frame_000.svg");
  EXPECT_TRUE(well_formed_xml(svg));
  EXPECT_EQ(count_of(svg, "class=\"edge\""), 3u);
  EXPECT_EQ(count_of(svg, "stroke-opacity=\"1.000\"/>"), 1u);
  EXPECT_EQ(count_of(svg, "stroke-opacity=\"0.850\"/>"), 1u);
}

TEST(Cli, RenderRejectsEdgesOutsideTheLayout) {
  TempDir dir;
  ASSERT_EQ(run({"synth-duet", "--seed", "1", "--out", dir / "d"}).code, 0);
  ASSERT_EQ(run({"preprocess", "--in", dir / "d/duet_000.jsonl", "--seq-len", "8", "--out", dir / "p"}).code, 0);
  auto report = hand_report(dir / "p/tensor.bin", {{0, 0.9}});
  report["high_confidence_edges"][0]["target"] = 40;
  write_json(dir / "bad.json", report);
  auto r = run({"render", "--report", dir / "bad.json", "--data", dir / "p/tensor.bin", "--out", dir / "r"});
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(r.error.at("error"), "IndexError");

  report = hand_report(dir / "p/tensor.bin", {});
  report["edge_confidences"].erase(0);
  write_json(dir / "short.json", report);
  r = run({"render", "--report", dir / "short.json", "--data", dir / "p/tensor.bin", "--out", dir / "r"});
  EXPECT_EQ(r.error.at("error"), "IndexError");
}

TEST(Cli, ParticleRenderDrawsTrailsWithoutBones) {
  TempDir dir;
  write_json(dir / "sim.json", small_sim_config());
  ASSERT_EQ(run({"simulate", "--config", dir / "sim.json", "--out", dir / "s"}).code, 0);
  ASSERT_EQ(run({"preprocess", "--in", dir / "s/dataset.bin", "--seq-len", "12", "--split", "0.5", "--out", dir / "p"}).code, 0);
  write_json(dir / "report.json", hand_report(dir / "p/tensor.bin", {{3, 0.95}}));
  ASSERT_EQ(run({"render", "--report", dir / "report.json", "--data", dir / "p/tensor.bin", "--frames", "2", "--out",
                 dir / "r"})
                .code,
            0);
  const auto svg = slurp(dir / "r/frame_001.svg");
  EXPECT_TRUE(well_formed_xml(svg));
  EXPECT_EQ(count_of(svg, "<polyline"), 5u);
  EXPECT_EQ(count_of(svg, "<circle"), 5u);
  EXPECT_EQ(count_of(svg, "<line"), 1u);
}

TEST(Cli, PreprocessStoresCleanedPosesAndSourceMetadata) {
  TempDir dir;
  ASSERT_EQ(run({"synth-duet", "--seed", "5", "--out", dir / "d"}).code, 0);
  ASSERT_EQ(run({"preprocess", "--in", dir / "d/duet_000.jsonl", "--in", dir / "d/duet_001.jsonl", "--seq-len", "8",
                 "--joints-per-dancer", "4", "--out", dir / "p"})
                .code,
            0);
  const auto file = read_tensor_file(dir / "p/tensor.bin");
  EXPECT_EQ(file.header.at("source"), "pose");
  EXPECT_EQ(file.block("poses.1").shape, (std::vector<std::size_t>{240, 2, 29, 3}));
  const auto splits = pose::tensors_from_file(file);
  EXPECT_EQ(pose::find_split(splits, "train").num_edges(), 32u);
  const auto r = run({"preprocess", "--in", dir / "d/duet_000.jsonl", "--seq-len", "8", "--joints-per-dancer", "7",
                      "--out", dir / "q"});
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(r.error.at("field"), "joints_per_dancer");
}
