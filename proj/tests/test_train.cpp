// Copyright 2026 The duetgraph Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <filesystem>

#include <gtest/gtest.h>

#include "duetgraph/model/checkpoint.hpp"
#include "duetgraph/pose/dataset.hpp"
#include "duetgraph/pose/synthetic.hpp"
#include "duetgraph/sim/particles.hpp"
#include "duetgraph/train/adam.hpp"
#include "duetgraph/train/evaluate.hpp"
#include "duetgraph/train/trainer.hpp"

#include "support.hpp"

using namespace duetgraph;
using namespace duetgraph::train;
using model::Mat;

namespace {

std::pair<pose::TrainingTensor, pose::TrainingTensor> particle_data(std::size_t trajectories, std::size_t seq_len = 6) {
  sim::SimConfig sc;
  sc.num_trajectories = trajectories;
  sc.frames = 25;
  sc.substeps_per_frame = 20;
  sc.dt = 0.005;
  sc.spawn_halfwidth = 1.0;
  sc.force_softening = 0.5;
  return pose::split_windows(pose::particle_windows(sim::simulate_dataset(sc), seq_len), 0.8, 3);
}

model::ModelConfig small_model(const pose::TrainingTensor& t, int n_types = 2) {
  model::ModelConfig c;
  c.hidden_dim = 12;
  c.n_edge_types = n_types;
  c.prior = model::default_prior(n_types);
  c.seq_len = t.seq_len;
  c.feature_dim = t.feature_dim;
  return c;
}

TrainConfig short_run(std::size_t epochs = 3) {
  TrainConfig tc;
  tc.epochs = epochs;
  tc.batch_size = 8;
  tc.learning_rate = 2e-3;
  tc.seed = 5;
  return tc;
}

// Exact expectation of max(h, E - h) / E for h ~ Binomial(E, 1/2).
double binary_baseline(int edges) {
  double expect = 0.0;
  for (int h = 0; h <= edges; ++h) {
    const double log_p = std::lgamma(edges + 1.0) - std::lgamma(h + 1.0) - std::lgamma(edges - h + 1.0) - edges * std::log(2.0);
    expect += std::exp(log_p) * std::max(h, edges - h) / static_cast<double>(edges);
  }
  return expect;
}

}  // namespace

// --- edge accuracy ----------------------------------------------------------

TEST(EdgeAccuracy, IdentityAndSwappedLabelsBothScoreOne) {
  const std::vector<int> labels{0, 1, 1, 0, 1};
  const std::vector<int> swapped{1, 0, 0, 1, 0};
  EXPECT_DOUBLE_EQ(edge_accuracy(labels, labels, 2), 1.0);
  EXPECT_DOUBLE_EQ(edge_accuracy(swapped, labels, 2), 1.0);
  EXPECT_DOUBLE_EQ(edge_accuracy(std::vector<int>{0, 0, 0, 0, 0}, labels, 2), 0.6);
}

TEST(EdgeAccuracy, InvariantUnderLatentRelabeling) {
  Rng rng(21);
  std::vector<int> perm{0, 1, 2};
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<int> pred(30), labels(30);
    for (auto& p : pred) p = static_cast<int>(uniform_index(rng, 3));
    for (auto& l : labels) l = static_cast<int>(uniform_index(rng, 2));
    const double base = edge_accuracy(pred, labels, 3);
    do {
      std::vector<int> relabeled;
      for (int p : pred) relabeled.push_back(perm[static_cast<std::size_t>(p)]);
      EXPECT_DOUBLE_EQ(edge_accuracy(relabeled, labels, 3), base);
    } while (std::next_permutation(perm.begin(), perm.end()));
  }
}

TEST(EdgeAccuracy, RandomPredictionsMatchBinomialBaseline) {
  constexpr int kEdges = 20;
  Rng rng(22);
  double mean = 0.0;
  constexpr int kTrials = 20000;
  for (int t = 0; t < kTrials; ++t) {
    std::vector<int> pred(kEdges), labels(kEdges);
    for (auto& p : pred) p = static_cast<int>(uniform_index(rng, 2));
    for (auto& l : labels) l = static_cast<int>(uniform_index(rng, 2));
    mean += edge_accuracy(pred, labels, 2);
  }
  mean /= kTrials;
  const double expected = binary_baseline(kEdges);
  EXPECT_GT(expected, 0.5);
  EXPECT_NEAR(mean, expected, 0.003);
}

TEST(EdgeAccuracy, PosteriorAgainstGroundTruthGraph) {
  const auto truth = sim::GroundTruthGraph::from_charges({1, -1, 1});
  const auto edges = model::complete_edges(3);
  Mat<double> post(6, 2);
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const int lbl = truth.label(static_cast<std::size_t>(edges[e].source), static_cast<std::size_t>(edges[e].target));
    post(static_cast<Eigen::Index>(e), lbl) = 0.8;
    post(static_cast<Eigen::Index>(e), 1 - lbl) = 0.2;
  }
  EXPECT_DOUBLE_EQ(edge_accuracy(post, edges, truth), 1.0);
  EXPECT_THROW(edge_accuracy(Mat<double>(post.topRows(5)), edges, truth), ArityMismatch);
  EXPECT_THROW(edge_accuracy(std::vector<int>{0}, std::vector<int>{0, 1}, 2), ArityMismatch);
}

// --- confident-edge selection -------------------------------------------------

TEST(SelectConfidentEdges, UniformPosteriorSelectsNothing) {
  const auto edges = model::complete_edges(3);
  for (int n = 2; n <= 5; ++n) {
    const Mat<double> probs = Mat<double>::Constant(6, n, 1.0 / n);
    const std::vector<double> log_p0(6, std::log(1.0 / n));
    EXPECT_TRUE(select_confident_edges(probs, log_p0, edges, 0.8).empty());
  }
}

TEST(SelectConfidentEdges, ReportsExactlyTheHandSetEdge) {
  const auto edges = model::complete_edges(3);
  Mat<double> probs = Mat<double>::Constant(6, 2, 0.5);
  probs.row(4) << 0.05, 0.95;
  std::vector<double> log_p0(6, std::log(0.5));
  log_p0[4] = std::log(0.05);
  const auto out = select_confident_edges(probs, log_p0, edges, 0.8);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].edge, 4u);
  EXPECT_EQ(out[0].source, edges[4].source);
  EXPECT_EQ(out[0].target, edges[4].target);
  EXPECT_EQ(out[0].type, 1);
  EXPECT_NEAR(out[0].probability, 0.95, 1e-12);
}

TEST(SelectConfidentEdges, SortedByDescendingConfidence) {
  const auto edges = model::complete_edges(3);
  Mat<double> probs(6, 3);
  std::vector<double> log_p0;
  const double p0[] = {0.1, 0.02, 0.5, 0.15, 0.01, 0.3};
  for (int e = 0; e < 6; ++e) {
    probs.row(e) << p0[e], (1 - p0[e]) * 0.3, (1 - p0[e]) * 0.7;
    log_p0.push_back(std::log(p0[e]));
  }
  const auto out = select_confident_edges(probs, log_p0, edges, 0.8);
  ASSERT_EQ(out.size(), 4u);
  EXPECT_EQ(out[0].edge, 4u);
  EXPECT_EQ(out[1].edge, 1u);
  EXPECT_EQ(out[2].edge, 0u);
  EXPECT_EQ(out[3].edge, 3u);
  for (const auto& e : out) EXPECT_EQ(e.type, 2);
}

// --- evaluate ---------------------------------------------------------------

TEST(Evaluate, ZeroEncoderOutputGivesUniformPosterior) {
  auto [tr, va] = particle_data(4);
  const auto cfg = small_model(tr, 3);
  Rng rng(1);
  auto params = model::init_parameters<double>(cfg, rng);
  params.enc_out.weight.setZero();
  params.enc_out.bias.setZero();
  const auto rep = evaluate(params, va, cfg, 0.8, 2);
  EXPECT_TRUE(rep.high_confidence_edges.empty());
  EXPECT_LT((rep.edge_confidences.array() - 1.0 / 3.0).abs().maxCoeff(), 1e-12);
}

TEST(Evaluate, BiasedEncoderReportsEveryEdge) {
  auto [tr, va] = particle_data(4);
  const auto cfg = small_model(tr);
  Rng rng(1);
  auto params = model::init_parameters<double>(cfg, rng);
  params.enc_out.weight.setZero();
  params.enc_out.bias << 0.0, std::log(0.95 / 0.05);
  const auto rep = evaluate(params, va, cfg, 0.8, 2);
  ASSERT_EQ(rep.high_confidence_edges.size(), va.num_edges());
  for (const auto& e : rep.high_confidence_edges) EXPECT_NEAR(e.probability, 0.95, 1e-9);
  EXPECT_EQ(rep.high_confidence_edges.front().edge, 0u);
  EXPECT_EQ(rep.windows, va.num_windows());
  ASSERT_TRUE(rep.edge_accuracy.has_value());
}

TEST(Evaluate, ThresholdOneSelectsNothingForFiniteLogits) {
  auto [tr, va] = particle_data(4);
  const auto cfg = small_model(tr);
  Rng rng(3);
  auto params = model::init_parameters<double>(cfg, rng);
  params.enc_out.weight.setZero();
  params.enc_out.bias << -30.0, 30.0;  // p0 is about 1e-26, still positive
  EXPECT_TRUE(evaluate(params, va, cfg, 1.0, 0).high_confidence_edges.empty());
  EXPECT_EQ(evaluate(params, va, cfg, 0.999, 0).high_confidence_edges.size(), va.num_edges());
}

TEST(Evaluate, ProbabilitiesAreRowStochastic) {
  auto [tr, va] = particle_data(4);
  const auto cfg = small_model(tr, 4);
  Rng rng(4);
  const auto params = model::init_parameters<double>(cfg, rng);
  const auto rep = evaluate(params, va, cfg, 0.0, 0);
  EXPECT_EQ(rep.high_confidence_edges.size(), va.num_edges());
  for (Eigen::Index e = 0; e < rep.edge_confidences.rows(); ++e) {
    EXPECT_NEAR(rep.edge_confidences.row(e).sum(), 1.0, 1e-12);
    EXPECT_GE(rep.edge_confidences.row(e).minCoeff(), 0.0);
  }
  EXPECT_GE(rep.recon_mse, 0.0);
}

TEST(Evaluate, CheckpointRoundTripIsBitIdentical) {
  auto [tr, va] = particle_data(4);
  const auto cfg = small_model(tr);
  Rng rng(6);
  auto params = model::init_parameters<float>(cfg, rng);
  const auto path = (std::filesystem::temp_directory_path() / "duetgraph_ck_roundtrip.bin").string();
  model::write_checkpoint(path, {cfg, params, {{"note", "test"}}});
  const auto back = model::read_checkpoint(path);
  std::filesystem::remove(path);
  EXPECT_EQ(json(back.config), json(cfg));
  EXPECT_EQ(back.extra.at("note"), "test");
  EXPECT_TRUE(evaluate(params, va, cfg, 0.5, 8) == evaluate(back.params, va, back.config, 0.5, 8));
}

TEST(Evaluate, ReportJsonListsEveryEdge) {
  auto [tr, va] = particle_data(4);
  const auto cfg = small_model(tr);
  Rng rng(7);
  const auto params = model::init_parameters<double>(cfg, rng);
  const auto doc = to_json_value(evaluate(params, va, cfg, 0.0, 0), va.edges);
  EXPECT_EQ(doc.at("edge_confidences").size(), va.num_edges());
  EXPECT_EQ(doc.at("high_confidence_edges").size(), va.num_edges());
  EXPECT_TRUE(doc.at("edge_accuracy").is_number());
}

// --- optimiser and schedules --------------------------------------------------

TEST(Adam, FirstStepMovesEachParameterByLearningRate) {
  model::ModelConfig cfg = duetgraph::testing::tiny_config(4);
  Rng rng(8);
  auto params = model::init_parameters<double>(cfg, rng);
  const auto before = params;
  auto grad = model::zero_gradients<double>(cfg);
  grad.visit([&](const std::string&, Mat<double>& g) { g = duetgraph::testing::random_matrix(g.rows(), g.cols(), rng); });
  Adam<double> adam(cfg);
  adam.step(params, grad, 0.01);
  // Bias correction makes the first update lr * g / (|g| + eps') per entry.
  std::vector<const Mat<double>*> b, a, g;
  before.visit([&](const std::string&, const Mat<double>& m) { b.push_back(&m); });
  params.visit([&](const std::string&, const Mat<double>& m) { a.push_back(&m); });
  grad.visit([&](const std::string&, const Mat<double>& m) { g.push_back(&m); });
  for (std::size_t k = 0; k < a.size(); ++k)
    for (Eigen::Index i = 0; i < a[k]->size(); ++i) {
      const double gi = g[k]->data()[i];
      EXPECT_NEAR(a[k]->data()[i], b[k]->data()[i] - 0.01 * gi / (std::abs(gi) + 1e-8), 1e-12);
    }
  EXPECT_EQ(adam.steps(), 1);
}

TEST(TrainConfig, LearningRateHalvesEveryTenEpochs) {
  TrainConfig tc;
  EXPECT_DOUBLE_EQ(tc.lr_at(0), 5e-4);
  EXPECT_DOUBLE_EQ(tc.lr_at(9), 5e-4);
  EXPECT_DOUBLE_EQ(tc.lr_at(10), 2.5e-4);
  EXPECT_DOUBLE_EQ(tc.lr_at(25), 1.25e-4);
}

TEST(TrainConfig, BetaWarmsUpOverFirstQuarter) {
  TrainConfig tc;
  tc.epochs = 20;
  EXPECT_DOUBLE_EQ(tc.beta_at(0), 0.0);
  EXPECT_DOUBLE_EQ(tc.beta_at(2), 0.4);
  EXPECT_DOUBLE_EQ(tc.beta_at(5), 1.0);
  EXPECT_DOUBLE_EQ(tc.beta_at(19), 1.0);
  tc.beta_schedule = "constant";
  EXPECT_DOUBLE_EQ(tc.beta_at(0), 1.0);
  tc.beta_schedule = "cosine";
  EXPECT_THROW(tc.validate(), ConfigError);
}

TEST(TrainConfig, UnknownTypesAndRangesRejected) {
  EXPECT_THROW(train_config_from_json(json{{"epochs", 0}}), ConfigError);
  EXPECT_THROW(train_config_from_json(json{{"learning_rate", "fast"}}), ConfigError);
  try {
    train_config_from_json(json{{"batch_size", 0}}, "train.");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "train.batch_size");
  }
}

// --- trainer ----------------------------------------------------------------

TEST(Trainer, ReducesValidationErrorOnParticles) {
  auto [tr, va] = particle_data(40);
  auto cfg = small_model(tr);
  cfg.hidden_dim = 16;
  auto tc = short_run(6);
  const auto res = train::train<float>(cfg, tc, tr, va);
  ASSERT_EQ(res.log.size(), 7u);
  EXPECT_EQ(res.log.front().epoch, 0u);
  EXPECT_LT(res.best_val_mse(), res.initial_val_mse());
  EXPECT_LE(res.best_val_mse(), res.log.back().val_mse);
  for (const auto& row : res.log) {
    EXPECT_TRUE(std::isfinite(row.train_mse));
    EXPECT_GE(row.kl, -1e-6);
  }
}

TEST(Trainer, SameSeedReproducesRunExactly) {
  auto [tr, va] = particle_data(10);
  const auto cfg = small_model(tr);
  auto tc = short_run(2);
  tc.augment_factor = 2;
  const auto a = train::train<float>(cfg, tc, tr, va);
  const auto b = train::train<float>(cfg, tc, tr, va);
  EXPECT_EQ(log_csv(a.log), log_csv(b.log));
  std::vector<Mat<float>> pa, pb;
  a.best.visit([&](const std::string&, const Mat<float>& m) { pa.push_back(m); });
  b.best.visit([&](const std::string&, const Mat<float>& m) { pb.push_back(m); });
  EXPECT_EQ(pa, pb);
  tc.seed += 1;
  EXPECT_NE(log_csv(train::train<float>(cfg, tc, tr, va).log), log_csv(a.log));
}

TEST(Trainer, CallbackSeesEveryEpoch) {
  auto [tr, va] = particle_data(6);
  const auto cfg = small_model(tr);
  std::vector<std::size_t> seen;
  train::train<float>(cfg, short_run(3), tr, va,
                      [&](const EpochLog& row, const model::Parameters<float>&) { seen.push_back(row.epoch); });
  EXPECT_EQ(seen, (std::vector<std::size_t>{0, 1, 2, 3}));
}

TEST(Trainer, RejectsDataOfTheWrongShape) {
  auto [tr, va] = particle_data(4);
  auto cfg = small_model(tr);
  cfg.seq_len = tr.seq_len + 1;
  EXPECT_THROW(train::train<float>(cfg, short_run(1), tr, va), ShapeMismatch);
}

TEST(Trainer, LogCsvHasHeaderAndOneRowPerEpoch) {
  std::vector<EpochLog> log{{0, 1.0, 2.0, 0.5, 5e-4, 0.0}, {1, 0.5, 1.5, 0.25, 5e-4, 1.0}};
  const auto csv = log_csv(log);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "epoch,train_mse,val_mse,kl,lr");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
  EXPECT_NE(csv.find("\n1,0.5,1.5,0.25,0.0005\n"), std::string::npos);
}

TEST(Trainer, PosePipelineWithAugmentationImproves) {
  pose::SynthConfig sc;
  sc.num_sequences = 4;
  sc.frames = 180;
  pose::PreprocessConfig pc;
  pc.seq_len = 8;
  const auto [tr, va] = pose::preprocess_streams(pose::synth_duet_streams(sc), pc);
  auto cfg = small_model(tr);
  auto tc = short_run(4);
  tc.augment_factor = 2;
  tc.grad_clip_norm = 1.0;
  const auto res = train::train<float>(cfg, tc, tr, va);
  EXPECT_LT(res.log.back().val_mse, res.initial_val_mse());
}

TEST(Trainer, BatchnormRunningStatisticsAreUpdated) {
  pose::SynthConfig sc;
  sc.num_sequences = 2;
  sc.frames = 90;
  pose::PreprocessConfig pc;
  pc.seq_len = 8;
  const auto [tr, va] = pose::preprocess_streams(pose::synth_duet_streams(sc), pc);
  auto cfg = small_model(tr);
  cfg.use_batchnorm = true;
  const auto res = train::train<float>(cfg, short_run(2), tr, va);
  for (const auto& row : res.log) EXPECT_TRUE(std::isfinite(row.val_mse));
  bool moved = false;
  res.last.visit_buffers([&](const std::string& name, const Mat<float>& m) {
    if (name == "dec_bn.running_var") moved = (m.array() != 1.0f).any();
  });
  EXPECT_TRUE(moved);
}
