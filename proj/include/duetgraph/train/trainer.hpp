// Copyright 2026 The duetgraph Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "duetgraph/core/error.hpp"
#include "duetgraph/core/rng.hpp"
#include "duetgraph/model/nri.hpp"
#include "duetgraph/pose/augment.hpp"
#include "duetgraph/pose/training_tensor.hpp"
#include "duetgraph/train/adam.hpp"
#include "duetgraph/train/config.hpp"

namespace duetgraph::train {

struct EpochLog {
  std::size_t epoch = 0;  // 0 is the untrained model
  double train_mse = 0.0;
  double val_mse = 0.0;
  double kl = 0.0;  // validation KL
  double lr = 0.0;
  double beta = 0.0;

  friend bool operator==(const EpochLog&, const EpochLog&) = default;
};

template <class T>
struct TrainResult {
  model::Parameters<T> best;
  model::Parameters<T> last;
  std::size_t best_epoch = 0;
  std::vector<EpochLog> log;

  double initial_val_mse() const { return log.front().val_mse; }
  double best_val_mse() const { return log[best_epoch].val_mse; }
};

inline std::string log_csv(const std::vector<EpochLog>& log) {
  std::ostringstream os;
  os.precision(9);
  os << "epoch,train_mse,val_mse,kl,lr\n";
  for (const auto& e : log) os << e.epoch << ',' << e.train_mse << ',' << e.val_mse << ',' << e.kl << ',' << e.lr << '\n';
  return os.str();
}

struct ReconMetrics {
  double mse = 0.0;
  double kl = 0.0;
};

/// Teacher-forced metrics with training-style hard samples drawn from a
/// fixed stream, so successive epochs are compared on equal noise.
template <class T>
ReconMetrics recon_metrics(const model::Parameters<T>& params, const pose::TrainingTensor& data,
                           const model::ModelConfig& cfg, std::uint64_t seed) {
  ReconMetrics out;
  if (data.num_windows() == 0) return out;
  const auto topo = data.topology();
  const model::ForwardMode mode{false, cfg.hard_sample, true};
  for (std::size_t s = 0; s < data.num_windows(); ++s) {
    Rng rng = derive_rng(seed, 0x56414C, s);
    const auto res = model::run_window(data.window<T>(s), topo, params, cfg, 0.0, mode, rng);
    out.mse += res.loss.recon_mse;
    out.kl += res.loss.kl;
  }
  out.mse /= static_cast<double>(data.num_windows());
  out.kl /= static_cast<double>(data.num_windows());
  return out;
}

inline void check_compatible(const model::ModelConfig& cfg, const pose::TrainingTensor& data, const char* what) {
  if (data.seq_len != cfg.seq_len || data.feature_dim != cfg.feature_dim)
    throw ShapeMismatch(std::string(what) + " windows are [L=" + std::to_string(data.seq_len) + ", F=" +
                        std::to_string(data.feature_dim) + "] but the model expects [L=" + std::to_string(cfg.seq_len) +
                        ", F=" + std::to_string(cfg.feature_dim) + "]");
}

template <class T>
void scale_gradients(model::Parameters<T>& g, double factor) {
  g.visit([&](const std::string&, model::Mat<T>& m) { m *= static_cast<T>(factor); });
}

template <class T>
void clip_gradients(model::Parameters<T>& g, double max_norm) {
  double sq = 0.0;
  g.visit([&](const std::string&, const model::Mat<T>& m) { sq += static_cast<double>(m.squaredNorm()); });
  const double norm = std::sqrt(sq);
  if (norm > max_norm) scale_gradients(g, max_norm / norm);
}

/// Called after every epoch with the log row and the current parameters.
template <class T>
using EpochCallback = std::function<void(const EpochLog&, const model::Parameters<T>&)>;

/// Mini-batch training on the ELBO. Deterministic for a given seed.
template <class T = float>
TrainResult<T> train(const model::ModelConfig& cfg, const TrainConfig& tc, const pose::TrainingTensor& train_data,
                     const pose::TrainingTensor& val_data, const EpochCallback<T>& on_epoch = {}) {
  cfg.validate();
  tc.validate();
  check_compatible(cfg, train_data, "training");
  check_compatible(cfg, val_data, "validation");
  if (train_data.num_windows() == 0) throw SequenceTooShort("training split has no windows");
  const auto topo = train_data.topology();

  Rng init_rng = derive_rng(tc.seed, 0x494E4954);
  TrainResult<T> result;
  auto params = model::init_parameters<T>(cfg, init_rng);
  Adam<T> adam(cfg);
  const std::uint64_t eval_seed = splitmix64(tc.seed ^ 0x4556);

  {
    const auto tr = recon_metrics(params, train_data, cfg, eval_seed);
    const auto va = recon_metrics(params, val_data, cfg, eval_seed);
    result.log.push_back({0, tr.mse, va.mse, va.kl, tc.lr_at(0), tc.beta_at(0)});
    if (on_epoch) on_epoch(result.log.back(), params);
  }
  result.best = params;
  double best_val = val_data.num_windows() ? result.log[0].val_mse : result.log[0].train_mse;

  std::vector<std::size_t> order(train_data.num_windows());
  const std::size_t replicas = std::max<std::size_t>(tc.augment_factor, 1);
  for (std::size_t epoch = 0; epoch < tc.epochs; ++epoch) {
    const double lr = tc.lr_at(epoch), beta = tc.beta_at(epoch);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng order_rng = derive_rng(tc.seed, 0x4F524445, epoch);
    shuffle(order.begin(), order.end(), order_rng);

    double train_mse = 0.0;
    std::size_t train_count = 0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += tc.batch_size) {
      const std::size_t b1 = std::min(order.size(), b0 + tc.batch_size);
      for (std::size_t rep = 0; rep < replicas; ++rep) {
        auto grad = model::zero_gradients<T>(cfg);
        model::Mat<T> enc_mean, enc_var, dec_mean, dec_var;
        double theta = 0.0;
        if (tc.augment_factor > 0) {
          Rng aug_rng = derive_rng(tc.seed, 0x415547 ^ (epoch << 20), b0 * replicas + rep);
          theta = uniform(aug_rng, 0.0, 2.0 * std::numbers::pi);
        }
        for (std::size_t i = b0; i < b1; ++i) {
          auto w = train_data.window<T>(order[i]);
          if (tc.augment_factor > 0) {
            pose::rotate_z_inplace(w.inputs, theta);
            pose::rotate_z_inplace(w.target, theta);
          }
          Rng rng = derive_rng(tc.seed, (epoch << 8) ^ rep, i);
          const auto res = model::run_window(w, topo, params, cfg, beta, {true, cfg.hard_sample, true}, rng, &grad);
          train_mse += res.loss.recon_mse;
          ++train_count;
          if (cfg.use_batchnorm) {
            if (enc_mean.size() == 0) {
              enc_mean = res.enc_bn_mean;
              enc_var = res.enc_bn_var;
              dec_mean = res.dec_bn_mean;
              dec_var = res.dec_bn_var;
            } else {
              enc_mean += res.enc_bn_mean;
              enc_var += res.enc_bn_var;
              dec_mean += res.dec_bn_mean;
              dec_var += res.dec_bn_var;
            }
          }
        }
        const double count = static_cast<double>(b1 - b0);
        scale_gradients(grad, 1.0 / count);
        if (tc.grad_clip_norm > 0.0) clip_gradients(grad, tc.grad_clip_norm);
        adam.step(params, grad, lr);
        if (cfg.use_batchnorm) {
          const T mom = static_cast<T>(cfg.batchnorm_momentum), inv = static_cast<T>(1.0 / count);
          params.enc_bn.running_mean = (T(1) - mom) * params.enc_bn.running_mean + mom * inv * enc_mean;
          params.enc_bn.running_var = (T(1) - mom) * params.enc_bn.running_var + mom * inv * enc_var;
          params.dec_bn.running_mean = (T(1) - mom) * params.dec_bn.running_mean + mom * inv * dec_mean;
          params.dec_bn.running_var = (T(1) - mom) * params.dec_bn.running_var + mom * inv * dec_var;
        }
      }
    }

    const auto va = recon_metrics(params, val_data, cfg, eval_seed);
    EpochLog row{epoch + 1, train_mse / static_cast<double>(train_count), va.mse, va.kl, lr, beta};
    if (!std::isfinite(row.train_mse) || !std::isfinite(row.val_mse))
      throw NonFiniteLoss("epoch " + std::to_string(epoch + 1) + " produced a non-finite loss; lower the learning rate");
    result.log.push_back(row);
    const double score = val_data.num_windows() ? row.val_mse : row.train_mse;
    if (score < best_val) {
      best_val = score;
      result.best = params;
      result.best_epoch = epoch + 1;
    }
    if (on_epoch) on_epoch(row, params);
  }
  result.last = std::move(params);
  return result;
}

}  // namespace duetgraph::train
