// Copyright 2026 The duetgraph Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>

#include "json.hpp"

#include "duetgraph/core/config.hpp"
#include "duetgraph/core/error.hpp"

namespace duetgraph::train {

struct TrainConfig {
  std::size_t epochs = 20;
  std::size_t batch_size = 16;
  double learning_rate = 5e-4;
  std::size_t lr_decay_epochs = 10;  // halve every N epochs; 0 disables
  double lr_decay_factor = 0.5;
  double beta = 1.0;
  std::string beta_schedule = "warmup";  // "warmup" or "constant"
  double beta_warmup_fraction = 0.25;
  std::size_t augment_factor = 0;  // 0: off; R: each batch replaced by R rotated copies
  double grad_clip_norm = 0.0;     // 0: off
  std::uint64_t seed = 0;
  std::size_t checkpoint_every = 0;  // epochs; 0: only the best checkpoint

  void validate() const {
    if (epochs < 1) throw ConfigError("epochs", "must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size", "must be >= 1");
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate", "must be > 0");
    if (!(lr_decay_factor > 0.0)) throw ConfigError("lr_decay_factor", "must be > 0");
    if (!(beta >= 0.0)) throw ConfigError("beta", "must be >= 0");
    if (beta_schedule != "warmup" && beta_schedule != "constant")
      throw ConfigError("beta_schedule", "must be 'warmup' or 'constant'");
    if (beta_warmup_fraction < 0.0 || beta_warmup_fraction > 1.0)
      throw ConfigError("beta_warmup_fraction", "must be in [0, 1]");
    if (!(grad_clip_norm >= 0.0)) throw ConfigError("grad_clip_norm", "must be >= 0");
  }

  /// Learning rate at 0-based `epoch`.
  double lr_at(std::size_t epoch) const {
    if (lr_decay_epochs == 0) return learning_rate;
    return learning_rate * std::pow(lr_decay_factor, static_cast<double>(epoch / lr_decay_epochs));
  }

  /// KL weight at 0-based `epoch`: linear from 0 to beta over the warm-up span.
  double beta_at(std::size_t epoch) const {
    if (beta_schedule == "constant") return beta;
    const double span = beta_warmup_fraction * static_cast<double>(epochs);
    if (span <= 0.0) return beta;
    return beta * std::min(1.0, static_cast<double>(epoch) / span);
  }
};

inline void to_json(json& j, const TrainConfig& c) {
  j = json{{"epochs", c.epochs},
           {"batch_size", c.batch_size},
           {"learning_rate", c.learning_rate},
           {"lr_decay_epochs", c.lr_decay_epochs},
           {"lr_decay_factor", c.lr_decay_factor},
           {"beta", c.beta},
           {"beta_schedule", c.beta_schedule},
           {"beta_warmup_fraction", c.beta_warmup_fraction},
           {"augment_factor", c.augment_factor},
           {"grad_clip_norm", c.grad_clip_norm},
           {"seed", c.seed},
           {"checkpoint_every", c.checkpoint_every}};
}

inline TrainConfig train_config_from_json(const json& j, const std::string& prefix = "") {
  TrainConfig c;
  read_optional(j, "epochs", c.epochs, prefix);
  read_optional(j, "batch_size", c.batch_size, prefix);
  read_optional(j, "learning_rate", c.learning_rate, prefix);
  read_optional(j, "lr_decay_epochs", c.lr_decay_epochs, prefix);
  read_optional(j, "lr_decay_factor", c.lr_decay_factor, prefix);
  read_optional(j, "beta", c.beta, prefix);
  read_optional(j, "beta_schedule", c.beta_schedule, prefix);
  read_optional(j, "beta_warmup_fraction", c.beta_warmup_fraction, prefix);
  read_optional(j, "augment_factor", c.augment_factor, prefix);
  read_optional(j, "grad_clip_norm", c.grad_clip_norm, prefix);
  read_optional(j, "seed", c.seed, prefix);
  read_optional(j, "checkpoint_every", c.checkpoint_every, prefix);
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(prefix + e.field(), e.message());
  }
  return c;
}

}  // namespace duetgraph::train
