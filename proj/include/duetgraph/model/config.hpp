// Copyright 2026 The duetgraph Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "json.hpp"

#include "duetgraph/core/config.hpp"
#include "duetgraph/core/error.hpp"

namespace duetgraph::model {

/// Sparse default priors; type 0 is always "no connection".
inline std::vector<double> default_prior(int n_edge_types) {
  switch (n_edge_types) {
    case 2: return {0.9, 0.1};
    case 3: return {0.85, 0.1, 0.05};
    case 4: return {0.85, 0.07, 0.05, 0.03};
    case 5: return {0.8, 0.08, 0.06, 0.04, 0.02};
    default: return {};
  }
}

struct ModelConfig {
  std::size_t hidden_dim = 64;
  int n_edge_types = 2;
  double dropout_p = 0.1;
  bool use_batchnorm = false;
  double batchnorm_momentum = 0.1;
  std::vector<double> prior = default_prior(2);
  double temperature = 0.5;
  bool hard_sample = true;
  std::size_t seq_len = 8;
  std::size_t feature_dim = 6;

  void validate() const {
    if (n_edge_types < 2 || n_edge_types > 5) throw ConfigError("n_edge_types", "must be in [2, 5]");
    if (hidden_dim < 1) throw ConfigError("hidden_dim", "must be >= 1");
    if (dropout_p < 0.0 || dropout_p >= 1.0) throw ConfigError("dropout_p", "must be in [0, 1)");
    if (!(temperature > 0.0)) throw ConfigError("temperature", "must be > 0");
    if (seq_len < 1) throw ConfigError("seq_len", "must be >= 1");
    if (feature_dim < 1) throw ConfigError("feature_dim", "must be >= 1");
    if (prior.size() != static_cast<std::size_t>(n_edge_types))
      throw ConfigError("prior", "must have n_edge_types entries");
    double sum = 0.0;
    for (double p : prior) {
      if (!(p > 0.0)) throw ConfigError("prior", "entries must be > 0");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-6) throw ConfigError("prior", "must sum to 1");
  }
};

inline void to_json(json& j, const ModelConfig& c) {
  j = json{{"hidden_dim", c.hidden_dim},   {"n_edge_types", c.n_edge_types},
           {"dropout_p", c.dropout_p},     {"use_batchnorm", c.use_batchnorm},
           {"batchnorm_momentum", c.batchnorm_momentum},
           {"prior", c.prior},             {"temperature", c.temperature},
           {"hard_sample", c.hard_sample}, {"seq_len", c.seq_len},
           {"feature_dim", c.feature_dim}};
}

/// Parses a model config. A missing prior falls back to the default for n.
inline ModelConfig model_config_from_json(const json& j, const std::string& prefix = "") {
  ModelConfig c;
  read_optional(j, "hidden_dim", c.hidden_dim, prefix);
  read_optional(j, "n_edge_types", c.n_edge_types, prefix);
  c.prior = default_prior(c.n_edge_types);
  read_optional(j, "dropout_p", c.dropout_p, prefix);
  read_optional(j, "use_batchnorm", c.use_batchnorm, prefix);
  read_optional(j, "batchnorm_momentum", c.batchnorm_momentum, prefix);
  read_optional(j, "prior", c.prior, prefix);
  read_optional(j, "temperature", c.temperature, prefix);
  read_optional(j, "hard_sample", c.hard_sample, prefix);
  read_optional(j, "seq_len", c.seq_len, prefix);
  read_optional(j, "feature_dim", c.feature_dim, prefix);
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(prefix + e.field(), e.message());
  }
  return c;
}

}  // namespace duetgraph::model
