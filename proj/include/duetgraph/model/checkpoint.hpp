// Copyright 2026 The duetgraph Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "duetgraph/core/error.hpp"
#include "duetgraph/core/tensor_file.hpp"
#include "duetgraph/model/config.hpp"
#include "duetgraph/model/parameters.hpp"

namespace duetgraph::model {

inline constexpr const char* kCheckpointFormat = "duetgraph.checkpoint/1";

struct Checkpoint {
  ModelConfig config;
  Parameters<float> params;
  json extra = json::object();  // optional run metadata (epoch, scores)
};

inline TensorFile checkpoint_to_file(const Checkpoint& ck) {
  TensorFile f;
  f.header["format"] = kCheckpointFormat;
  f.header["config"] = ck.config;
  f.header["extra"] = ck.extra;
  auto add = [&](const std::string& name, const Mat<float>& m) {
    TensorBlock b;
    b.name = name;
    b.shape = {static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())};
    b.data.assign(m.data(), m.data() + m.size());
    f.blocks.push_back(std::move(b));
  };
  ck.params.visit(add);
  ck.params.visit_buffers(add);
  return f;
}

inline void write_checkpoint(const std::string& path, const Checkpoint& ck) { write_tensor_file(path, checkpoint_to_file(ck)); }

inline Checkpoint checkpoint_from_file(const TensorFile& f, const std::string& origin = "checkpoint") {
  if (f.header.value("format", std::string()) != kCheckpointFormat)
    throw IoError("'" + origin + "' is not a " + std::string(kCheckpointFormat) + " file");
  Checkpoint ck;
  ck.config = model_config_from_json(f.header.at("config"), "config.");
  ck.extra = f.header.value("extra", json::object());
  ck.params = zero_parameters<float>(ck.config);
  auto load = [&](const std::string& name, Mat<float>& m) {
    const auto& b = f.block(name);
    if (b.shape.size() != 2 || b.shape[0] != static_cast<std::size_t>(m.rows()) ||
        b.shape[1] != static_cast<std::size_t>(m.cols()))
      throw ShapeMismatch("checkpoint block '" + name + "' does not match the configured shape");
    std::copy(b.data.begin(), b.data.end(), m.data());
  };
  ck.params.visit(load);
  ck.params.visit_buffers(load);
  return ck;
}

inline Checkpoint read_checkpoint(const std::string& path) { return checkpoint_from_file(read_tensor_file(path), path); }

}  // namespace duetgraph::model
