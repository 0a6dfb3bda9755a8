// Copyright 2026 The duetgraph Authors
// SPDX-License-Identifier: Apache-2.0

// Container shared by every binary artifact (simulated datasets, training
// tensors, checkpoints):
//
//   <one line of JSON header>\n<float32 little-endian blocks, back to back>
//
// The header carries a "blocks" array; each entry names a block and gives its
// shape and its offset (in floats) from the start of the binary section.

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "json.hpp"

#include "duetgraph/core/error.hpp"

namespace duetgraph {

using json = nlohmann::json;

struct TensorBlock {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<float> data;

  std::size_t numel() const {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
  }
};

struct TensorFile {
  json header = json::object();
  std::vector<TensorBlock> blocks;

  const TensorBlock& block(const std::string& name) const {
    for (const auto& b : blocks)
      if (b.name == name) return b;
    throw IoError("tensor file has no block named '" + name + "'");
  }

  bool has_block(const std::string& name) const {
    for (const auto& b : blocks)
      if (b.name == name) return true;
    return false;
  }
};

namespace detail {

inline std::uint32_t byteswap32(std::uint32_t v) {
  return (v >> 24) | ((v >> 8) & 0xFF00u) | ((v << 8) & 0xFF0000u) | (v << 24);
}

inline void write_floats_le(std::ostream& os, const std::vector<float>& values) {
  if constexpr (std::endian::native == std::endian::little) {
    os.write(reinterpret_cast<const char*>(values.data()),
             static_cast<std::streamsize>(values.size() * sizeof(float)));
  } else {
    for (float f : values) {
      std::uint32_t u = byteswap32(std::bit_cast<std::uint32_t>(f));
      os.write(reinterpret_cast<const char*>(&u), sizeof(u));
    }
  }
}

inline void read_floats_le(std::istream& is, std::vector<float>& values) {
  is.read(reinterpret_cast<char*>(values.data()),
          static_cast<std::streamsize>(values.size() * sizeof(float)));
  if constexpr (std::endian::native != std::endian::little) {
    for (float& f : values) f = std::bit_cast<float>(byteswap32(std::bit_cast<std::uint32_t>(f)));
  }
}

}  // namespace detail

inline void write_tensor_file(const std::string& path, const TensorFile& file) {
  json header = file.header;
  json blocks = json::array();
  std::size_t offset = 0;
  for (const auto& b : file.blocks) {
    if (b.numel() != b.data.size())
      throw ShapeMismatch("block '" + b.name + "' shape does not match its data length");
    blocks.push_back({{"name", b.name}, {"shape", b.shape}, {"offset", offset}});
    offset += b.data.size();
  }
  header["blocks"] = blocks;

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  os << header.dump() << '\n';
  for (const auto& b : file.blocks) detail::write_floats_le(os, b.data);
  if (!os) throw IoError("write failed for '" + path + "'");
}

inline TensorFile read_tensor_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path + "' for reading");
  std::string line;
  if (!std::getline(is, line)) throw IoError("'" + path + "' is empty");

  TensorFile file;
  try {
    file.header = json::parse(line);
  } catch (const json::exception& e) {
    throw IoError("'" + path + "' has a malformed header: " + e.what());
  }
  if (!file.header.contains("blocks") || !file.header["blocks"].is_array())
    throw IoError("'" + path + "' header lacks a blocks table");

  for (const auto& entry : file.header["blocks"]) {
    TensorBlock b;
    b.name = entry.at("name").get<std::string>();
    b.shape = entry.at("shape").get<std::vector<std::size_t>>();
    b.data.resize(b.numel());
    detail::read_floats_le(is, b.data);
    if (!is) throw IoError("'" + path + "' is truncated in block '" + b.name + "'");
    file.blocks.push_back(std::move(b));
  }
  file.header.erase("blocks");
  return file;
}

}  // namespace duetgraph
