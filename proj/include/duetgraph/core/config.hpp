// Copyright 2026 The duetgraph Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "json.hpp"

#include "duetgraph/core/error.hpp"

namespace duetgraph {

using json = nlohmann::json;

/// Reads `doc[field]` into `out` if present; leaves `out` untouched otherwise.
/// Type mismatches become ConfigError naming the (possibly dotted) field.
template <class T>
void read_optional(const json& doc, const std::string& field, T& out,
                   const std::string& prefix = "") {
  if (!doc.is_object()) throw ConfigError(prefix, "expected a JSON object");
  auto it = doc.find(field);
  if (it == doc.end() || it->is_null()) return;
  try {
    out = it->template get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(prefix + field, std::string("wrong type: ") + e.what());
  }
}

/// Like read_optional but the field must be present.
template <class T>
void read_required(const json& doc, const std::string& field, T& out,
                   const std::string& prefix = "") {
  if (!doc.is_object()) throw ConfigError(prefix, "expected a JSON object");
  if (!doc.contains(field) || doc.at(field).is_null())
    throw ConfigError(prefix + field, "missing required field");
  read_optional(doc, field, out, prefix);
}

}  // namespace duetgraph
