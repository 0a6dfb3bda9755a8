// Copyright 2026 The duetgraph Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace duetgraph {

/// Base of every error the library raises. `kind()` is the stable,
/// machine-readable tag the CLI reports in its error record.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define DUETGRAPH_DEFINE_ERROR(Name)                                   \
  class Name : public Error {                                          \
   public:                                                             \
    explicit Name(const std::string& message) : Error(#Name, message) {} \
  }

DUETGRAPH_DEFINE_ERROR(NonFiniteState);
DUETGRAPH_DEFINE_ERROR(EmptyLeadingFrames);
DUETGRAPH_DEFINE_ERROR(BadArity);
DUETGRAPH_DEFINE_ERROR(ShapeMismatch);
DUETGRAPH_DEFINE_ERROR(SequenceTooShort);
DUETGRAPH_DEFINE_ERROR(NonFiniteLoss);
DUETGRAPH_DEFINE_ERROR(ArityMismatch);
DUETGRAPH_DEFINE_ERROR(IoError);
DUETGRAPH_DEFINE_ERROR(IndexError);

#undef DUETGRAPH_DEFINE_ERROR

/// Schema violation in a configuration document. Carries the offending field.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& message)
      : Error("ConfigError", field.empty() ? message : field + ": " + message),
        field_(std::move(field)),
        message_(message) {}

  const std::string& field() const noexcept { return field_; }
  const std::string& message() const noexcept { return message_; }

 private:
  std::string field_;
  std::string message_;
};

}  // namespace duetgraph
