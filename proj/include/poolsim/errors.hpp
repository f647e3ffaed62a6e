// Copyright (C) 2026 The poolsim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace poolsim {

// Base for every user-facing failure. `kind()` is the stable machine-readable
// name printed by the CLI error report.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

struct Violation {
  std::string path;
  std::string message;
};

class InvalidConfig : public Error {
 public:
  explicit InvalidConfig(std::vector<Violation> violations);
  InvalidConfig(std::string path, std::string message)
      : InvalidConfig(std::vector<Violation>{{std::move(path), std::move(message)}}) {}
  const std::vector<Violation>& violations() const noexcept { return violations_; }

 private:
  std::vector<Violation> violations_;
};

class MixedDecoderError : public Error {
 public:
  explicit MixedDecoderError(const std::string& message) : Error("MixedDecoderError", message) {}
};

class UnknownModel : public Error {
 public:
  explicit UnknownModel(int model_id);
};

class EmptyPool : public Error {
 public:
  EmptyPool() : Error("EmptyPool", "decode pool is empty") {}
};

class SimulationDiverged : public Error {
 public:
  SimulationDiverged(double time, std::size_t outstanding);
};

class IncompleteRequest : public Error {
 public:
  explicit IncompleteRequest(const std::string& message) : Error("IncompleteRequest", message) {}
};

class EmptyWindow : public Error {
 public:
  EmptyWindow() : Error("EmptyWindow", "no requests completed inside the measurement window") {}
};

}  // namespace poolsim
