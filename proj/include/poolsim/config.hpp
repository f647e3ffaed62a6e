// Copyright (C) 2026 The poolsim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <json.hpp>
#include <string>
#include <vector>

#include "poolsim/costmodel.hpp"
#include "poolsim/domain.hpp"
#include "poolsim/engine.hpp"
#include "poolsim/workload.hpp"

namespace poolsim {

// Everything one simulation run needs, loadable from a single JSON file with
// sections cluster / routing / workload / cost / engine. See README for keys.
struct ExperimentConfig {
  ClusterConfig cluster;
  WorkloadSpec workload;
  CostParams cost;
  std::size_t max_outstanding_requests = 1'000'000;
};

// Reads a config; unknown keys, wrong types and every invariant violation are
// collected and thrown together as InvalidConfig.
ExperimentConfig parse_experiment(const nlohmann::json& j);
ExperimentConfig load_experiment_file(const std::string& path);

// Canonical form (explicit model list, every key present).
nlohmann::json to_json(const ExperimentConfig& config);
nlohmann::json to_json(const CostParams& cost);
CostParams parse_cost_params(const nlohmann::json& j);

std::vector<Violation> check_experiment(const ExperimentConfig& config);

// FNV-1a 64 of the canonical JSON dump, as 16 hex digits.
std::string config_hash(const ExperimentConfig& config);

nlohmann::json read_json_file(const std::string& path);

// Key-by-key summary of the config schema, printed by the CLI on config errors.
extern const char* const kConfigSchemaHelp;

}  // namespace poolsim
