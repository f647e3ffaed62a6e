// Copyright (C) 2026 The poolsim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "poolsim/config.hpp"
#include "poolsim/engine.hpp"
#include "poolsim/metrics.hpp"

namespace poolsim {

struct ExperimentOutcome {
  RunResult run;
  std::optional<RunSummary> summary;
  std::string error_kind;  // empty on success
  std::string error_message;
};

// generate_trace -> run (horizon = workload.horizon()) -> measurement_filter
// -> summarize. Simulation errors and empty windows are reported in the
// outcome, not thrown; invalid configs still throw InvalidConfig.
ExperimentOutcome run_experiment(const ExperimentConfig& config, EngineOptions options = {});

// Same, on a caller-provided trace (replay).
ExperimentOutcome run_experiment_on_trace(const ExperimentConfig& config, std::span<const Request> trace,
                                          EngineOptions options = {});

SummaryContext summary_context(const ExperimentConfig& config);

// Axis values are applied in this fixed nesting order (first = outermost):
// decode_pool_mode, decode_pool_size, alpha, osl, isl, offered_rps,
// decode_weight_bits, decode_rule, seed. Empty axes keep the base value.
struct SweepAxes {
  std::vector<DecodePoolMode> decode_pool_mode;
  std::vector<int> decode_pool_size;
  std::vector<double> alpha;
  std::vector<Tokens> osl;
  std::vector<Tokens> isl;
  std::vector<double> offered_rps;
  std::vector<int> decode_weight_bits;
  std::vector<DecodeRule> decode_rule;
  std::vector<std::uint64_t> seed;
};

struct SweepSpec {
  ExperimentConfig base;
  SweepAxes axes;
  int replicates = 1;
  std::size_t max_cells = 10'000;
};

SweepSpec parse_sweep(const nlohmann::json& j, const std::string& base_dir = ".");
SweepSpec load_sweep_file(const std::string& path);

// Cell configs in output order (no validation; invalid cells become error rows).
std::vector<ExperimentConfig> expand_cells(const SweepSpec& spec);

struct SweepRow {
  std::size_t cell = 0;
  int replicate = 0;
  ExperimentConfig config;  // replicate seed applied
  std::string config_hash;
  std::optional<RunSummary> summary;
  std::string error_kind;
  std::string error_message;
};

// One row per (cell, replicate), ordered by cell then replicate. Cells run on
// up to `parallel` threads; output order and content do not depend on it.
// Replicate r runs with workload.seed + r.
std::vector<SweepRow> run_sweep(const SweepSpec& spec, int parallel = 1);

std::string sweep_csv_header();
void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);
void write_sweep_json(std::ostream& out, const std::vector<SweepRow>& rows);
// offered_rps,alpha,mode,ratio (failed cells omitted).
void write_ratio_grid_csv(std::ostream& out, const std::vector<SweepRow>& rows);

nlohmann::json to_json(const RunSummary& s);

}  // namespace poolsim
