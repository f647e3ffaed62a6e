// Copyright (C) 2026 The poolsim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "poolsim/domain.hpp"

namespace poolsim {

enum class ArrivalProcess { kPoisson, kDeterministicInterval };

struct WorkloadSpec {
  int n_models = 4;
  double total_rps = 1.0;
  double alpha = 0.0;
  Tokens isl = 1024;
  Tokens osl = 256;
  Seconds grace_period = 30.0;
  Seconds measurement_window = 60.0;
  // Arrivals keep coming for drain_factor * measurement_window after the
  // window closes so the window is not followed by an artificial lull.
  double drain_factor = 2.0;
  std::uint64_t seed = 42;
  ArrivalProcess arrival_process = ArrivalProcess::kPoisson;

  Seconds window_start() const noexcept { return grace_period; }
  Seconds window_end() const noexcept { return grace_period + measurement_window; }
  Seconds horizon() const noexcept { return window_end() + drain_factor * measurement_window; }
};

std::vector<Violation> check_workload(const WorkloadSpec& spec);

// Per-model offered rates: R_i = R_total * i^-alpha / sum_j j^-alpha, rank i = model_id + 1.
std::vector<double> zipf_split(int n_models, double alpha, double total_rps);

// Seed of model `model_id`'s arrival substream (SplitMix64 finalizer over
// seed + (model_id + 1) * golden-ratio increment). Each substream drives a
// std::mt19937_64.
std::uint64_t substream_seed(std::uint64_t seed, int model_id) noexcept;

// Open-loop arrivals on [0, spec.horizon()], one stream per model, merged in
// (arrival_ns, model_id) order and numbered 0..n-1. Arrival times are whole
// nanoseconds. Poisson gaps are -log1p(-u) / R_i with u a 53-bit uniform taken
// from the top bits of each mt19937_64 draw; deterministic-interval arrivals
// fall at k / R_i, k = 0, 1, ...
std::vector<Request> generate_trace(const WorkloadSpec& spec);

// Completed requests whose completion time lies in the closed window
// [grace_period, grace_period + measurement_window].
std::vector<Request> measurement_filter(std::span<const Request> requests, const WorkloadSpec& spec);

std::int64_t to_ns(Seconds t) noexcept;
Seconds from_ns(std::int64_t ns) noexcept;

// Line format: arrival_time_ns,model_id,isl,osl (with that header line).
void write_trace(std::ostream& out, std::span<const Request> trace);
std::vector<Request> read_trace(std::istream& in);
std::vector<Request> read_trace_file(const std::string& path);

const char* to_string(ArrivalProcess p);
ArrivalProcess parse_arrival_process(const std::string& s);

}  // namespace poolsim
