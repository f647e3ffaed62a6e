// Copyright (C) 2026 The poolsim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "poolsim/domain.hpp"
#include "poolsim/workload.hpp"

namespace poolsim {

struct RequestMetrics {
  Seconds ttft = 0;
  std::optional<Seconds> tpot;  // absent when realized_osl == 1
  Seconds e2e = 0;
  bool degenerate = false;      // realized_osl >= 2 but no time elapsed after the first token
};

// Throws IncompleteRequest unless the request completed with an ordered chain.
RequestMetrics per_request_metrics(const Request& request);

struct LatencyStats {
  Seconds mean = 0;
  Seconds p50 = 0;
  Seconds p99 = 0;
};

// Nearest-rank percentile: the ceil(p/100 * n)-th smallest value (1-based).
double nearest_rank(std::vector<double> values, double percentile);

struct RunSummary {
  LatencyStats ttft;
  LatencyStats tpot;  // over requests with realized_osl >= 2, per-request mean
  Seconds itl_mean = 0;  // token-weighted inter-token latency
  double interactivity_tok_s = 0;  // 1 / tpot.mean
  double output_throughput_tok_s = 0;
  double throughput_per_decode_gpu = 0;
  double throughput_per_gpu_all = 0;  // prefill + decode GPUs in the denominator
  double achieved_rps = 0;
  double offered_rps = 0;
  double achieved_offered_ratio = 0;
  std::int64_t completed = 0;
  std::int64_t output_tokens = 0;
};

// Aggregates requests already passed through measurement_filter. Throws
// EmptyWindow when `in_window` is empty.
RunSummary summarize(std::span<const Request> in_window, const ClusterConfig& config, const WorkloadSpec& spec);

// Columns shared by every RunSummary CSV row, in fixed order.
struct SummaryContext {
  std::string config_hash;
  DecodePoolMode mode = DecodePoolMode::kShared;
  int decode_pool_size = 0;
  double alpha = 0;
  Tokens isl = 0;
  Tokens osl = 0;
  double offered_rps = 0;
};

std::string summary_csv_header();
// `summary` may be null for failed runs; the metric columns are then empty.
std::string summary_csv_row(const SummaryContext& context, const RunSummary* summary);

// %.10g; shared by every CSV writer so rows compare byte-for-byte.
std::string format_number(double v);

}  // namespace poolsim
