// Copyright (C) 2026 The poolsim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "poolsim/errors.hpp"

namespace poolsim {

using Seconds = double;
using Tokens = std::int64_t;
using Bytes = std::int64_t;

inline constexpr Seconds kUnset = std::numeric_limits<double>::quiet_NaN();

enum class WorkerRole { kPrefill, kDecode };
enum class DecodePoolMode { kIsolated, kShared };

// Decode dispatch rule. kAuto resolves to kPinned in isolated mode and
// kLeastOutstandingTokens in shared mode.
enum class DecodeRule { kAuto, kPinned, kLeastOutstandingTokens, kRoundRobin, kWeightedRandom };

// What the load-aware rules count as a worker's outstanding work.
enum class LoadMetric { kOutstandingTokens, kKvOnly };

enum class RequestOutcome { kPending, kCompleted, kOverCapacity, kUnfinished };

struct Timestamps {
  Seconds arrival = kUnset;
  Seconds prefill_start = kUnset;
  Seconds prefill_end = kUnset;
  Seconds transfer_end = kUnset;
  Seconds first_token = kUnset;
  Seconds completion = kUnset;
};

struct Request {
  std::int64_t id = 0;
  int model_id = 0;
  Seconds arrival_time = 0.0;
  Tokens isl = 1;
  Tokens target_osl = 1;
  Tokens realized_osl = 0;
  Timestamps timestamps;
  RequestOutcome outcome = RequestOutcome::kPending;

  bool completed() const noexcept { return outcome == RequestOutcome::kCompleted; }
  // True when every timestamp is set and they are monotone in lifecycle order.
  bool has_ordered_chain() const noexcept;
};

// Where a KV cache currently lives. kInTransit marks the prefill -> decode hop.
inline constexpr int kInTransit = -1;

struct KvHandle {
  std::int64_t request_id = 0;
  Tokens resident_tokens = 0;
  Bytes bytes_per_token = 0;
  int location = kInTransit;

  Bytes total_bytes() const noexcept { return resident_tokens * bytes_per_token; }
};

struct ModelProfile {
  int model_id = 0;
  std::string name;
  std::int64_t param_count = 0;
  int prefill_weight_bits = 16;
  int decode_weight_bits = 16;
  Bytes kv_bytes_per_token = 0;
  bool shared_decoder = true;

  Bytes prefill_weight_bytes() const noexcept { return param_count * prefill_weight_bits / 8; }
  Bytes decode_weight_bytes() const noexcept { return param_count * decode_weight_bits / 8; }
  // Two models can share one decode batch iff they decode with the same weights.
  bool shares_decoder_with(const ModelProfile& other) const noexcept;
};

struct GpuSpec {
  double flops = 312e12;                    // FLOP/s
  double hbm_bandwidth = 2.039e12;          // bytes/s
  Bytes hbm_capacity = 80'000'000'000;      // usable bytes
  double interconnect_bandwidth = 100e9;    // bytes/s
  Seconds interconnect_latency = 1e-3;
};

struct ClusterConfig {
  std::vector<ModelProfile> models;
  DecodePoolMode decode_pool_mode = DecodePoolMode::kShared;
  int decode_pool_size = 1;
  DecodeRule decode_rule = DecodeRule::kAuto;
  LoadMetric load_metric = LoadMetric::kOutstandingTokens;
  std::uint64_t routing_seed = 0;
  GpuSpec gpu;

  int n_models() const noexcept { return static_cast<int>(models.size()); }
  int n_prefill_workers() const noexcept { return n_models(); }
  // Global worker ids: prefill workers are [0, N), decode workers [N, N + K).
  int prefill_worker_id(int model_id) const noexcept { return model_id; }
  int decode_worker_id(int pool_index) const noexcept { return n_models() + pool_index; }
  DecodeRule effective_decode_rule() const noexcept;
};

// Returns every violated invariant; empty means valid.
std::vector<Violation> check_cluster(const ClusterConfig& config);

// Returns `config` unchanged when valid, otherwise throws InvalidConfig listing
// all violations.
const ClusterConfig& validate_cluster(const ClusterConfig& config);

// Decoder weights held by a decode worker: the shared decoder in shared mode,
// the pinned model's decoder in isolated mode.
Bytes decode_worker_weight_bytes(const ClusterConfig& config, int pool_index);

const char* to_string(DecodePoolMode mode);
const char* to_string(DecodeRule rule);
const char* to_string(LoadMetric metric);
const char* to_string(RequestOutcome outcome);
DecodePoolMode parse_pool_mode(const std::string& s);
DecodeRule parse_decode_rule(const std::string& s);
LoadMetric parse_load_metric(const std::string& s);

}  // namespace poolsim
