// Copyright (C) 2026 The poolsim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "poolsim/domain.hpp"

namespace poolsim {

// Load view of one decode worker at dispatch time.
struct WorkerSnapshot {
  int worker_id = 0;
  Tokens resident_kv_tokens = 0;       // KV of the active batch
  Tokens queued_isl_tokens = 0;        // prompts in transit to, or waiting at, the worker
  Tokens remaining_decode_tokens = 0;  // tokens still to generate for queued + active requests
};

Tokens outstanding_load(const WorkerSnapshot& w, LoadMetric metric) noexcept;

struct RoutingPolicy {
  std::vector<int> prefill_worker;  // model_id -> prefill worker id
  DecodeRule decode_rule = DecodeRule::kLeastOutstandingTokens;
  std::vector<int> pinned_decode_worker;  // model_id -> decode worker id (kPinned only)
  LoadMetric load_metric = LoadMetric::kOutstandingTokens;
  std::uint64_t seed = 0;
};

// Identity prefill map; pinned map model m -> decode worker m mod K.
RoutingPolicy make_routing_policy(const ClusterConfig& config);

int route_prefill(const Request& request, const RoutingPolicy& policy);

// Centralized decode dispatcher. Holds the round-robin cursor and the RNG of
// the weighted-random rule; every other rule is a pure function of its inputs.
// Shared-pool rules never read request.model_id.
class DecodeDispatcher {
 public:
  explicit DecodeDispatcher(RoutingPolicy policy);

  int route(const Request& request, std::span<const WorkerSnapshot> pool);

  const RoutingPolicy& policy() const noexcept { return policy_; }

 private:
  RoutingPolicy policy_;
  std::size_t next_ = 0;
  std::mt19937_64 rng_;
};

}  // namespace poolsim
