// Copyright (C) 2026 The poolsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "poolsim/routing.hpp"

namespace poolsim {

Tokens outstanding_load(const WorkerSnapshot& w, LoadMetric metric) noexcept {
  const Tokens kv = w.resident_kv_tokens + w.queued_isl_tokens;
  return metric == LoadMetric::kKvOnly ? kv : kv + w.remaining_decode_tokens;
}

RoutingPolicy make_routing_policy(const ClusterConfig& config) {
  RoutingPolicy p;
  p.decode_rule = config.effective_decode_rule();
  p.load_metric = config.load_metric;
  p.seed = config.routing_seed;
  for (int m = 0; m < config.n_models(); ++m) {
    p.prefill_worker.push_back(config.prefill_worker_id(m));
    p.pinned_decode_worker.push_back(config.decode_worker_id(m % config.decode_pool_size));
  }
  return p;
}

int route_prefill(const Request& request, const RoutingPolicy& policy) {
  if (request.model_id < 0 || static_cast<std::size_t>(request.model_id) >= policy.prefill_worker.size())
    throw UnknownModel(request.model_id);
  return policy.prefill_worker[static_cast<std::size_t>(request.model_id)];
}

DecodeDispatcher::DecodeDispatcher(RoutingPolicy policy) : policy_(std::move(policy)), rng_(policy_.seed) {}

int DecodeDispatcher::route(const Request& request, std::span<const WorkerSnapshot> pool) {
  if (pool.empty()) throw EmptyPool();
  switch (policy_.decode_rule) {
    case DecodeRule::kAuto:
    case DecodeRule::kPinned: {
      if (request.model_id < 0 || static_cast<std::size_t>(request.model_id) >= policy_.pinned_decode_worker.size())
        throw UnknownModel(request.model_id);
      return policy_.pinned_decode_worker[static_cast<std::size_t>(request.model_id)];
    }
    case DecodeRule::kLeastOutstandingTokens: {
      const WorkerSnapshot* best = &pool.front();
      Tokens best_load = outstanding_load(*best, policy_.load_metric);
      for (const WorkerSnapshot& w : pool.subspan(1)) {
        const Tokens load = outstanding_load(w, policy_.load_metric);
        if (load < best_load || (load == best_load && w.worker_id < best->worker_id)) {
          best = &w;
          best_load = load;
        }
      }
      return best->worker_id;
    }
    case DecodeRule::kRoundRobin: {
      const int id = pool[next_ % pool.size()].worker_id;
      ++next_;
      return id;
    }
    case DecodeRule::kWeightedRandom: {
      // Weight 1 / (1 + load): inversely proportional to outstanding tokens,
      // finite for idle workers.
      std::vector<double> cumulative;
      cumulative.reserve(pool.size());
      double total = 0;
      for (const WorkerSnapshot& w : pool) {
        total += 1.0 / (1.0 + static_cast<double>(outstanding_load(w, policy_.load_metric)));
        cumulative.push_back(total);
      }
      const double u = static_cast<double>(rng_() >> 11) * 0x1.0p-53 * total;
      for (std::size_t i = 0; i < pool.size(); ++i) {
        if (u < cumulative[i]) return pool[i].worker_id;
      }
      return pool.back().worker_id;
    }
  }
  return pool.front().worker_id;
}

}  // namespace poolsim
