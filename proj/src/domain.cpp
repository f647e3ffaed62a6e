// Copyright (C) 2026 The poolsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "poolsim/domain.hpp"

#include <cmath>
#include <string>

namespace poolsim {

InvalidConfig::InvalidConfig(std::vector<Violation> violations)
    : Error("InvalidConfig",
            [&] {
              std::string msg = "invalid configuration";
              for (const auto& v : violations) msg += "\n  " + v.path + ": " + v.message;
              return msg;
            }()),
      violations_(std::move(violations)) {}

UnknownModel::UnknownModel(int model_id)
    : Error("UnknownModel", "no prefill worker serves model " + std::to_string(model_id)) {}

SimulationDiverged::SimulationDiverged(double time, std::size_t outstanding)
    : Error("SimulationDiverged", "outstanding requests reached " + std::to_string(outstanding) +
                                      " at t=" + std::to_string(time) + " s") {}

bool Request::has_ordered_chain() const noexcept {
  const Timestamps& t = timestamps;
  const double chain[] = {t.arrival, t.prefill_start, t.prefill_end, t.transfer_end, t.first_token, t.completion};
  for (double v : chain) {
    if (std::isnan(v)) return false;
  }
  for (std::size_t i = 1; i < std::size(chain); ++i) {
    if (chain[i] < chain[i - 1]) return false;
  }
  return true;
}

bool ModelProfile::shares_decoder_with(const ModelProfile& other) const noexcept {
  if (model_id == other.model_id) return true;
  return shared_decoder && other.shared_decoder && param_count == other.param_count &&
         decode_weight_bits == other.decode_weight_bits;
}

DecodeRule ClusterConfig::effective_decode_rule() const noexcept {
  if (decode_rule != DecodeRule::kAuto) return decode_rule;
  return decode_pool_mode == DecodePoolMode::kIsolated ? DecodeRule::kPinned
                                                       : DecodeRule::kLeastOutstandingTokens;
}

namespace {

bool valid_bits(int bits) { return bits == 16 || bits == 4; }

}  // namespace

std::vector<Violation> check_cluster(const ClusterConfig& config) {
  std::vector<Violation> out;
  auto fail = [&](std::string path, std::string msg) { out.push_back({std::move(path), std::move(msg)}); };

  if (config.models.empty()) fail("cluster.models", "at least one model is required");
  for (std::size_t i = 0; i < config.models.size(); ++i) {
    const ModelProfile& m = config.models[i];
    const std::string p = "cluster.models[" + std::to_string(i) + "]";
    if (m.model_id != static_cast<int>(i)) fail(p + ".model_id", "must equal the model's index (popularity rank - 1)");
    if (m.param_count <= 0) fail(p + ".param_count", "must be > 0");
    if (!valid_bits(m.prefill_weight_bits)) fail(p + ".prefill_weight_bits", "must be 16 or 4");
    if (!valid_bits(m.decode_weight_bits)) fail(p + ".decode_weight_bits", "must be 16 or 4");
    if (m.kv_bytes_per_token <= 0) fail(p + ".kv_bytes_per_token", "must be > 0");
    if (m.prefill_weight_bytes() > config.gpu.hbm_capacity)
      fail(p + ".param_count", "prefill weights exceed gpu.hbm_capacity");
    if (m.decode_weight_bytes() > config.gpu.hbm_capacity)
      fail(p + ".param_count", "decode weights exceed gpu.hbm_capacity");
  }

  // Models flagged as using the shared decoder must agree on its parameters.
  const ModelProfile* first_shared = nullptr;
  for (std::size_t i = 0; i < config.models.size(); ++i) {
    const ModelProfile& m = config.models[i];
    if (!m.shared_decoder) continue;
    if (first_shared == nullptr) {
      first_shared = &m;
      continue;
    }
    const std::string p = "cluster.models[" + std::to_string(i) + "]";
    if (m.decode_weight_bits != first_shared->decode_weight_bits)
      fail(p + ".decode_weight_bits", "shared decoder requires identical decode_weight_bits across models");
    if (m.param_count != first_shared->param_count)
      fail(p + ".param_count", "shared decoder requires identical param_count across models");
  }

  const GpuSpec& g = config.gpu;
  if (!(g.flops > 0)) fail("cluster.gpu.flops", "must be > 0");
  if (!(g.hbm_bandwidth > 0)) fail("cluster.gpu.hbm_bandwidth", "must be > 0");
  if (g.hbm_capacity <= 0) fail("cluster.gpu.hbm_capacity", "must be > 0");
  if (!(g.interconnect_bandwidth > 0)) fail("cluster.gpu.interconnect_bandwidth", "must be > 0");
  if (!(g.interconnect_latency >= 0)) fail("cluster.gpu.interconnect_latency", "must be >= 0");

  if (config.decode_pool_size < 1) fail("cluster.decode_pool_size", "must be >= 1");
  if (config.decode_pool_mode == DecodePoolMode::kIsolated) {
    if (config.decode_pool_size != config.n_models())
      fail("cluster.decode_pool_size", "isolated mode requires decode_pool_size == number of models (" +
                                           std::to_string(config.n_models()) + ")");
    if (config.decode_rule != DecodeRule::kAuto && config.decode_rule != DecodeRule::kPinned)
      fail("routing.decode_rule", "isolated mode only accepts the pinned rule");
  } else {
    for (std::size_t i = 0; i < config.models.size(); ++i) {
      if (!config.models[i].shared_decoder)
        fail("cluster.models[" + std::to_string(i) + "].shared_decoder", "shared decode pool requires shared_decoder=true");
    }
  }
  return out;
}

const ClusterConfig& validate_cluster(const ClusterConfig& config) {
  auto violations = check_cluster(config);
  if (!violations.empty()) throw InvalidConfig(std::move(violations));
  return config;
}

Bytes decode_worker_weight_bytes(const ClusterConfig& config, int pool_index) {
  if (config.decode_pool_mode == DecodePoolMode::kShared) return config.models.front().decode_weight_bytes();
  return config.models.at(static_cast<std::size_t>(pool_index)).decode_weight_bytes();
}

const char* to_string(DecodePoolMode mode) {
  return mode == DecodePoolMode::kShared ? "shared" : "isolated";
}

const char* to_string(DecodeRule rule) {
  switch (rule) {
    case DecodeRule::kAuto: return "auto";
    case DecodeRule::kPinned: return "pinned";
    case DecodeRule::kLeastOutstandingTokens: return "least_outstanding_tokens";
    case DecodeRule::kRoundRobin: return "round_robin";
    case DecodeRule::kWeightedRandom: return "weighted_random";
  }
  return "?";
}

const char* to_string(LoadMetric metric) {
  return metric == LoadMetric::kKvOnly ? "kv_only" : "outstanding_tokens";
}

const char* to_string(RequestOutcome outcome) {
  switch (outcome) {
    case RequestOutcome::kPending: return "pending";
    case RequestOutcome::kCompleted: return "completed";
    case RequestOutcome::kOverCapacity: return "over_capacity";
    case RequestOutcome::kUnfinished: return "unfinished";
  }
  return "?";
}

DecodePoolMode parse_pool_mode(const std::string& s) {
  if (s == "shared") return DecodePoolMode::kShared;
  if (s == "isolated") return DecodePoolMode::kIsolated;
  throw std::invalid_argument("expected 'shared' or 'isolated', got '" + s + "'");
}

DecodeRule parse_decode_rule(const std::string& s) {
  for (DecodeRule r : {DecodeRule::kAuto, DecodeRule::kPinned, DecodeRule::kLeastOutstandingTokens,
                       DecodeRule::kRoundRobin, DecodeRule::kWeightedRandom}) {
    if (s == to_string(r)) return r;
  }
  throw std::invalid_argument(
      "expected one of auto, pinned, least_outstanding_tokens, round_robin, weighted_random; got '" + s + "'");
}

LoadMetric parse_load_metric(const std::string& s) {
  if (s == "outstanding_tokens") return LoadMetric::kOutstandingTokens;
  if (s == "kv_only") return LoadMetric::kKvOnly;
  throw std::invalid_argument("expected 'outstanding_tokens' or 'kv_only', got '" + s + "'");
}

}  // namespace poolsim
