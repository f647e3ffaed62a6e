// Copyright (C) 2026 The poolsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "poolsim/costmodel.hpp"

#include <cassert>

namespace poolsim {

std::vector<Violation> check_cost_params(const CostParams& p) {
  std::vector<Violation> out;
  if (!(p.prefill_flops_per_token > 0)) out.push_back({"cost.prefill_flops_per_token", "must be > 0"});
  if (!(p.prefill_fixed_overhead >= 0)) out.push_back({"cost.prefill_fixed_overhead", "must be >= 0"});
  if (!(p.decode_fixed_overhead >= 0)) out.push_back({"cost.decode_fixed_overhead", "must be >= 0"});
  if (!(p.dequant_compute_penalty >= 1)) out.push_back({"cost.dequant_compute_penalty", "must be >= 1"});
  if (!(p.mfu > 0 && p.mfu <= 1)) out.push_back({"cost.mfu", "must be in (0, 1]"});
  if (!(p.mbu > 0 && p.mbu <= 1)) out.push_back({"cost.mbu", "must be in (0, 1]"});
  return out;
}

Seconds prefill_time(const ModelProfile& model, Tokens isl, const CostParams& params, const GpuSpec& gpu) {
  assert(isl >= 1);
  const double penalty = model.prefill_weight_bits < 16 ? params.dequant_compute_penalty : 1.0;
  const double compute = static_cast<double>(isl) * params.prefill_flops_per_token / (params.mfu * gpu.flops);
  return params.prefill_fixed_overhead + penalty * compute;
}

Seconds decode_step_time_from_bytes(Bytes decoder_weight_bytes, Bytes batch_kv_bytes, const CostParams& params,
                                    const GpuSpec& gpu) noexcept {
  const double traffic = static_cast<double>(decoder_weight_bytes) + static_cast<double>(batch_kv_bytes);
  return params.decode_fixed_overhead + traffic / (params.mbu * gpu.hbm_bandwidth);
}

Seconds decode_step_time(std::span<const BatchMember> batch, Bytes decoder_weight_bytes, const CostParams& params,
                         const GpuSpec& gpu) {
  assert(!batch.empty());
  const ModelProfile& head = *batch.front().model;
  Bytes kv_bytes = 0;
  for (const BatchMember& m : batch) {
    if (!head.shares_decoder_with(*m.model)) {
      throw MixedDecoderError("models " + std::to_string(head.model_id) + " and " +
                              std::to_string(m.model->model_id) + " do not share decoder weights");
    }
    kv_bytes += m.resident_kv_tokens * m.model->kv_bytes_per_token;
  }
  return decode_step_time_from_bytes(decoder_weight_bytes, kv_bytes, params, gpu);
}

Seconds transfer_time(const KvHandle& kv, const GpuSpec& gpu) {
  assert(kv.resident_tokens >= 1);
  return gpu.interconnect_latency + static_cast<double>(kv.total_bytes()) / gpu.interconnect_bandwidth;
}

}  // namespace poolsim
