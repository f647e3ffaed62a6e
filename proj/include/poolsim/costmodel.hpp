// Copyright (C) 2026 The poolsim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include "poolsim/domain.hpp"

namespace poolsim {

// First-order roofline constants. Prefill is priced as compute, decode steps as
// HBM traffic (decoder weights once per step plus every member's KV).
struct CostParams {
  double prefill_flops_per_token = 2 * 8.03e9;
  Seconds prefill_fixed_overhead = 0.0;
  Seconds decode_fixed_overhead = 0.0;
  double dequant_compute_penalty = 1.0;  // applied to prefill compute when prefill_weight_bits < 16
  double mfu = 0.5;
  double mbu = 0.8;
};

std::vector<Violation> check_cost_params(const CostParams& params);

// Seconds for one prefill launch over `isl` prompt tokens.
Seconds prefill_time(const ModelProfile& model, Tokens isl, const CostParams& params, const GpuSpec& gpu);

struct BatchMember {
  const ModelProfile* model = nullptr;
  Tokens resident_kv_tokens = 0;
};

// One decode step over `batch`. Throws MixedDecoderError unless every member
// decodes with the same weights.
Seconds decode_step_time(std::span<const BatchMember> batch, Bytes decoder_weight_bytes, const CostParams& params,
                         const GpuSpec& gpu);

// Same pricing, from the batch's total KV bytes; the engine keeps that total
// incrementally and calls this directly.
Seconds decode_step_time_from_bytes(Bytes decoder_weight_bytes, Bytes batch_kv_bytes, const CostParams& params,
                                    const GpuSpec& gpu) noexcept;

// Prefill -> decode KV copy.
Seconds transfer_time(const KvHandle& kv, const GpuSpec& gpu);

}  // namespace poolsim
