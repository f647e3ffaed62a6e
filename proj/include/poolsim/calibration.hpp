// Copyright (C) 2026 The poolsim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "poolsim/costmodel.hpp"

namespace poolsim {

// One measured single-stream operating point. Either metric may be absent.
struct CalibrationTarget {
  std::string model;
  int prefill_bits = 16;
  int decode_bits = 16;
  Tokens isl = 1;
  Tokens osl = 2;
  int concurrency = 1;
  std::optional<double> ttft_ms;
  std::optional<double> tpot_ms;
};

struct TargetResidual {
  std::size_t target_index = 0;
  std::string metric;  // "ttft" or "tpot"
  double measured_ms = 0;
  double predicted_ms = 0;
  double rel_error = 0;
};

struct CalibrationResult {
  CostParams params;
  std::vector<TargetResidual> residuals;
  double max_rel_error = 0;
};

class CalibrationInfeasible : public Error {
 public:
  CalibrationInfeasible(const std::string& reason, CalibrationResult best);
  const CalibrationResult& best() const noexcept { return best_; }

 private:
  CalibrationResult best_;
};

// Fits CostParams to concurrency-1 targets by relative-error weighted least
// squares on the affine forms of prefill and decode time. `backbone` supplies
// param_count and kv_bytes_per_token; each target's bit widths override its
// precision. Rows with concurrency != 1 are ignored.
//
// Identification rules, in order: a precision column with no rows is dropped
// (its coefficient is not fitted); if the remaining columns are still rank
// deficient the fixed-overhead column is pinned to zero; a negative fitted
// overhead is pinned to zero and the slopes refit. prefill_flops_per_token is
// fixed at 2 * param_count and mfu absorbs the fitted prefill slope.
CalibrationResult calibrate(std::span<const CalibrationTarget> targets, const ModelProfile& backbone,
                            const GpuSpec& gpu, double tolerance = 0.03);

// Closed-form predictions used both for fitting checks and reporting.
// TTFT = prefill + KV transfer; TPOT = mean decode step over osl - 1 steps
// whose resident KV grows from isl to isl + osl - 2.
Seconds predicted_ttft(const CalibrationTarget& target, const ModelProfile& backbone, const CostParams& params,
                       const GpuSpec& gpu);
Seconds predicted_tpot(const CalibrationTarget& target, const ModelProfile& backbone, const CostParams& params,
                       const GpuSpec& gpu);

// CSV with header: model,prefill_bits,decode_bits,isl,osl,concurrency,ttft_ms,tpot_ms
// Empty ttft_ms / tpot_ms cells mean "not measured".
std::vector<CalibrationTarget> read_targets_csv(std::istream& in);
std::vector<CalibrationTarget> read_targets_csv_file(const std::string& path);

}  // namespace poolsim
