// Copyright (C) 2026 The poolsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "poolsim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace poolsim {

RequestMetrics per_request_metrics(const Request& r) {
  if (!r.completed() || !r.has_ordered_chain()) {
    throw IncompleteRequest("request " + std::to_string(r.id) + " has no complete timestamp chain");
  }
  const Timestamps& t = r.timestamps;
  RequestMetrics m;
  m.ttft = t.first_token - t.arrival;
  m.e2e = t.completion - t.arrival;
  if (r.realized_osl >= 2) {
    m.tpot = (t.completion - t.first_token) / static_cast<double>(r.realized_osl - 1);
    m.degenerate = t.completion == t.first_token;
  }
  return m;
}

double nearest_rank(std::vector<double> values, double percentile) {
  if (values.empty()) return std::nan("");
  std::sort(values.begin(), values.end());
  const auto n = static_cast<double>(values.size());
  auto rank = static_cast<std::size_t>(std::ceil(percentile / 100.0 * n));
  rank = std::clamp<std::size_t>(rank, 1, values.size());
  return values[rank - 1];
}

namespace {

LatencyStats stats(const std::vector<double>& v) {
  if (v.empty()) return {std::nan(""), std::nan(""), std::nan("")};
  double sum = 0;
  for (double x : v) sum += x;
  return {sum / static_cast<double>(v.size()), nearest_rank(v, 50), nearest_rank(v, 99)};
}

}  // namespace

RunSummary summarize(std::span<const Request> in_window, const ClusterConfig& config, const WorkloadSpec& spec) {
  if (in_window.empty()) throw EmptyWindow();
  std::vector<double> ttft, tpot;
  double decode_time = 0;
  std::int64_t decode_tokens = 0;
  RunSummary s;
  for (const Request& r : in_window) {
    const RequestMetrics m = per_request_metrics(r);
    ttft.push_back(m.ttft);
    if (m.tpot) {
      tpot.push_back(*m.tpot);
      decode_time += r.timestamps.completion - r.timestamps.first_token;
      decode_tokens += r.realized_osl - 1;
    }
    s.output_tokens += r.realized_osl;
  }
  s.completed = static_cast<std::int64_t>(in_window.size());
  s.ttft = stats(ttft);
  s.tpot = stats(tpot);
  s.itl_mean = decode_tokens > 0 ? decode_time / static_cast<double>(decode_tokens) : std::nan("");
  s.interactivity_tok_s = 1.0 / s.tpot.mean;
  const double window = spec.measurement_window;
  s.output_throughput_tok_s = static_cast<double>(s.output_tokens) / window;
  s.throughput_per_decode_gpu = s.output_throughput_tok_s / config.decode_pool_size;
  s.throughput_per_gpu_all = s.output_throughput_tok_s / (config.n_prefill_workers() + config.decode_pool_size);
  s.achieved_rps = static_cast<double>(s.completed) / window;
  s.offered_rps = spec.total_rps;
  s.achieved_offered_ratio = s.achieved_rps / s.offered_rps;
  return s;
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string summary_csv_header() {
  return "config_hash,decode_pool_mode,decode_pool_size,alpha,isl,osl,offered_rps,"
         "completed,output_tokens,ttft_mean_ms,ttft_p50_ms,ttft_p99_ms,tpot_mean_ms,tpot_p50_ms,tpot_p99_ms,"
         "itl_mean_ms,interactivity_tok_s,output_throughput_tok_s,throughput_per_decode_gpu,"
         "throughput_per_gpu_all,achieved_rps,achieved_offered_ratio";
}

std::string summary_csv_row(const SummaryContext& c, const RunSummary* s) {
  std::string row = c.config_hash + ',' + to_string(c.mode) + ',' + std::to_string(c.decode_pool_size) + ',' +
                    format_number(c.alpha) + ',' + std::to_string(c.isl) + ',' + std::to_string(c.osl) + ',' +
                    format_number(c.offered_rps);
  if (s == nullptr) return row + std::string(15, ',');
  const double ms = 1e3;
  for (double v : {static_cast<double>(s->completed), static_cast<double>(s->output_tokens), s->ttft.mean * ms,
                   s->ttft.p50 * ms, s->ttft.p99 * ms, s->tpot.mean * ms, s->tpot.p50 * ms, s->tpot.p99 * ms,
                   s->itl_mean * ms, s->interactivity_tok_s, s->output_throughput_tok_s, s->throughput_per_decode_gpu,
                   s->throughput_per_gpu_all, s->achieved_rps, s->achieved_offered_ratio}) {
    row += ',' + format_number(v);
  }
  return row;
}

}  // namespace poolsim
