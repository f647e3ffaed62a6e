// Copyright (C) 2026 The poolsim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <deque>
#include <iosfwd>
#include <limits>
#include <span>
#include <vector>

#include "poolsim/costmodel.hpp"
#include "poolsim/domain.hpp"
#include "poolsim/routing.hpp"

namespace poolsim {

// Declaration order is the tie-break priority for events at equal time.
enum class EventKind {
  kArrival,
  kPrefillStart,
  kPrefillComplete,
  kTransferComplete,
  kDecodeStepComplete,
  kRequestComplete,
  kOverCapacity,  // log-only: admission rejected a request that can never fit
};

const char* to_string(EventKind kind);

struct Event {
  Seconds time = 0;
  EventKind kind = EventKind::kArrival;
  std::uint64_t seq = 0;
  std::int64_t request = -1;
  int worker = -1;
};

// Strict (time, kind, seq) ordering; suitable as a min-heap comparator.
struct EventLater {
  bool operator()(const Event& a, const Event& b) const noexcept;
};

struct EventRecord {
  Seconds time = 0;
  EventKind kind = EventKind::kArrival;
  std::int64_t request_id = -1;
  int worker_id = -1;
};

// ---------------------------------------------------------------------------
// Prefill workers: single occupancy, FIFO.

struct PrefillWorkerState {
  int worker_id = 0;
  int model_id = 0;
  std::deque<std::int64_t> queue;  // request indices
  bool busy = false;
  Seconds busy_time = 0;
  std::int64_t executed = 0;
};

// Starts `request` on an idle prefill worker at `now` and returns its
// PrefillComplete event (seq left for the caller to assign).
Event prefill_execute(PrefillWorkerState& worker, Request& request, std::int64_t request_index, Seconds now,
                      const ModelProfile& model, const CostParams& cost, const GpuSpec& gpu);

// ---------------------------------------------------------------------------
// Decode workers: continuous batching.

struct DecodeSlot {
  std::int64_t request = -1;  // index into the run's request table
  const ModelProfile* model = nullptr;
  Tokens target_osl = 1;
  Tokens step_index = 0;  // decode steps completed (t); resident KV == isl + t
  KvHandle kv;

  // Peak KV tokens over the request's decode life: isl + target_osl - 1.
  Tokens peak_tokens() const noexcept { return kv.resident_tokens - step_index + target_osl - 1; }
  Bytes peak_bytes() const noexcept { return peak_tokens() * kv.bytes_per_token; }
  Tokens remaining_steps() const noexcept { return target_osl - 1 - step_index; }
};

struct DecodeLoopState {
  int worker_id = 0;
  Bytes hbm_capacity = 0;
  Bytes weight_bytes = 0;
  std::vector<DecodeSlot> batch;
  std::deque<DecodeSlot> admission_queue;

  Bytes reserved_kv_bytes = 0;  // sum of admitted members' peak KV
  Bytes resident_kv_bytes = 0;
  Tokens resident_kv_tokens = 0;
  Tokens queued_isl_tokens = 0;         // in transit + admission queue
  Tokens remaining_decode_tokens = 0;   // queued + active
  bool stepping = false;  // a DecodeStepComplete (real step or wake-up) is pending
  bool in_step = false;   // the pending event ends a priced step

  Seconds busy_time = 0;
  std::int64_t steps = 0;
  Bytes peak_resident_bytes = 0;
  Bytes peak_reserved_bytes = 0;

  bool fits_alone(const DecodeSlot& slot) const noexcept {
    return weight_bytes + slot.peak_bytes() <= hbm_capacity;
  }
  bool memory_ok() const noexcept {
    return resident_kv_bytes <= reserved_kv_bytes && weight_bytes + reserved_kv_bytes <= hbm_capacity;
  }
  WorkerSnapshot snapshot() const noexcept {
    return {worker_id, resident_kv_tokens, queued_isl_tokens, remaining_decode_tokens};
  }
};

struct BoundaryResult {
  std::vector<DecodeSlot> retired;
  std::size_t admitted = 0;
  bool priced = false;
  Seconds step_time = 0;
};

// One step boundary: (a) retire members that generated their last token,
// (b) admit FIFO from the admission queue while the peak-KV reservation fits,
// (c) price a step over the post-admission batch. Pure state transition; the
// caller schedules the DecodeStepComplete at now + step_time.
BoundaryResult decode_loop_step(DecodeLoopState& state, const CostParams& cost, const GpuSpec& gpu);

// End of a priced step: every member produced one token, so step_index and
// resident KV grow by one.
void apply_step_tokens(DecodeLoopState& state);

// ---------------------------------------------------------------------------
// Whole-cluster run.

struct EngineOptions {
  Seconds horizon = std::numeric_limits<double>::infinity();
  std::size_t max_outstanding_requests = 1'000'000;
  bool record_events = false;
  bool record_steps = false;
};

struct StepRecord {
  Seconds start = 0;
  Seconds duration = 0;
  int worker_id = 0;
  int batch_size = 0;
  Tokens resident_kv_tokens = 0;
  Bytes resident_bytes = 0;  // decoder weights + resident KV
  Bytes reserved_bytes = 0;  // decoder weights + reserved peak KV
  std::size_t members_offset = 0;  // into ResourceLog::step_members
};

struct WorkerUsage {
  int worker_id = 0;
  WorkerRole role = WorkerRole::kPrefill;
  Seconds busy_time = 0;
  std::int64_t launches = 0;  // prefills or decode steps
  std::int64_t dispatched_requests = 0;
  Tokens dispatched_tokens = 0;  // isl + target_osl of requests routed here (decode)
  Bytes peak_resident_bytes = 0;
  Bytes peak_reserved_bytes = 0;
  Bytes hbm_capacity = 0;
};

struct ResourceLog {
  std::vector<WorkerUsage> workers;
  std::vector<StepRecord> steps;
  std::vector<std::int64_t> step_members;  // request ids, grouped per StepRecord
};

struct RunCounters {
  std::int64_t charged_token_steps = 0;  // sum of batch sizes over priced decode steps
  std::int64_t completed_token_steps = 0;
  std::int64_t kv_created = 0;
  std::int64_t kv_freed = 0;
  std::int64_t completed = 0;
  std::int64_t over_capacity = 0;
  std::int64_t unfinished = 0;
  std::int64_t memory_violations = 0;
};

struct Dispatch {
  std::int64_t request_id = 0;
  int decode_worker = 0;
};

struct RunResult {
  std::vector<Request> requests;  // trace order, with outcomes and timestamps
  std::vector<EventRecord> events;
  std::vector<Dispatch> dispatches;
  ResourceLog resources;
  RunCounters counters;
  Seconds end_time = 0;
};

// Deterministic discrete-event run of `trace` on `config`. Throws
// SimulationDiverged when outstanding requests exceed the configured bound.
RunResult run(const ClusterConfig& config, std::span<const Request> trace, const CostParams& cost,
              const RoutingPolicy& policy, const EngineOptions& options = {});

// Line format: time_ns,kind,request_id,worker_id
void write_event_trace(std::ostream& out, std::span<const EventRecord> events);

}  // namespace poolsim
