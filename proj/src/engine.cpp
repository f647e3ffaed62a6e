// Copyright (C) 2026 The poolsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "poolsim/engine.hpp"

#include <algorithm>
#include <cassert>
#include <ostream>
#include <queue>
#include <stdexcept>
#include <tuple>

#include "poolsim/workload.hpp"

namespace poolsim {

const char* to_string(EventKind kind) {
  switch (kind) {
    case EventKind::kArrival: return "Arrival";
    case EventKind::kPrefillStart: return "PrefillStart";
    case EventKind::kPrefillComplete: return "PrefillComplete";
    case EventKind::kTransferComplete: return "TransferComplete";
    case EventKind::kDecodeStepComplete: return "DecodeStepComplete";
    case EventKind::kRequestComplete: return "RequestComplete";
    case EventKind::kOverCapacity: return "OverCapacity";
  }
  return "?";
}

bool EventLater::operator()(const Event& a, const Event& b) const noexcept {
  return std::tie(a.time, a.kind, a.seq) > std::tie(b.time, b.kind, b.seq);
}

Event prefill_execute(PrefillWorkerState& worker, Request& request, std::int64_t request_index, Seconds now,
                      const ModelProfile& model, const CostParams& cost, const GpuSpec& gpu) {
  if (worker.busy) throw std::logic_error("prefill worker is single-occupancy");
  if (request.model_id != worker.model_id) throw std::logic_error("request routed to a prefill worker of another model");
  const Seconds duration = prefill_time(model, request.isl, cost, gpu);
  worker.busy = true;
  worker.busy_time += duration;
  ++worker.executed;
  request.timestamps.prefill_start = now;
  return Event{now + duration, EventKind::kPrefillComplete, 0, request_index, worker.worker_id};
}

BoundaryResult decode_loop_step(DecodeLoopState& s, const CostParams& cost, const GpuSpec& gpu) {
  BoundaryResult out;

  auto keep = std::stable_partition(s.batch.begin(), s.batch.end(),
                                    [](const DecodeSlot& m) { return m.remaining_steps() > 0; });
  for (auto it = keep; it != s.batch.end(); ++it) {
    s.reserved_kv_bytes -= it->peak_bytes();
    s.resident_kv_bytes -= it->kv.total_bytes();
    s.resident_kv_tokens -= it->kv.resident_tokens;
    out.retired.push_back(*it);
  }
  s.batch.erase(keep, s.batch.end());

  while (!s.admission_queue.empty()) {
    DecodeSlot& head = s.admission_queue.front();
    if (s.weight_bytes + s.reserved_kv_bytes + head.peak_bytes() > s.hbm_capacity) break;
    head.kv.location = s.worker_id;
    s.reserved_kv_bytes += head.peak_bytes();
    s.resident_kv_bytes += head.kv.total_bytes();
    s.resident_kv_tokens += head.kv.resident_tokens;
    s.queued_isl_tokens -= head.kv.resident_tokens;
    s.batch.push_back(head);
    s.admission_queue.pop_front();
    ++out.admitted;
  }

  if (!s.batch.empty()) {
    out.priced = true;
    out.step_time = decode_step_time_from_bytes(s.weight_bytes, s.resident_kv_bytes, cost, gpu);
  }
  return out;
}

void apply_step_tokens(DecodeLoopState& s) {
  for (DecodeSlot& m : s.batch) {
    ++m.step_index;
    ++m.kv.resident_tokens;
    s.resident_kv_bytes += m.kv.bytes_per_token;
  }
  const auto n = static_cast<Tokens>(s.batch.size());
  s.resident_kv_tokens += n;
  s.remaining_decode_tokens -= n;
}

namespace {

class Simulator {
 public:
  Simulator(const ClusterConfig& config, std::span<const Request> trace, const CostParams& cost,
            const RoutingPolicy& policy, const EngineOptions& options)
      : config_(config), cost_(cost), options_(options), dispatcher_(policy), policy_(policy) {
    result_.requests.assign(trace.begin(), trace.end());
    for (int m = 0; m < config.n_models(); ++m) {
      PrefillWorkerState w;
      w.worker_id = config.prefill_worker_id(m);
      w.model_id = m;
      prefill_.push_back(w);
    }
    for (int k = 0; k < config.decode_pool_size; ++k) {
      DecodeLoopState d;
      d.worker_id = config.decode_worker_id(k);
      d.hbm_capacity = config.gpu.hbm_capacity;
      d.weight_bytes = decode_worker_weight_bytes(config, k);
      decode_.push_back(d);
    }
    dispatched_requests_.assign(decode_.size(), 0);
    dispatched_tokens_.assign(decode_.size(), 0);
  }

  RunResult run() {
    std::size_t next_arrival = 0;
    auto& requests = result_.requests;
    while (true) {
      const bool have_arrival = next_arrival < requests.size();
      if (!have_arrival && heap_.empty()) break;
      // Arrivals carry the lowest kind priority, so at equal time they precede
      // anything already in the heap; among themselves they keep trace order.
      const bool take_arrival =
          have_arrival && (heap_.empty() || requests[next_arrival].arrival_time <= heap_.top().time);
      const Seconds t = take_arrival ? requests[next_arrival].arrival_time : heap_.top().time;
      if (t > options_.horizon) break;
      now_ = t;
      if (take_arrival) {
        on_arrival(static_cast<std::int64_t>(next_arrival++));
        continue;
      }
      const Event e = heap_.top();
      heap_.pop();
      switch (e.kind) {
        case EventKind::kPrefillComplete: on_prefill_complete(e); break;
        case EventKind::kTransferComplete: on_transfer_complete(e); break;
        case EventKind::kDecodeStepComplete: on_decode_step(e); break;
        default: throw std::logic_error("unexpected queued event kind");
      }
    }

    for (Request& r : requests) {
      if (r.outcome == RequestOutcome::kPending) {
        r.outcome = RequestOutcome::kUnfinished;
        ++result_.counters.unfinished;
      }
    }
    result_.end_time = now_;
    for (const PrefillWorkerState& p : prefill_) {
      WorkerUsage u;
      u.worker_id = p.worker_id;
      u.role = WorkerRole::kPrefill;
      u.busy_time = p.busy_time;
      u.launches = p.executed;
      u.hbm_capacity = config_.gpu.hbm_capacity;
      u.peak_resident_bytes = u.peak_reserved_bytes = config_.models[static_cast<std::size_t>(p.model_id)].prefill_weight_bytes();
      result_.resources.workers.push_back(u);
    }
    for (std::size_t k = 0; k < decode_.size(); ++k) {
      const DecodeLoopState& d = decode_[k];
      WorkerUsage u;
      u.worker_id = d.worker_id;
      u.role = WorkerRole::kDecode;
      u.busy_time = d.busy_time;
      u.launches = d.steps;
      u.dispatched_requests = dispatched_requests_[k];
      u.dispatched_tokens = dispatched_tokens_[k];
      u.peak_resident_bytes = d.peak_resident_bytes;
      u.peak_reserved_bytes = d.peak_reserved_bytes;
      u.hbm_capacity = d.hbm_capacity;
      result_.resources.workers.push_back(u);
    }
    return std::move(result_);
  }

 private:
  void record(EventKind kind, std::int64_t request_id, int worker_id) {
    if (options_.record_events) result_.events.push_back({now_, kind, request_id, worker_id});
  }

  void push(Event e) {
    e.seq = seq_++;
    heap_.push(e);
  }

  DecodeLoopState& decode_worker(int worker_id) {
    return decode_[static_cast<std::size_t>(worker_id - config_.n_models())];
  }

  void on_arrival(std::int64_t idx) {
    Request& r = result_.requests[static_cast<std::size_t>(idx)];
    r.timestamps.arrival = r.arrival_time;
    record(EventKind::kArrival, r.id, -1);
    ++outstanding_;
    if (outstanding_ > options_.max_outstanding_requests) throw SimulationDiverged(now_, outstanding_);
    const int w = route_prefill(r, policy_);
    PrefillWorkerState& worker = prefill_[static_cast<std::size_t>(w)];
    worker.queue.push_back(idx);
    if (!worker.busy) start_prefill(worker);
  }

  void start_prefill(PrefillWorkerState& worker) {
    const std::int64_t idx = worker.queue.front();
    worker.queue.pop_front();
    Request& r = result_.requests[static_cast<std::size_t>(idx)];
    const ModelProfile& model = config_.models[static_cast<std::size_t>(r.model_id)];
    record(EventKind::kPrefillStart, r.id, worker.worker_id);
    push(prefill_execute(worker, r, idx, now_, model, cost_, config_.gpu));
  }

  void on_prefill_complete(const Event& e) {
    Request& r = result_.requests[static_cast<std::size_t>(e.request)];
    const ModelProfile& model = config_.models[static_cast<std::size_t>(r.model_id)];
    r.timestamps.prefill_end = now_;
    record(EventKind::kPrefillComplete, r.id, e.worker);
    ++result_.counters.kv_created;

    PrefillWorkerState& pw = prefill_[static_cast<std::size_t>(e.worker)];
    pw.busy = false;
    if (!pw.queue.empty()) start_prefill(pw);

    snapshots_.clear();
    for (const DecodeLoopState& d : decode_) snapshots_.push_back(d.snapshot());
    const int target = dispatcher_.route(r, snapshots_);
    DecodeLoopState& dw = decode_worker(target);
    const std::size_t k = static_cast<std::size_t>(target - config_.n_models());
    ++dispatched_requests_[k];
    dispatched_tokens_[k] += r.isl + r.target_osl;
    result_.dispatches.push_back({r.id, target});

    dw.queued_isl_tokens += r.isl;
    dw.remaining_decode_tokens += r.target_osl - 1;
    const KvHandle kv{r.id, r.isl, model.kv_bytes_per_token, kInTransit};
    push(Event{now_ + transfer_time(kv, config_.gpu), EventKind::kTransferComplete, 0, e.request, target});
  }

  void on_transfer_complete(const Event& e) {
    Request& r = result_.requests[static_cast<std::size_t>(e.request)];
    const ModelProfile& model = config_.models[static_cast<std::size_t>(r.model_id)];
    DecodeLoopState& dw = decode_worker(e.worker);
    r.timestamps.transfer_end = now_;
    r.timestamps.first_token = now_;
    record(EventKind::kTransferComplete, r.id, e.worker);

    DecodeSlot slot;
    slot.request = e.request;
    slot.model = &model;
    slot.target_osl = r.target_osl;
    slot.kv = KvHandle{r.id, r.isl, model.kv_bytes_per_token, kInTransit};

    if (r.target_osl == 1) {
      // The only token came out of prefill; nothing to decode.
      dw.queued_isl_tokens -= r.isl;
      finish(r, 1, e.worker);
      return;
    }
    if (!dw.fits_alone(slot)) {
      dw.queued_isl_tokens -= r.isl;
      dw.remaining_decode_tokens -= r.target_osl - 1;
      r.outcome = RequestOutcome::kOverCapacity;
      ++result_.counters.over_capacity;
      ++result_.counters.kv_freed;
      --outstanding_;
      record(EventKind::kOverCapacity, r.id, e.worker);
      return;
    }
    dw.admission_queue.push_back(slot);
    if (!dw.stepping) {
      // Wake the worker at the current instant; other transfers landing at the
      // same time are processed first and join the same initial batch.
      dw.stepping = true;
      dw.in_step = false;
      push(Event{now_, EventKind::kDecodeStepComplete, 0, -1, e.worker});
    }
  }

  void on_decode_step(const Event& e) {
    DecodeLoopState& dw = decode_worker(e.worker);
    if (dw.in_step) {
      result_.counters.completed_token_steps += static_cast<std::int64_t>(dw.batch.size());
      apply_step_tokens(dw);
      record(EventKind::kDecodeStepComplete, -1, e.worker);
    }
    BoundaryResult b = decode_loop_step(dw, cost_, config_.gpu);
    for (const DecodeSlot& m : b.retired) {
      Request& r = result_.requests[static_cast<std::size_t>(m.request)];
      finish(r, m.step_index + 1, e.worker);
    }
    if (!dw.memory_ok()) ++result_.counters.memory_violations;
    dw.peak_reserved_bytes = std::max(dw.peak_reserved_bytes, dw.weight_bytes + dw.reserved_kv_bytes);
    dw.peak_resident_bytes = std::max(dw.peak_resident_bytes, dw.weight_bytes + dw.resident_kv_bytes);

    if (!b.priced) {
      dw.stepping = false;
      dw.in_step = false;
      return;
    }
    ++dw.steps;
    dw.busy_time += b.step_time;
    result_.counters.charged_token_steps += static_cast<std::int64_t>(dw.batch.size());
    if (options_.record_steps) {
      StepRecord rec;
      rec.start = now_;
      rec.duration = b.step_time;
      rec.worker_id = dw.worker_id;
      rec.batch_size = static_cast<int>(dw.batch.size());
      rec.resident_kv_tokens = dw.resident_kv_tokens;
      rec.resident_bytes = dw.weight_bytes + dw.resident_kv_bytes;
      rec.reserved_bytes = dw.weight_bytes + dw.reserved_kv_bytes;
      rec.members_offset = result_.resources.step_members.size();
      for (const DecodeSlot& m : dw.batch) result_.resources.step_members.push_back(m.kv.request_id);
      result_.resources.steps.push_back(rec);
    }
    dw.stepping = true;
    dw.in_step = true;
    push(Event{now_ + b.step_time, EventKind::kDecodeStepComplete, 0, -1, e.worker});
  }

  void finish(Request& r, Tokens realized_osl, int worker) {
    r.realized_osl = realized_osl;
    r.timestamps.completion = now_;
    r.outcome = RequestOutcome::kCompleted;
    ++result_.counters.completed;
    ++result_.counters.kv_freed;
    --outstanding_;
    record(EventKind::kRequestComplete, r.id, worker);
  }

  const ClusterConfig& config_;
  const CostParams& cost_;
  const EngineOptions& options_;
  DecodeDispatcher dispatcher_;
  const RoutingPolicy& policy_;

  std::vector<PrefillWorkerState> prefill_;
  std::vector<DecodeLoopState> decode_;
  std::vector<WorkerSnapshot> snapshots_;
  std::vector<std::int64_t> dispatched_requests_;
  std::vector<Tokens> dispatched_tokens_;
  std::priority_queue<Event, std::vector<Event>, EventLater> heap_;
  std::uint64_t seq_ = 0;
  Seconds now_ = 0;
  std::size_t outstanding_ = 0;
  RunResult result_;
};

}  // namespace

RunResult run(const ClusterConfig& config, std::span<const Request> trace, const CostParams& cost,
              const RoutingPolicy& policy, const EngineOptions& options) {
  validate_cluster(config);
  if (auto bad = check_cost_params(cost); !bad.empty()) throw InvalidConfig(std::move(bad));
  for (std::size_t i = 1; i < trace.size(); ++i) {
    if (trace[i].arrival_time < trace[i - 1].arrival_time)
      throw InvalidConfig("trace[" + std::to_string(i) + "]", "arrival times must be nondecreasing");
  }
  for (std::size_t i = 0; i < trace.size(); ++i) {
    if (trace[i].model_id < 0 || trace[i].model_id >= config.n_models())
      throw UnknownModel(trace[i].model_id);
    if (trace[i].isl < 1 || trace[i].target_osl < 1)
      throw InvalidConfig("trace[" + std::to_string(i) + "]", "isl and osl must be >= 1");
  }
  Simulator sim(config, trace, cost, policy, options);
  return sim.run();
}

void write_event_trace(std::ostream& out, std::span<const EventRecord> events) {
  out << "time_ns,kind,request_id,worker_id\n";
  for (const EventRecord& e : events) {
    out << to_ns(e.time) << ',' << to_string(e.kind) << ',' << e.request_id << ',' << e.worker_id << '\n';
  }
}

}  // namespace poolsim
