// Copyright (C) 2026 The poolsim Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance suite: one PASS/FAIL line per criterion, with measured runtime
// against its budget. Exit status is nonzero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "poolsim/calibration.hpp"
#include "poolsim/config.hpp"
#include "poolsim/costmodel.hpp"
#include "poolsim/engine.hpp"
#include "poolsim/harness.hpp"
#include "poolsim/workload.hpp"

namespace {

using namespace poolsim;
using nlohmann::json;

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string source_path(const std::string& rel) { return std::string(POOLSIM_SOURCE_DIR) + "/" + rel; }

int hardware_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

ModelProfile llama(int id, int prefill_bits = 16, int decode_bits = 16) {
  ModelProfile m;
  m.model_id = id;
  m.name = "llama3.1-8b-" + std::to_string(id);
  m.param_count = 8'030'000'000;
  m.prefill_weight_bits = prefill_bits;
  m.decode_weight_bits = decode_bits;
  m.kv_bytes_per_token = 131072;
  return m;
}

// Closed forms evaluated directly from the model definitions.
struct Oracle {
  const CostParams& p;
  const GpuSpec& g;

  double prefill(const ModelProfile& m, double isl) const {
    const double penalty = m.prefill_weight_bits < 16 ? p.dequant_compute_penalty : 1.0;
    return p.prefill_fixed_overhead + penalty * isl * p.prefill_flops_per_token / (p.mfu * g.flops);
  }
  double transfer(const ModelProfile& m, double isl) const {
    return g.interconnect_latency + isl * static_cast<double>(m.kv_bytes_per_token) / g.interconnect_bandwidth;
  }
  double step(const ModelProfile& m, double kv_tokens) const {
    const double weights = static_cast<double>(m.param_count) * m.decode_weight_bits / 8.0;
    return p.decode_fixed_overhead +
           (weights + kv_tokens * static_cast<double>(m.kv_bytes_per_token)) / (p.mbu * g.hbm_bandwidth);
  }
  double tpot(const ModelProfile& m, double isl, double osl) const {
    double sum = 0;
    for (double k = 1; k <= osl - 1; ++k) sum += step(m, isl + k - 1);
    return sum / (osl - 1);
  }
};

double rel(double got, double want) { return std::abs(got - want) / std::abs(want); }

// ---------------------------------------------------------------------------

Verdict ac1_zipf() {
  double worst = 0;
  for (double alpha : {0.0, 0.5, 1.5, 3.0}) {
    for (int n : {1, 4, 16}) {
      for (double total : {1.0, 2.0, 13.7}) {
        long double norm = 0;
        for (int j = 1; j <= n; ++j) norm += std::pow(static_cast<long double>(j), -static_cast<long double>(alpha));
        const std::vector<double> got = zipf_split(n, alpha, total);
        if (got.size() != static_cast<std::size_t>(n)) return {false, "wrong output length"};
        for (int i = 1; i <= n; ++i) {
          const long double want =
              total * std::pow(static_cast<long double>(i), -static_cast<long double>(alpha)) / norm;
          worst = std::max(worst, rel(got[static_cast<std::size_t>(i - 1)], static_cast<double>(want)));
        }
      }
    }
  }
  return {worst <= 1e-12, fmt("max relative error %.2e over alpha {0,0.5,1.5,3} x N {1,4,16} (tol 1e-12)", worst)};
}

// ---------------------------------------------------------------------------

struct RandomCase {
  ClusterConfig cluster;
  CostParams cost;
  std::vector<Request> trace;
};

RandomCase random_case(std::mt19937_64& rng) {
  auto uni = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  RandomCase c;
  const bool isolated = pick(0, 2) == 0;
  const int n_models = isolated ? pick(1, 2) : pick(1, 3);
  const int k = isolated ? n_models : pick(1, 4 - n_models);
  const int bits = pick(0, 1) ? 16 : 4;
  const std::int64_t shared_params = pick(1000, 5000);
  for (int i = 0; i < n_models; ++i) {
    ModelProfile m;
    m.model_id = i;
    m.name = "m" + std::to_string(i);
    m.param_count = shared_params;
    m.prefill_weight_bits = pick(0, 1) ? 16 : 4;
    m.decode_weight_bits = bits;
    m.kv_bytes_per_token = pick(1, 64);
    c.cluster.models.push_back(m);
  }
  c.cluster.decode_pool_mode = isolated ? DecodePoolMode::kIsolated : DecodePoolMode::kShared;
  c.cluster.decode_pool_size = k;
  if (!isolated) {
    const DecodeRule rules[] = {DecodeRule::kLeastOutstandingTokens, DecodeRule::kRoundRobin,
                                DecodeRule::kWeightedRandom, DecodeRule::kPinned};
    c.cluster.decode_rule = rules[pick(0, 3)];
    c.cluster.load_metric = pick(0, 1) ? LoadMetric::kOutstandingTokens : LoadMetric::kKvOnly;
    c.cluster.routing_seed = rng();
  }
  // Small HBM so admission queueing and rejections both occur.
  c.cluster.gpu.hbm_capacity = 10'000 + pick(0, 40'000);
  c.cluster.gpu.flops = uni(1e5, 1e7);
  c.cluster.gpu.hbm_bandwidth = uni(1e5, 1e7);
  c.cluster.gpu.interconnect_bandwidth = uni(1e5, 1e7);
  c.cluster.gpu.interconnect_latency = uni(0, 1e-3);
  c.cost.prefill_flops_per_token = uni(100, 5000);
  c.cost.prefill_fixed_overhead = uni(0, 1e-3);
  c.cost.decode_fixed_overhead = uni(0, 1e-3);
  c.cost.dequant_compute_penalty = uni(1, 1.5);
  c.cost.mfu = uni(0.2, 1);
  c.cost.mbu = uni(0.2, 1);

  const int n_requests = pick(0, 200);
  double t = 0;
  for (int i = 0; i < n_requests; ++i) {
    if (pick(0, 3) != 0) t += uni(0, 0.05);  // some simultaneous arrivals
    Request r;
    r.id = i;
    r.model_id = pick(0, n_models - 1);
    r.arrival_time = t;
    r.isl = pick(1, 300);
    r.target_osl = pick(1, 4) == 1 ? 1 : pick(2, 400);
    c.trace.push_back(r);
  }
  return c;
}

Verdict ac2_conservation() {
  std::mt19937_64 rng(20260101);
  std::int64_t total_requests = 0, total_steps = 0, over_capacity = 0;
  for (int iter = 0; iter < 1000; ++iter) {
    const RandomCase c = random_case(rng);
    EngineOptions opts;
    opts.record_events = true;
    opts.record_steps = true;
    const RunResult r = run(c.cluster, c.trace, c.cost, make_routing_policy(c.cluster), opts);
    const auto where = fmt("case %d: ", iter);

    std::int64_t expected_steps = 0;
    for (const Request& q : r.requests) {
      if (q.outcome == RequestOutcome::kCompleted) {
        if (q.realized_osl != q.target_osl) return {false, where + "realized_osl != target_osl"};
        expected_steps += q.realized_osl - 1;
      } else if (q.outcome != RequestOutcome::kOverCapacity) {
        return {false, where + "request neither completed nor rejected under an infinite horizon"};
      }
    }
    if (r.counters.charged_token_steps != expected_steps)
      return {false, where + fmt("charged %lld steps, expected %lld", static_cast<long long>(r.counters.charged_token_steps),
                                 static_cast<long long>(expected_steps))};
    if (r.counters.completed_token_steps != expected_steps) return {false, where + "completed step count mismatch"};

    // Each KV handle is created once at PrefillComplete and freed once, by
    // completion or by rejection.
    std::vector<int> created(c.trace.size(), 0), freed(c.trace.size(), 0);
    for (const EventRecord& e : r.events) {
      if (e.kind == EventKind::kPrefillComplete) ++created[static_cast<std::size_t>(e.request_id)];
      if (e.kind == EventKind::kRequestComplete || e.kind == EventKind::kOverCapacity)
        ++freed[static_cast<std::size_t>(e.request_id)];
    }
    for (std::size_t i = 0; i < c.trace.size(); ++i) {
      if (created[i] != 1 || freed[i] != 1) return {false, where + fmt("request %zu created %d freed %d", i, created[i], freed[i])};
    }
    if (r.counters.kv_created != r.counters.kv_freed) return {false, where + "kv created/freed counters differ"};

    // Memory: rebuild every step's footprint from its member list.
    std::map<std::int64_t, Tokens> generated;
    for (const StepRecord& s : r.resources.steps) {
      const Bytes weights = decode_worker_weight_bytes(c.cluster, s.worker_id - c.cluster.n_models());
      Bytes resident = weights, peak = weights;
      Tokens tokens = 0;
      for (int j = 0; j < s.batch_size; ++j) {
        const std::int64_t id = r.resources.step_members[s.members_offset + static_cast<std::size_t>(j)];
        const Request& q = c.trace[static_cast<std::size_t>(id)];
        const Bytes kvb = c.cluster.models[static_cast<std::size_t>(q.model_id)].kv_bytes_per_token;
        const Tokens now = q.isl + generated[id];
        tokens += now;
        resident += now * kvb;
        peak += (q.isl + q.target_osl - 1) * kvb;
        ++generated[id];
      }
      if (tokens != s.resident_kv_tokens) return {false, where + "step KV tokens disagree with member reconstruction"};
      if (resident > c.cluster.gpu.hbm_capacity || peak > c.cluster.gpu.hbm_capacity)
        return {false, where + fmt("step at t=%.6f exceeds HBM", s.start)};
    }
    if (r.counters.memory_violations != 0) return {false, where + "engine reported a memory violation"};
    for (const WorkerUsage& u : r.resources.workers) {
      if (u.role == WorkerRole::kDecode && u.peak_reserved_bytes > u.hbm_capacity)
        return {false, where + "worker peak reservation exceeds HBM"};
    }

    total_requests += static_cast<std::int64_t>(c.trace.size());
    total_steps += expected_steps;
    over_capacity += r.counters.over_capacity;
  }
  return {true, fmt("1000 configs, %lld requests, %lld token-steps, %lld rejected; steps == sum(osl-1), "
                    "every KV freed once, HBM never exceeded",
                    static_cast<long long>(total_requests), static_cast<long long>(total_steps),
                    static_cast<long long>(over_capacity))};
}

// ---------------------------------------------------------------------------

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Verdict ac3_determinism() {
  const std::filesystem::path work = std::filesystem::path(POOLSIM_WORK_DIR) / "ac3";
  std::filesystem::create_directories(work);
  std::mt19937_64 rng(777);
  auto uni = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };

  // 20 cells: 4 pool sizes x 5 skews, around a randomized base.
  const std::vector<std::string> rules{"auto", "round_robin", "weighted_random", "least_outstanding_tokens"};
  json base = {{"cluster", {{"decode_pool_mode", "shared"}, {"decode_pool_size", 1}, {"models", {{"count", 4}}}}},
               {"routing", {{"decode_rule", rules[static_cast<std::size_t>(pick(0, 3))]}, {"seed", pick(0, 1000)}}},
               {"workload",
                {{"total_rps", uni(2, 12)},
                 {"isl", pick(128, 2048)},
                 {"osl", pick(16, 256)},
                 {"grace_period", 5},
                 {"measurement_window", 20},
                 {"seed", pick(0, 1 << 20)}}}};
  json alphas = json::array();
  for (int i = 0; i < 5; ++i) alphas.push_back(uni(0, 3));
  const json spec = {{"base", base}, {"axes", {{"decode_pool_size", {1, 2, 3, 4}}, {"alpha", alphas}}}};
  std::ofstream(work / "spec.json") << spec.dump(2);

  std::vector<std::string> outputs;
  for (int parallel : {1, 8}) {
    for (int rep = 0; rep < 2; ++rep) {
      const auto out = work / fmt("p%d_r%d.csv", parallel, rep);
      const std::string cmd = fmt("\"%s\" sweep --spec \"%s\" --parallel %d --out \"%s\"", POOLSIM_CLI,
                                  (work / "spec.json").c_str(), parallel, out.c_str());
      if (std::system(cmd.c_str()) != 0) return {false, "CLI sweep failed: " + cmd};
      outputs.push_back(read_file(out));
    }
  }
  const std::size_t lines = static_cast<std::size_t>(std::count(outputs[0].begin(), outputs[0].end(), '\n'));
  if (lines != 21) return {false, fmt("expected 21 CSV lines, got %zu", lines)};
  const bool same = std::all_of(outputs.begin(), outputs.end(), [&](const std::string& s) { return s == outputs[0]; });
  return {same, same ? "20 random configs: --parallel 1 and --parallel 8, two runs each, byte-identical CSV"
                     : "CSV output differs between runs"};
}

// ---------------------------------------------------------------------------

Verdict ac4_closed_form() {
  std::mt19937_64 rng(4);
  auto uni = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  double worst = 0;
  int cases = 0;
  for (int iter = 0; iter < 60; ++iter) {
    const int pb = iter % 2 ? 16 : 4;
    const int db = iter % 3 ? 16 : 4;
    ClusterConfig c;
    c.models.push_back(llama(0, pb, db));
    c.decode_pool_mode = iter % 4 ? DecodePoolMode::kIsolated : DecodePoolMode::kShared;
    c.decode_pool_size = 1;
    CostParams p;
    p.prefill_fixed_overhead = uni(0, 0.05);
    p.decode_fixed_overhead = uni(0, 0.01);
    p.dequant_compute_penalty = uni(1, 1.5);
    p.mfu = uni(0.3, 0.9);
    p.mbu = uni(0.5, 1);
    const Tokens isl = std::uniform_int_distribution<Tokens>(1, 8192)(rng);
    const Tokens osl = std::uniform_int_distribution<Tokens>(2, 1024)(rng);
    const double arrival = uni(0, 10);
    Request req;
    req.model_id = 0;
    req.arrival_time = arrival;
    req.isl = isl;
    req.target_osl = osl;
    const RunResult r = run(c, std::vector<Request>{req}, p, make_routing_policy(c));
    const Request& q = r.requests[0];
    if (!q.completed()) return {false, "single request did not complete"};
    const Oracle o{p, c.gpu};
    const ModelProfile& m = c.models[0];
    const double ttft = o.prefill(m, static_cast<double>(isl)) + o.transfer(m, static_cast<double>(isl));
    const double tpot = o.tpot(m, static_cast<double>(isl), static_cast<double>(osl));
    const double got_ttft = q.timestamps.first_token - q.arrival_time;
    const double got_tpot = (q.timestamps.completion - q.timestamps.first_token) / static_cast<double>(osl - 1);
    worst = std::max({worst, rel(got_ttft, ttft), rel(got_tpot, tpot)});
    ++cases;
  }
  return {worst <= 1e-9, fmt("%d single-request runs, max relative TTFT/TPOT error %.2e (tol 1e-9)", cases, worst)};
}

// ---------------------------------------------------------------------------

Verdict ac5_orderings() {
  std::mt19937_64 rng(5);
  auto uni = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  auto itok = [&](Tokens lo, Tokens hi) { return std::uniform_int_distribution<Tokens>(lo, hi)(rng); };
  for (int i = 0; i < 10'000; ++i) {
    CostParams p;
    p.prefill_flops_per_token = uni(1e8, 1e11);
    p.prefill_fixed_overhead = uni(0, 0.1);
    p.decode_fixed_overhead = uni(0, 0.02);
    p.dequant_compute_penalty = uni(1, 2);
    p.mfu = uni(0.05, 1);
    p.mbu = uni(0.05, 1);
    GpuSpec g;
    g.flops = uni(1e13, 1e15);
    g.hbm_bandwidth = uni(1e11, 5e12);
    g.interconnect_bandwidth = uni(1e9, 1e12);
    g.interconnect_latency = uni(0, 1e-2);
    ModelProfile m16 = llama(0, 16, 16);
    m16.param_count = itok(1'000'000, 70'000'000'000);
    m16.kv_bytes_per_token = itok(1, 1 << 20);
    ModelProfile m4 = m16;
    m4.prefill_weight_bits = m4.decode_weight_bits = 4;
    const Tokens isl = itok(1, 32768);
    const Tokens kv = itok(1, 100'000);
    const auto where = fmt("draw %d: ", i);

    // Quantization ordering: 4-bit decode is cheaper, 4-bit prefill is not.
    const BatchMember b16{&m16, kv}, b4{&m4, kv};
    const double d16 = decode_step_time(std::span(&b16, 1), m16.decode_weight_bytes(), p, g);
    const double d4 = decode_step_time(std::span(&b4, 1), m4.decode_weight_bytes(), p, g);
    if (!(d4 < d16)) return {false, where + "4-bit decode step not faster"};
    if (!(prefill_time(m4, isl, p, g) >= prefill_time(m16, isl, p, g))) return {false, where + "4-bit prefill faster"};

    // Phase independence.
    ModelProfile mixed = m16;
    mixed.decode_weight_bits = 4;
    if (prefill_time(mixed, isl, p, g) != prefill_time(m16, isl, p, g))
      return {false, where + "decode precision changed prefill time"};
    CostParams q = p;
    q.mbu = uni(0.05, 1);
    q.decode_fixed_overhead = uni(0, 0.02);
    if (prefill_time(m16, isl, q, g) != prefill_time(m16, isl, p, g))
      return {false, where + "decode parameters changed prefill time"};
    q = p;
    q.mfu = uni(0.05, 1);
    q.prefill_fixed_overhead = uni(0, 0.1);
    q.dequant_compute_penalty = uni(1, 2);
    ModelProfile other_prefill = m16;
    other_prefill.prefill_weight_bits = 4;
    const BatchMember bo{&other_prefill, kv};
    if (decode_step_time(std::span(&bo, 1), other_prefill.decode_weight_bytes(), q, g) != d16)
      return {false, where + "prefill parameters changed decode time"};

    // Amortization.
    const auto b = static_cast<std::size_t>(itok(2, 64));
    const std::vector<BatchMember> batch(b, b16);
    if (!(decode_step_time(batch, m16.decode_weight_bytes(), p, g) < static_cast<double>(b) * d16))
      return {false, where + "batched step not cheaper than separate steps"};

    // Monotonicity.
    const Tokens more = isl + itok(1, 4096);
    if (!(prefill_time(m16, more, p, g) > prefill_time(m16, isl, p, g))) return {false, where + "prefill not increasing"};
    const BatchMember bigger{&m16, kv + itok(1, 4096)};
    if (!(decode_step_time(std::span(&bigger, 1), m16.decode_weight_bytes(), p, g) > d16))
      return {false, where + "decode not increasing in KV"};
    const KvHandle h1{0, isl, m16.kv_bytes_per_token, kInTransit};
    const KvHandle h2{0, more, m16.kv_bytes_per_token, kInTransit};
    if (!(transfer_time(h2, g) > transfer_time(h1, g))) return {false, where + "transfer not increasing"};
  }
  return {true, "10,000 draws: quantization ordering, phase independence, amortization, monotonicity"};
}

// ---------------------------------------------------------------------------

struct Measured {
  double ttft_ms;
  double tpot_ms;
};

// Single-request simulation at concurrency 1.
Measured simulate_single(const CostParams& p, int prefill_bits, int decode_bits, Tokens isl, Tokens osl) {
  ClusterConfig c;
  c.models.push_back(llama(0, prefill_bits, decode_bits));
  c.decode_pool_mode = DecodePoolMode::kIsolated;
  c.decode_pool_size = 1;
  Request r;
  r.isl = isl;
  r.target_osl = osl;
  const RunResult out = run(c, std::vector<Request>{r}, p, make_routing_policy(c));
  const Timestamps& t = out.requests[0].timestamps;
  return {1e3 * (t.first_token - t.arrival), 1e3 * (t.completion - t.first_token) / static_cast<double>(osl - 1)};
}

CostParams fitted_params(double* max_residual) {
  const auto targets = read_targets_csv_file(source_path("configs/llama31_8b_targets.csv"));
  const CalibrationResult r = calibrate(targets, llama(0), GpuSpec{});
  if (max_residual) *max_residual = r.max_rel_error;
  return r.params;
}

Verdict ac6_calibration() {
  double residual = 0;
  CostParams p;
  try {
    p = fitted_params(&residual);
  } catch (const Error& e) {
    return {false, std::string("calibrate failed: ") + e.what()};
  }
  const Measured full = simulate_single(p, 16, 16, 1024, 1024);
  const Measured qsun = simulate_single(p, 16, 4, 1024, 1024);
  const Measured awq = simulate_single(p, 4, 4, 1024, 1024);
  struct Check {
    const char* name;
    double got, want, tol;
  };
  const Check checks[] = {
      {"Full-FT TTFT", full.ttft_ms, 99.1, 0.03},
      {"Full-FT TPOT", full.tpot_ms, 13.8, 0.03},
      {"QSUN TTFT vs Full-FT", qsun.ttft_ms, full.ttft_ms, 0.02},
      {"QSUN TPOT", qsun.tpot_ms, 7.6, 0.03},
      {"QSUN TPOT reduction", 1 - qsun.tpot_ms / full.tpot_ms, 0.45, 0.03},
      {"AWQ/Full-FT TTFT", awq.ttft_ms / full.ttft_ms, 1.20, 0.03},
      {"AWQ TTFT", awq.ttft_ms, 118.7, 0.03},
      {"AWQ TPOT", awq.tpot_ms, 7.6, 0.03},
  };
  bool ok = true;
  std::string detail;
  for (const Check& c : checks) {
    const double e = rel(c.got, c.want);
    ok = ok && e <= c.tol;
    if (e > c.tol) detail += fmt("%s %.4g vs %.4g (%.1f%% > %.0f%%); ", c.name, c.got, c.want, 100 * e, 100 * c.tol);
  }
  if (ok) {
    detail = fmt("Full-FT %.1f/%.2f ms, QSUN %.1f/%.2f ms (TPOT -%.1f%%), AWQ %.1f/%.2f ms (TTFT x%.3f); "
                 "fit residual <= %.1f%%",
                 full.ttft_ms, full.tpot_ms, qsun.ttft_ms, qsun.tpot_ms, 100 * (1 - qsun.tpot_ms / full.tpot_ms),
                 awq.ttft_ms, awq.tpot_ms, awq.ttft_ms / full.ttft_ms, 100 * residual);
  }
  return {ok, detail};
}

Verdict ac7_isl_scaling() {
  const CostParams p = fitted_params(nullptr);
  const Tokens isls[] = {1024, 2048, 4096};
  const double want[] = {99.1, 176.5, 317.3};
  double got[3];
  bool ok = true;
  for (int i = 0; i < 3; ++i) {
    got[i] = simulate_single(p, 16, 16, isls[i], 1024).ttft_ms;
    ok = ok && rel(got[i], want[i]) <= 0.10;
  }
  for (int i = 1; i < 3; ++i) ok = ok && rel(got[i] / got[0], want[i] / want[0]) <= 0.10 && got[i] > got[i - 1];
  return {ok, fmt("TTFT %.1f -> %.1f -> %.1f ms vs 99.1 -> 176.5 -> 317.3 (tol 10%%)", got[0], got[1], got[2])};
}

// ---------------------------------------------------------------------------

const SweepRow* find_row(const std::vector<SweepRow>& rows, DecodePoolMode mode, int k, double alpha, Tokens osl,
                         double rps = -1) {
  for (const SweepRow& r : rows) {
    const ExperimentConfig& c = r.config;
    if (c.cluster.decode_pool_mode == mode && c.cluster.decode_pool_size == k && c.workload.alpha == alpha &&
        c.workload.osl == osl && (rps < 0 || c.workload.total_rps == rps) && r.summary)
      return &r;
  }
  return nullptr;
}

Verdict ac8_consolidation() {
  const auto shared = run_sweep(load_sweep_file(source_path("configs/fig3_consolidation.json")), hardware_threads());
  const auto base = run_sweep(load_sweep_file(source_path("configs/fig3_baseline.json")), hardware_threads());
  if (shared.size() != 24) return {false, fmt("consolidation sweep has %zu rows, expected 24", shared.size())};
  for (const auto& r : shared)
    if (!r.summary) return {false, "sweep cell failed: " + r.error_kind + " " + r.error_message};
  const SweepRow* b = find_row(base, DecodePoolMode::kIsolated, 4, 0.0, 256);
  if (!b) return {false, "baseline row missing"};
  double per_gpu[5], total[5], tpot[5];
  const RunSummary& bs = *b->summary;
  for (int k = 1; k <= 4; ++k) {
    const SweepRow* r = find_row(shared, DecodePoolMode::kShared, k, 0.0, 256);
    if (!r) return {false, fmt("shared K=%d row missing", k)};
    per_gpu[k] = r->summary->throughput_per_decode_gpu;
    total[k] = r->summary->output_throughput_tok_s;
    tpot[k] = r->summary->tpot.mean;
  }
  const bool increasing = per_gpu[4] < per_gpu[3] && per_gpu[3] < per_gpu[2] && per_gpu[2] < per_gpu[1] &&
                          bs.throughput_per_decode_gpu < per_gpu[3];
  const double total_k3 = rel(total[3], total[4]);
  const double total_k3_base = rel(total[3], bs.output_throughput_tok_s);
  const double gain = per_gpu[3] / bs.throughput_per_decode_gpu - 1;
  const double tpot_deg = tpot[3] / bs.tpot.mean - 1;
  const bool ok = increasing && total_k3 <= 0.05 && total_k3_base <= 0.05 && gain >= 0.20 && gain <= 0.45 &&
                  tpot_deg <= 0.15;
  return {ok, fmt("per-decode-GPU %.0f (4x1P/1D) | %.0f, %.0f, %.0f, %.0f tok/s (K=4..1); K=3 total %+.1f%% vs K=4, "
                  "%+.1f%% vs baseline; per-GPU gain %+.1f%% [20,45]; TPOT %+.1f%% (<=15%%)",
                  bs.throughput_per_decode_gpu, per_gpu[4], per_gpu[3], per_gpu[2], per_gpu[1],
                  100 * (total[3] / total[4] - 1), 100 * (total[3] / bs.output_throughput_tok_s - 1), 100 * gain,
                  100 * tpot_deg)};
}

Verdict ac9_skew() {
  const auto rows = run_sweep(load_sweep_file(source_path("configs/fig4_skew.json")), hardware_threads());
  const double alphas[] = {0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0};
  const Tokens osl = rows.front().config.workload.osl;
  std::vector<const SweepRow*> iso, sh;
  for (double a : alphas) {
    iso.push_back(find_row(rows, DecodePoolMode::kIsolated, 4, a, osl));
    sh.push_back(find_row(rows, DecodePoolMode::kShared, 4, a, osl));
    if (!iso.back() || !sh.back()) return {false, fmt("missing row at alpha=%.1f", a)};
  }
  if (sh.back()->config.cluster.effective_decode_rule() != DecodeRule::kLeastOutstandingTokens)
    return {false, "shared pool is not using least_outstanding_tokens"};
  auto thr = [](const SweepRow* r) { return r->summary->output_throughput_tok_s; };
  auto inter = [](const SweepRow* r) { return r->summary->interactivity_tok_s; };
  const double base_drop = 1 - thr(iso.back()) / thr(iso.front());
  const double shared_change = thr(sh.back()) / thr(sh.front()) - 1;
  const double inter_gain = inter(sh.back()) / inter(iso.back()) - 1;
  bool monotone = true, ordered = true;
  for (std::size_t i = 1; i < iso.size(); ++i) monotone = monotone && thr(iso[i]) <= thr(iso[i - 1]);
  for (std::size_t i = 0; i < iso.size(); ++i) ordered = ordered && inter(sh[i]) >= inter(iso[i]);
  const bool ok = base_drop >= 0.10 && std::abs(shared_change) <= 0.05 && inter_gain >= 0.25 && monotone && ordered;
  return {ok, fmt("baseline throughput alpha 0->3 %+.1f%% (<= -10%%, nonincreasing: %s); shared %+.1f%% (|.|<=5%%); "
                  "interactivity at alpha=3 shared/baseline %+.1f%% (>=25%%); shared >= baseline at every alpha: %s",
                  -100 * base_drop, monotone ? "yes" : "no", 100 * shared_change, 100 * inter_gain,
                  ordered ? "yes" : "no")};
}

Verdict ac10_ratio_grid() {
  constexpr double kNearSaturationRps = 4.0;
  const auto rows = run_sweep(load_sweep_file(source_path("configs/fig5_ratio_grid.json")), hardware_threads());
  double worst = 0;
  for (const SweepRow& r : rows) {
    if (!r.summary) return {false, "grid cell failed: " + r.error_kind};
    worst = std::max(worst, r.summary->achieved_offered_ratio);
  }
  const double alphas[] = {0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0};
  const Tokens osl = rows.front().config.workload.osl;
  bool nonincreasing = true, below = true;
  double prev = INFINITY;
  std::string trail;
  for (double a : alphas) {
    const SweepRow* b = find_row(rows, DecodePoolMode::kIsolated, 4, a, osl, kNearSaturationRps);
    const SweepRow* s = find_row(rows, DecodePoolMode::kShared, 4, a, osl, kNearSaturationRps);
    if (!b || !s) return {false, fmt("missing grid cell at alpha=%.1f", a)};
    const double rb = b->summary->achieved_offered_ratio, rs = s->summary->achieved_offered_ratio;
    nonincreasing = nonincreasing && rb <= prev;
    prev = rb;
    if (a >= 1.5) below = below && rb < rs;
    trail += fmt("%s%.3f/%.3f", trail.empty() ? "" : " ", rb, rs);
  }
  const bool ok = worst <= 1.02 && nonincreasing && below;
  return {ok, fmt("%zu cells, max ratio %.4f (<=1.02); at %.0f RPS baseline/shared by alpha: %s; baseline "
                  "nonincreasing: %s, below shared for alpha>=1.5: %s",
                  rows.size(), worst, kNearSaturationRps, trail.c_str(), nonincreasing ? "yes" : "no",
                  below ? "yes" : "no")};
}

// ---------------------------------------------------------------------------

bool same_summary(const RunSummary& a, const RunSummary& b) {
  auto same_stats = [](const LatencyStats& x, const LatencyStats& y) {
    return x.mean == y.mean && x.p50 == y.p50 && x.p99 == y.p99;
  };
  return same_stats(a.ttft, b.ttft) && same_stats(a.tpot, b.tpot) && a.itl_mean == b.itl_mean &&
         a.interactivity_tok_s == b.interactivity_tok_s && a.output_throughput_tok_s == b.output_throughput_tok_s &&
         a.throughput_per_decode_gpu == b.throughput_per_decode_gpu &&
         a.throughput_per_gpu_all == b.throughput_per_gpu_all && a.achieved_rps == b.achieved_rps &&
         a.offered_rps == b.offered_rps && a.achieved_offered_ratio == b.achieved_offered_ratio &&
         a.completed == b.completed && a.output_tokens == b.output_tokens;
}

Verdict ac11_model_agnostic() {
  WorkloadSpec w;
  w.n_models = 4;
  w.total_rps = 6.0;
  w.alpha = 3.0;
  w.isl = 1024;
  w.osl = 512;
  w.grace_period = 30;
  w.measurement_window = 60;
  const std::vector<Request> trace = generate_trace(w);
  const CostParams p = fitted_params(nullptr);
  std::vector<int> perm{0, 1, 2, 3};
  std::mt19937_64 rng(11);
  int checked = 0;
  std::size_t dispatches = 0;
  for (DecodeRule rule : {DecodeRule::kLeastOutstandingTokens, DecodeRule::kRoundRobin, DecodeRule::kWeightedRandom}) {
    ClusterConfig c;
    for (int i = 0; i < 4; ++i) c.models.push_back(llama(i));
    c.decode_pool_mode = DecodePoolMode::kShared;
    c.decode_pool_size = 3;
    c.decode_rule = rule;
    c.routing_seed = 5;
    const RunResult ref = run(c, trace, p, make_routing_policy(c));
    const RunSummary ref_sum = summarize(measurement_filter(ref.requests, w), c, w);
    for (int t = 0; t < 6; ++t) {
      std::shuffle(perm.begin(), perm.end(), rng);
      std::vector<Request> relabeled = trace;
      for (Request& r : relabeled) r.model_id = perm[static_cast<std::size_t>(r.model_id)];
      const RunResult got = run(c, relabeled, p, make_routing_policy(c));
      if (got.dispatches.size() != ref.dispatches.size()) return {false, "dispatch count changed under relabeling"};
      for (std::size_t i = 0; i < ref.dispatches.size(); ++i) {
        if (got.dispatches[i].request_id != ref.dispatches[i].request_id ||
            got.dispatches[i].decode_worker != ref.dispatches[i].decode_worker)
          return {false, fmt("dispatch %zu differs under relabeling (%s)", i, to_string(rule))};
      }
      if (!same_summary(summarize(measurement_filter(got.requests, w), c, w), ref_sum))
        return {false, fmt("RunSummary differs under relabeling (%s)", to_string(rule))};
      ++checked;
    }
    dispatches = ref.dispatches.size();
  }
  return {true, fmt("%d label permutations x {LOT, round-robin, weighted-random}: %zu dispatches and RunSummary "
                    "identical",
                    checked, dispatches)};
}

// ---------------------------------------------------------------------------

struct Criterion {
  const char* id;
  const char* title;
  double budget_s;
  std::function<Verdict()> check;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {"AC1", "Zipf split vs direct summation", 1, ac1_zipf},
      {"AC2", "conservation on random configs", 30, ac2_conservation},
      {"AC3", "sweep determinism across --parallel", 60, ac3_determinism},
      {"AC4", "closed-form single-request chain", 1, ac4_closed_form},
      {"AC5", "cost-model orderings", 10, ac5_orderings},
      {"AC6", "calibration reproduces single-stream latencies", 10, ac6_calibration},
      {"AC7", "TTFT scaling with ISL", 10, ac7_isl_scaling},
      {"AC8", "decode-pool consolidation trade-off", 120, ac8_consolidation},
      {"AC9", "skew robustness", 300, ac9_skew},
      {"AC10", "achieved/offered ratio grid", 300, ac10_ratio_grid},
      {"AC11", "model-label permutation invariance", 30, ac11_model_agnostic},
  };
  int failed = 0;
  for (const Criterion& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.check();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = elapsed <= c.budget_s;
    const bool pass = v.pass && in_time;
    failed += !pass;
    std::printf("%s %-4s %s: %s [%.2f s / %.0f s budget%s]\n", pass ? "PASS" : "FAIL", c.id, c.title,
                v.detail.c_str(), elapsed, c.budget_s, in_time ? "" : ", OVER BUDGET");
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? EXIT_SUCCESS : EXIT_FAILURE;
}
