// Copyright (C) 2026 The poolsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "poolsim/workload.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <tuple>

namespace poolsim {

std::vector<Violation> check_workload(const WorkloadSpec& s) {
  std::vector<Violation> out;
  if (s.n_models < 1) out.push_back({"workload.n_models", "must be >= 1"});
  if (!(s.total_rps > 0)) out.push_back({"workload.total_rps", "must be > 0"});
  if (!(s.alpha >= 0)) out.push_back({"workload.alpha", "must be >= 0"});
  if (s.isl < 1) out.push_back({"workload.isl", "must be >= 1"});
  if (s.osl < 1) out.push_back({"workload.osl", "must be >= 1"});
  if (!(s.grace_period >= 0)) out.push_back({"workload.grace_period", "must be >= 0"});
  if (!(s.measurement_window > 0)) out.push_back({"workload.measurement_window", "must be > 0"});
  if (!(s.drain_factor >= 0)) out.push_back({"workload.drain_factor", "must be >= 0"});
  return out;
}

std::vector<double> zipf_split(int n_models, double alpha, double total_rps) {
  std::vector<double> weights(static_cast<std::size_t>(n_models));
  double norm = 0;
  for (int i = 0; i < n_models; ++i) {
    weights[static_cast<std::size_t>(i)] = std::pow(static_cast<double>(i + 1), -alpha);
    norm += weights[static_cast<std::size_t>(i)];
  }
  for (double& w : weights) w = total_rps * (w / norm);
  return weights;
}

std::uint64_t substream_seed(std::uint64_t seed, int model_id) noexcept {
  std::uint64_t z = seed + static_cast<std::uint64_t>(model_id + 1) * 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::int64_t to_ns(Seconds t) noexcept { return std::llround(t * 1e9); }
Seconds from_ns(std::int64_t ns) noexcept { return static_cast<double>(ns) / 1e9; }

std::vector<Request> generate_trace(const WorkloadSpec& spec) {
  const std::vector<double> rates = zipf_split(spec.n_models, spec.alpha, spec.total_rps);
  const Seconds horizon = spec.horizon();

  struct Arrival {
    std::int64_t ns;
    int model;
    std::int64_t k;
  };
  std::vector<Arrival> arrivals;
  for (int m = 0; m < spec.n_models; ++m) {
    const double rate = rates[static_cast<std::size_t>(m)];
    std::mt19937_64 rng(substream_seed(spec.seed, m));
    double t = 0;
    for (std::int64_t k = 0;; ++k) {
      if (spec.arrival_process == ArrivalProcess::kDeterministicInterval) {
        t = static_cast<double>(k) / rate;
      } else {
        const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        t += -std::log1p(-u) / rate;
      }
      if (t > horizon) break;
      arrivals.push_back({to_ns(t), m, k});
    }
  }
  std::sort(arrivals.begin(), arrivals.end(), [](const Arrival& a, const Arrival& b) {
    return std::tie(a.ns, a.model, a.k) < std::tie(b.ns, b.model, b.k);
  });

  std::vector<Request> trace;
  trace.reserve(arrivals.size());
  for (const Arrival& a : arrivals) {
    Request r;
    r.id = static_cast<std::int64_t>(trace.size());
    r.model_id = a.model;
    r.arrival_time = from_ns(a.ns);
    r.isl = spec.isl;
    r.target_osl = spec.osl;
    r.timestamps.arrival = r.arrival_time;
    trace.push_back(r);
  }
  return trace;
}

std::vector<Request> measurement_filter(std::span<const Request> requests, const WorkloadSpec& spec) {
  std::vector<Request> out;
  const Seconds lo = spec.window_start();
  const Seconds hi = spec.window_end();
  for (const Request& r : requests) {
    if (!r.completed()) continue;
    const Seconds t = r.timestamps.completion;
    if (t >= lo && t <= hi) out.push_back(r);
  }
  return out;
}

void write_trace(std::ostream& out, std::span<const Request> trace) {
  out << "arrival_time_ns,model_id,isl,osl\n";
  for (const Request& r : trace) {
    out << to_ns(r.arrival_time) << ',' << r.model_id << ',' << r.isl << ',' << r.target_osl << '\n';
  }
}

std::vector<Request> read_trace(std::istream& in) {
  std::vector<Request> trace;
  std::vector<Violation> errors;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#' || line.rfind("arrival_time_ns", 0) == 0) continue;
    std::istringstream ss(line);
    std::int64_t ns = 0, isl = 0, osl = 0;
    int model = 0;
    char c1 = 0, c2 = 0, c3 = 0;
    if (!(ss >> ns >> c1 >> model >> c2 >> isl >> c3 >> osl) || c1 != ',' || c2 != ',' || c3 != ',') {
      errors.push_back({"trace:" + std::to_string(line_no), "expected arrival_time_ns,model_id,isl,osl"});
      continue;
    }
    if (isl < 1 || osl < 1 || model < 0 || ns < 0) {
      errors.push_back({"trace:" + std::to_string(line_no), "isl/osl must be >= 1, model_id and time >= 0"});
      continue;
    }
    Request r;
    r.model_id = model;
    r.arrival_time = from_ns(ns);
    r.isl = isl;
    r.target_osl = osl;
    r.timestamps.arrival = r.arrival_time;
    trace.push_back(r);
  }
  if (!errors.empty()) throw InvalidConfig(std::move(errors));
  std::stable_sort(trace.begin(), trace.end(),
                   [](const Request& a, const Request& b) { return a.arrival_time < b.arrival_time; });
  for (std::size_t i = 0; i < trace.size(); ++i) trace[i].id = static_cast<std::int64_t>(i);
  return trace;
}

std::vector<Request> read_trace_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidConfig(path, "cannot open trace file");
  return read_trace(in);
}

const char* to_string(ArrivalProcess p) {
  return p == ArrivalProcess::kPoisson ? "poisson" : "deterministic";
}

ArrivalProcess parse_arrival_process(const std::string& s) {
  if (s == "poisson") return ArrivalProcess::kPoisson;
  if (s == "deterministic" || s == "deterministic-interval") return ArrivalProcess::kDeterministicInterval;
  throw std::invalid_argument("expected 'poisson' or 'deterministic', got '" + s + "'");
}

}  // namespace poolsim
