// Copyright (C) 2026 The poolsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "poolsim/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <type_traits>

namespace poolsim {

using nlohmann::json;

namespace {

class Reader {
 public:
  explicit Reader(std::vector<Violation>& errors) : errors_(errors) {}

  void fail(const std::string& path, const std::string& msg) { errors_.push_back({path, msg}); }

  // True when `j` is an object; unknown keys are reported.
  bool object(const json& j, const std::string& path, std::initializer_list<const char*> known) {
    if (!j.is_object()) {
      fail(path, "expected an object");
      return false;
    }
    std::set<std::string> allowed(known.begin(), known.end());
    for (const auto& [key, value] : j.items()) {
      if (!allowed.contains(key)) fail(path + "." + key, "unknown key");
    }
    return true;
  }

  template <class T>
  void field(const json& obj, const std::string& path, const char* key, T& out) {
    auto it = obj.find(key);
    if (it == obj.end()) return;
    const std::string p = path + "." + key;
    if constexpr (std::is_same_v<T, bool>) {
      if (!it->is_boolean()) return fail(p, "expected true/false");
      out = it->template get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!it->is_string()) return fail(p, "expected a string");
      out = it->template get<std::string>();
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!it->is_number()) return fail(p, "expected a number");
      out = it->template get<double>();
    } else {
      static_assert(std::is_integral_v<T>);
      if (!it->is_number()) return fail(p, "expected an integer");
      const double v = it->template get<double>();
      if (it->is_number_float() && (v != std::floor(v) || std::abs(v) > 9.0e18)) return fail(p, "expected an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (it->is_number_unsigned()) {
          out = static_cast<T>(it->template get<std::uint64_t>());
          return;
        }
        if (v < 0) return fail(p, "must be >= 0");
      }
      out = it->is_number_float() ? static_cast<T>(v) : static_cast<T>(it->template get<std::int64_t>());
    }
  }

  template <class E>
  void enum_field(const json& obj, const std::string& path, const char* key, E& out, E (*parse)(const std::string&)) {
    std::string s;
    const std::size_t before = errors_.size();
    field(obj, path, key, s);
    if (errors_.size() != before || s.empty()) return;
    try {
      out = parse(s);
    } catch (const std::invalid_argument& e) {
      fail(path + "." + key, e.what());
    }
  }

 private:
  std::vector<Violation>& errors_;
};

void read_model(Reader& rd, const json& j, const std::string& path, ModelProfile& m) {
  if (!rd.object(j, path, {"name", "param_count", "prefill_weight_bits", "decode_weight_bits", "kv_bytes_per_token",
                           "shared_decoder"}))
    return;
  rd.field(j, path, "name", m.name);
  rd.field(j, path, "param_count", m.param_count);
  rd.field(j, path, "prefill_weight_bits", m.prefill_weight_bits);
  rd.field(j, path, "decode_weight_bits", m.decode_weight_bits);
  rd.field(j, path, "kv_bytes_per_token", m.kv_bytes_per_token);
  rd.field(j, path, "shared_decoder", m.shared_decoder);
}

ModelProfile default_model() {
  ModelProfile m;
  m.name = "llama3.1-8b";
  m.param_count = 8'030'000'000;
  m.kv_bytes_per_token = 131072;  // 32 layers x 8 KV heads x 128 dims x (K, V) x 2 bytes
  return m;
}

void read_cost(Reader& rd, const json& j, const std::string& path, CostParams& c) {
  if (!rd.object(j, path, {"prefill_flops_per_token", "prefill_fixed_overhead", "decode_fixed_overhead",
                           "dequant_compute_penalty", "mfu", "mbu"}))
    return;
  rd.field(j, path, "prefill_flops_per_token", c.prefill_flops_per_token);
  rd.field(j, path, "prefill_fixed_overhead", c.prefill_fixed_overhead);
  rd.field(j, path, "decode_fixed_overhead", c.decode_fixed_overhead);
  rd.field(j, path, "dequant_compute_penalty", c.dequant_compute_penalty);
  rd.field(j, path, "mfu", c.mfu);
  rd.field(j, path, "mbu", c.mbu);
}

}  // namespace

CostParams parse_cost_params(const json& j) {
  std::vector<Violation> errors;
  Reader rd(errors);
  CostParams c;
  read_cost(rd, j, "cost", c);
  for (auto& v : check_cost_params(c)) errors.push_back(v);
  if (!errors.empty()) throw InvalidConfig(std::move(errors));
  return c;
}

ExperimentConfig parse_experiment(const json& j) {
  std::vector<Violation> errors;
  Reader rd(errors);
  ExperimentConfig cfg;
  if (!rd.object(j, "", {"cluster", "routing", "workload", "cost", "engine"})) throw InvalidConfig(std::move(errors));

  if (auto it = j.find("cluster"); it != j.end()) {
    const std::string p = "cluster";
    if (rd.object(*it, p, {"decode_pool_mode", "decode_pool_size", "gpu", "models"})) {
      rd.enum_field(*it, p, "decode_pool_mode", cfg.cluster.decode_pool_mode, parse_pool_mode);
      rd.field(*it, p, "decode_pool_size", cfg.cluster.decode_pool_size);
      if (auto g = it->find("gpu"); g != it->end()) {
        const std::string gp = p + ".gpu";
        if (rd.object(*g, gp, {"flops", "hbm_bandwidth", "hbm_capacity", "interconnect_bandwidth",
                               "interconnect_latency"})) {
          GpuSpec& gpu = cfg.cluster.gpu;
          rd.field(*g, gp, "flops", gpu.flops);
          rd.field(*g, gp, "hbm_bandwidth", gpu.hbm_bandwidth);
          rd.field(*g, gp, "hbm_capacity", gpu.hbm_capacity);
          rd.field(*g, gp, "interconnect_bandwidth", gpu.interconnect_bandwidth);
          rd.field(*g, gp, "interconnect_latency", gpu.interconnect_latency);
        }
      }
      if (auto m = it->find("models"); m != it->end()) {
        const std::string mp = p + ".models";
        if (m->is_array()) {
          for (std::size_t i = 0; i < m->size(); ++i) {
            ModelProfile model = default_model();
            model.name = "model" + std::to_string(i);
            read_model(rd, (*m)[i], mp + "[" + std::to_string(i) + "]", model);
            model.model_id = static_cast<int>(i);
            cfg.cluster.models.push_back(model);
          }
        } else if (rd.object(*m, mp, {"count", "template"})) {
          // {"count": N, "template": {...}} expands to N identical models.
          int count = 0;
          rd.field(*m, mp, "count", count);
          ModelProfile tmpl = default_model();
          if (auto t = m->find("template"); t != m->end()) read_model(rd, *t, mp + ".template", tmpl);
          if (count < 1) rd.fail(mp + ".count", "must be >= 1");
          for (int i = 0; i < count; ++i) {
            ModelProfile model = tmpl;
            model.model_id = i;
            model.name = tmpl.name + "-" + std::to_string(i);
            cfg.cluster.models.push_back(model);
          }
        }
      }
    }
  }
  const auto cluster_it = j.find("cluster");
  const bool models_given = cluster_it != j.end() && cluster_it->is_object() && cluster_it->contains("models");
  if (cfg.cluster.models.empty() && !models_given) {
    for (int i = 0; i < 4; ++i) {
      ModelProfile model = default_model();
      model.model_id = i;
      model.name += "-" + std::to_string(i);
      cfg.cluster.models.push_back(model);
    }
  }

  if (auto it = j.find("routing"); it != j.end()) {
    if (rd.object(*it, "routing", {"decode_rule", "load_metric", "seed"})) {
      rd.enum_field(*it, "routing", "decode_rule", cfg.cluster.decode_rule, parse_decode_rule);
      rd.enum_field(*it, "routing", "load_metric", cfg.cluster.load_metric, parse_load_metric);
      rd.field(*it, "routing", "seed", cfg.cluster.routing_seed);
    }
  }

  if (auto it = j.find("workload"); it != j.end()) {
    const std::string p = "workload";
    if (rd.object(*it, p, {"total_rps", "alpha", "isl", "osl", "grace_period", "measurement_window", "drain_factor",
                           "seed", "arrival_process"})) {
      WorkloadSpec& w = cfg.workload;
      rd.field(*it, p, "total_rps", w.total_rps);
      rd.field(*it, p, "alpha", w.alpha);
      rd.field(*it, p, "isl", w.isl);
      rd.field(*it, p, "osl", w.osl);
      rd.field(*it, p, "grace_period", w.grace_period);
      rd.field(*it, p, "measurement_window", w.measurement_window);
      rd.field(*it, p, "drain_factor", w.drain_factor);
      rd.field(*it, p, "seed", w.seed);
      rd.enum_field(*it, p, "arrival_process", w.arrival_process, parse_arrival_process);
    }
  }
  cfg.workload.n_models = cfg.cluster.n_models();

  if (auto it = j.find("cost"); it != j.end()) read_cost(rd, *it, "cost", cfg.cost);

  if (auto it = j.find("engine"); it != j.end()) {
    if (rd.object(*it, "engine", {"max_outstanding_requests"}))
      rd.field(*it, "engine", "max_outstanding_requests", cfg.max_outstanding_requests);
  }

  if (errors.empty()) errors = check_experiment(cfg);
  if (!errors.empty()) throw InvalidConfig(std::move(errors));
  return cfg;
}

std::vector<Violation> check_experiment(const ExperimentConfig& cfg) {
  std::vector<Violation> out = check_cluster(cfg.cluster);
  for (auto& v : check_workload(cfg.workload)) out.push_back(std::move(v));
  for (auto& v : check_cost_params(cfg.cost)) out.push_back(std::move(v));
  if (cfg.workload.n_models != cfg.cluster.n_models())
    out.push_back({"workload.n_models", "must equal the number of cluster models"});
  if (cfg.max_outstanding_requests < 1) out.push_back({"engine.max_outstanding_requests", "must be >= 1"});
  return out;
}

ExperimentConfig load_experiment_file(const std::string& path) { return parse_experiment(read_json_file(path)); }

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidConfig(path, "cannot open file");
  try {
    return json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw InvalidConfig(path, std::string("JSON parse error: ") + e.what());
  }
}

json to_json(const CostParams& c) {
  return {{"prefill_flops_per_token", c.prefill_flops_per_token},
          {"prefill_fixed_overhead", c.prefill_fixed_overhead},
          {"decode_fixed_overhead", c.decode_fixed_overhead},
          {"dequant_compute_penalty", c.dequant_compute_penalty},
          {"mfu", c.mfu},
          {"mbu", c.mbu}};
}

json to_json(const ExperimentConfig& cfg) {
  json models = json::array();
  for (const ModelProfile& m : cfg.cluster.models) {
    models.push_back({{"name", m.name},
                      {"param_count", m.param_count},
                      {"prefill_weight_bits", m.prefill_weight_bits},
                      {"decode_weight_bits", m.decode_weight_bits},
                      {"kv_bytes_per_token", m.kv_bytes_per_token},
                      {"shared_decoder", m.shared_decoder}});
  }
  const GpuSpec& g = cfg.cluster.gpu;
  const WorkloadSpec& w = cfg.workload;
  return {
      {"cluster",
       {{"decode_pool_mode", to_string(cfg.cluster.decode_pool_mode)},
        {"decode_pool_size", cfg.cluster.decode_pool_size},
        {"gpu",
         {{"flops", g.flops},
          {"hbm_bandwidth", g.hbm_bandwidth},
          {"hbm_capacity", g.hbm_capacity},
          {"interconnect_bandwidth", g.interconnect_bandwidth},
          {"interconnect_latency", g.interconnect_latency}}},
        {"models", models}}},
      {"routing",
       {{"decode_rule", to_string(cfg.cluster.decode_rule)},
        {"load_metric", to_string(cfg.cluster.load_metric)},
        {"seed", cfg.cluster.routing_seed}}},
      {"workload",
       {{"total_rps", w.total_rps},
        {"alpha", w.alpha},
        {"isl", w.isl},
        {"osl", w.osl},
        {"grace_period", w.grace_period},
        {"measurement_window", w.measurement_window},
        {"drain_factor", w.drain_factor},
        {"seed", w.seed},
        {"arrival_process", to_string(w.arrival_process)}}},
      {"cost", to_json(cfg.cost)},
      {"engine", {{"max_outstanding_requests", cfg.max_outstanding_requests}}},
  };
}

std::string config_hash(const ExperimentConfig& cfg) {
  const std::string text = to_json(cfg).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

const char* const kConfigSchemaHelp = R"(config schema (JSON, comments allowed):
  cluster.decode_pool_mode      "isolated" | "shared"
  cluster.decode_pool_size      K >= 1 (isolated: K == number of models)
  cluster.gpu.{flops, hbm_bandwidth, hbm_capacity, interconnect_bandwidth, interconnect_latency}
  cluster.models                [ {name, param_count, prefill_weight_bits (16|4), decode_weight_bits (16|4),
                                   kv_bytes_per_token, shared_decoder}, ... ]
                                or {"count": N, "template": {...}}
  routing.decode_rule           auto | pinned | least_outstanding_tokens | round_robin | weighted_random
  routing.load_metric           outstanding_tokens | kv_only
  routing.seed                  integer (weighted_random)
  workload.{total_rps, alpha, isl, osl, grace_period, measurement_window, drain_factor, seed}
  workload.arrival_process      poisson | deterministic
  cost.{prefill_flops_per_token, prefill_fixed_overhead, decode_fixed_overhead,
        dequant_compute_penalty, mfu, mbu}
  engine.max_outstanding_requests
)";

}  // namespace poolsim
