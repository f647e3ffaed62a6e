// Copyright (C) 2026 The poolsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "poolsim/harness.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <ostream>
#include <set>
#include <thread>

namespace poolsim {

using nlohmann::json;

SummaryContext summary_context(const ExperimentConfig& c) {
  return {config_hash(c),    c.cluster.decode_pool_mode, c.cluster.decode_pool_size, c.workload.alpha,
          c.workload.isl,    c.workload.osl,             c.workload.total_rps};
}

ExperimentOutcome run_experiment_on_trace(const ExperimentConfig& config, std::span<const Request> trace,
                                          EngineOptions options) {
  if (auto bad = check_experiment(config); !bad.empty()) throw InvalidConfig(std::move(bad));
  options.horizon = config.workload.horizon();
  options.max_outstanding_requests = config.max_outstanding_requests;
  ExperimentOutcome out;
  try {
    out.run = run(config.cluster, trace, config.cost, make_routing_policy(config.cluster), options);
    const auto window = measurement_filter(out.run.requests, config.workload);
    out.summary = summarize(window, config.cluster, config.workload);
  } catch (const InvalidConfig&) {
    throw;
  } catch (const Error& e) {
    out.error_kind = e.kind();
    out.error_message = e.what();
  }
  return out;
}

ExperimentOutcome run_experiment(const ExperimentConfig& config, EngineOptions options) {
  if (auto bad = check_experiment(config); !bad.empty()) throw InvalidConfig(std::move(bad));
  const std::vector<Request> trace = generate_trace(config.workload);
  return run_experiment_on_trace(config, trace, options);
}

namespace {

template <class T, class F>
void read_axis(const json& axes, const char* key, std::vector<T>& out, std::vector<Violation>& errors, F convert) {
  auto it = axes.find(key);
  if (it == axes.end()) return;
  const std::string path = std::string("axes.") + key;
  if (!it->is_array() || it->empty()) {
    errors.push_back({path, "expected a non-empty array"});
    return;
  }
  for (std::size_t i = 0; i < it->size(); ++i) {
    try {
      out.push_back(convert((*it)[i]));
    } catch (const std::exception& e) {
      errors.push_back({path + "[" + std::to_string(i) + "]", e.what()});
    }
  }
}

}  // namespace

SweepSpec parse_sweep(const json& j, const std::string& base_dir) {
  std::vector<Violation> errors;
  if (!j.is_object()) throw InvalidConfig("", "sweep spec must be an object");
  for (const auto& [key, value] : j.items()) {
    if (key != "base" && key != "base_file" && key != "axes" && key != "replicates" && key != "max_cells")
      errors.push_back({key, "unknown key"});
  }
  SweepSpec spec;
  if (auto it = j.find("base"); it != j.end()) {
    spec.base = parse_experiment(*it);
  } else if (auto f = j.find("base_file"); f != j.end() && f->is_string()) {
    const std::filesystem::path p = std::filesystem::path(base_dir) / f->get<std::string>();
    spec.base = load_experiment_file(p.string());
  } else {
    errors.push_back({"base", "sweep needs an inline 'base' config or a 'base_file' path"});
  }
  if (auto it = j.find("replicates"); it != j.end()) {
    if (!it->is_number_integer() || it->get<int>() < 1) errors.push_back({"replicates", "must be an integer >= 1"});
    else spec.replicates = it->get<int>();
  }
  if (auto it = j.find("max_cells"); it != j.end()) {
    if (!it->is_number_integer() || it->get<long long>() < 1) errors.push_back({"max_cells", "must be an integer >= 1"});
    else spec.max_cells = it->get<std::size_t>();
  }
  if (auto it = j.find("axes"); it != j.end()) {
    const json& a = *it;
    for (const auto& [key, value] : a.items()) {
      static const std::set<std::string> known = {"decode_pool_mode", "decode_pool_size", "alpha", "osl", "isl",
                                                  "offered_rps", "decode_weight_bits", "decode_rule", "seed"};
      if (!known.contains(key)) errors.push_back({"axes." + key, "unknown axis"});
    }
    SweepAxes& x = spec.axes;
    read_axis(a, "decode_pool_mode", x.decode_pool_mode, errors,
              [](const json& v) { return parse_pool_mode(v.get<std::string>()); });
    read_axis(a, "decode_pool_size", x.decode_pool_size, errors, [](const json& v) { return v.get<int>(); });
    read_axis(a, "alpha", x.alpha, errors, [](const json& v) { return v.get<double>(); });
    read_axis(a, "osl", x.osl, errors, [](const json& v) { return v.get<Tokens>(); });
    read_axis(a, "isl", x.isl, errors, [](const json& v) { return v.get<Tokens>(); });
    read_axis(a, "offered_rps", x.offered_rps, errors, [](const json& v) { return v.get<double>(); });
    read_axis(a, "decode_weight_bits", x.decode_weight_bits, errors, [](const json& v) { return v.get<int>(); });
    read_axis(a, "decode_rule", x.decode_rule, errors,
              [](const json& v) { return parse_decode_rule(v.get<std::string>()); });
    read_axis(a, "seed", x.seed, errors, [](const json& v) { return v.get<std::uint64_t>(); });
  }
  if (errors.empty()) {
    std::size_t cells = 1;
    const SweepAxes& x = spec.axes;
    for (std::size_t n : {x.decode_pool_mode.size(), x.decode_pool_size.size(), x.alpha.size(), x.osl.size(),
                          x.isl.size(), x.offered_rps.size(), x.decode_weight_bits.size(), x.decode_rule.size(),
                          x.seed.size()}) {
      cells *= std::max<std::size_t>(n, 1);
    }
    if (cells * static_cast<std::size_t>(spec.replicates) > spec.max_cells)
      errors.push_back({"axes", "sweep has " + std::to_string(cells * static_cast<std::size_t>(spec.replicates)) +
                                    " runs, above max_cells=" + std::to_string(spec.max_cells)});
  }
  if (!errors.empty()) throw InvalidConfig(std::move(errors));
  return spec;
}

SweepSpec load_sweep_file(const std::string& path) {
  const std::filesystem::path p(path);
  return parse_sweep(read_json_file(path), p.has_parent_path() ? p.parent_path().string() : ".");
}

std::vector<ExperimentConfig> expand_cells(const SweepSpec& spec) {
  std::vector<ExperimentConfig> cells{spec.base};
  auto expand = [&cells](const auto& values, auto apply) {
    if (values.empty()) return;
    std::vector<ExperimentConfig> next;
    next.reserve(cells.size() * values.size());
    for (const ExperimentConfig& c : cells) {
      for (const auto& v : values) {
        ExperimentConfig copy = c;
        apply(copy, v);
        next.push_back(std::move(copy));
      }
    }
    cells = std::move(next);
  };
  const SweepAxes& x = spec.axes;
  expand(x.decode_pool_mode, [](ExperimentConfig& c, DecodePoolMode v) { c.cluster.decode_pool_mode = v; });
  expand(x.decode_pool_size, [](ExperimentConfig& c, int v) { c.cluster.decode_pool_size = v; });
  expand(x.alpha, [](ExperimentConfig& c, double v) { c.workload.alpha = v; });
  expand(x.osl, [](ExperimentConfig& c, Tokens v) { c.workload.osl = v; });
  expand(x.isl, [](ExperimentConfig& c, Tokens v) { c.workload.isl = v; });
  expand(x.offered_rps, [](ExperimentConfig& c, double v) { c.workload.total_rps = v; });
  expand(x.decode_weight_bits, [](ExperimentConfig& c, int v) {
    for (ModelProfile& m : c.cluster.models) m.decode_weight_bits = v;
  });
  expand(x.decode_rule, [](ExperimentConfig& c, DecodeRule v) { c.cluster.decode_rule = v; });
  expand(x.seed, [](ExperimentConfig& c, std::uint64_t v) { c.workload.seed = v; });
  return cells;
}

std::vector<SweepRow> run_sweep(const SweepSpec& spec, int parallel) {
  const std::vector<ExperimentConfig> cells = expand_cells(spec);
  const auto reps = static_cast<std::size_t>(spec.replicates);
  std::vector<SweepRow> rows(cells.size() * reps);
  for (std::size_t c = 0; c < cells.size(); ++c) {
    for (std::size_t r = 0; r < reps; ++r) {
      SweepRow& row = rows[c * reps + r];
      row.cell = c;
      row.replicate = static_cast<int>(r);
      row.config = cells[c];
      row.config.workload.seed += r;
      row.config_hash = config_hash(row.config);
    }
  }

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < rows.size(); i = next++) {
      SweepRow& row = rows[i];
      try {
        ExperimentOutcome out = run_experiment(row.config);
        row.summary = out.summary;
        row.error_kind = out.error_kind;
        row.error_message = out.error_message;
      } catch (const Error& e) {
        row.error_kind = e.kind();
        row.error_message = e.what();
      } catch (const std::exception& e) {
        row.error_kind = "InternalError";
        row.error_message = e.what();
      }
    }
  };
  const int threads = std::max(1, std::min<int>(parallel, static_cast<int>(rows.size())));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  return rows;
}

namespace {

std::string csv_escape(std::string s) {
  for (char& c : s) {
    if (c == ',' || c == '\n' || c == '\r' || c == '"') c = ' ';
  }
  return s;
}

}  // namespace

std::string sweep_csv_header() {
  return "cell,replicate,seed," + summary_csv_header() + ",decode_weight_bits,decode_rule,arrival_process,error";
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << sweep_csv_header() << '\n';
  for (const SweepRow& r : rows) {
    const ExperimentConfig& c = r.config;
    SummaryContext ctx = summary_context(c);
    out << r.cell << ',' << r.replicate << ',' << c.workload.seed << ','
        << summary_csv_row(ctx, r.summary ? &*r.summary : nullptr) << ','
        << c.cluster.models.front().decode_weight_bits << ',' << to_string(c.cluster.effective_decode_rule()) << ','
        << to_string(c.workload.arrival_process) << ','
        << (r.error_kind.empty() ? "" : csv_escape(r.error_kind + ": " + r.error_message)) << '\n';
  }
}

json to_json(const RunSummary& s) {
  auto stats = [](const LatencyStats& l) {
    return json{{"mean_ms", l.mean * 1e3}, {"p50_ms", l.p50 * 1e3}, {"p99_ms", l.p99 * 1e3}};
  };
  return {{"completed", s.completed},
          {"output_tokens", s.output_tokens},
          {"ttft", stats(s.ttft)},
          {"tpot", stats(s.tpot)},
          {"itl_mean_ms", s.itl_mean * 1e3},
          {"interactivity_tok_s", s.interactivity_tok_s},
          {"output_throughput_tok_s", s.output_throughput_tok_s},
          {"throughput_per_decode_gpu", s.throughput_per_decode_gpu},
          {"throughput_per_gpu_all", s.throughput_per_gpu_all},
          {"achieved_rps", s.achieved_rps},
          {"offered_rps", s.offered_rps},
          {"achieved_offered_ratio", s.achieved_offered_ratio}};
}

void write_sweep_json(std::ostream& out, const std::vector<SweepRow>& rows) {
  json arr = json::array();
  for (const SweepRow& r : rows) {
    const ExperimentConfig& c = r.config;
    json row = {{"cell", r.cell},
                {"replicate", r.replicate},
                {"seed", c.workload.seed},
                {"config_hash", r.config_hash},
                {"decode_pool_mode", to_string(c.cluster.decode_pool_mode)},
                {"decode_pool_size", c.cluster.decode_pool_size},
                {"alpha", c.workload.alpha},
                {"isl", c.workload.isl},
                {"osl", c.workload.osl},
                {"offered_rps", c.workload.total_rps},
                {"decode_weight_bits", c.cluster.models.front().decode_weight_bits},
                {"decode_rule", to_string(c.cluster.effective_decode_rule())}};
    if (r.summary) row["summary"] = to_json(*r.summary);
    if (!r.error_kind.empty()) row["error"] = {{"kind", r.error_kind}, {"message", r.error_message}};
    arr.push_back(std::move(row));
  }
  out << arr.dump(2) << '\n';
}

void write_ratio_grid_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << "offered_rps,alpha,mode,ratio\n";
  for (const SweepRow& r : rows) {
    if (!r.summary) continue;
    out << format_number(r.config.workload.total_rps) << ',' << format_number(r.config.workload.alpha) << ','
        << to_string(r.config.cluster.decode_pool_mode) << ',' << format_number(r.summary->achieved_offered_ratio)
        << '\n';
  }
}

}  // namespace poolsim
