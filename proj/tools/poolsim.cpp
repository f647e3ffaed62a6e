// Copyright (C) 2026 The poolsim Authors
// SPDX-License-Identifier: Apache-2.0

// poolsim: command-line front end for the disaggregated decode-pool simulator.

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <memory>
#include <sstream>

#include "poolsim/calibration.hpp"
#include "poolsim/config.hpp"
#include "poolsim/harness.hpp"
#include "poolsim/workload.hpp"

namespace {

using nlohmann::json;
using namespace poolsim;

struct Common {
  std::string out;
  std::string format = "csv";
  int parallel = 1;
  std::optional<std::uint64_t> seed;
};

// Writes to --out when given, stdout otherwise.
class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty()) {
      file_ = std::make_unique<std::ofstream>(path);
      if (!*file_) throw InvalidConfig(path, "cannot open output file");
    }
  }
  std::ostream& stream() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

void report_error(const std::string& kind, const std::string& message, const std::vector<Violation>& violations = {}) {
  json err = {{"error", kind}, {"message", message}};
  if (!violations.empty()) {
    err["violations"] = json::array();
    for (const auto& v : violations) err["violations"].push_back({{"path", v.path}, {"message", v.message}});
  }
  std::cerr << err.dump() << '\n';
}

ExperimentConfig load_config(const std::string& path, const Common& common) {
  ExperimentConfig cfg = load_experiment_file(path);
  if (common.seed) cfg.workload.seed = *common.seed;
  return cfg;
}

void write_summary(std::ostream& out, const ExperimentConfig& cfg, const ExperimentOutcome& outcome,
                   const std::string& format) {
  if (format == "json") {
    json j = {{"config_hash", config_hash(cfg)}, {"config", to_json(cfg)}};
    if (outcome.summary) j["summary"] = to_json(*outcome.summary);
    if (!outcome.error_kind.empty()) j["error"] = {{"kind", outcome.error_kind}, {"message", outcome.error_message}};
    const RunCounters& c = outcome.run.counters;
    j["counters"] = {{"completed", c.completed}, {"over_capacity", c.over_capacity}, {"unfinished", c.unfinished}};
    out << j.dump(2) << '\n';
    return;
  }
  out << summary_csv_header() << '\n'
      << summary_csv_row(summary_context(cfg), outcome.summary ? &*outcome.summary : nullptr) << '\n';
}

int finish_run(const ExperimentConfig& cfg, const ExperimentOutcome& outcome, const Common& common,
               const std::string& events_path) {
  Output out(common.out);
  write_summary(out.stream(), cfg, outcome, common.format);
  if (!events_path.empty()) {
    Output ev(events_path);
    write_event_trace(ev.stream(), outcome.run.events);
  }
  if (!outcome.error_kind.empty()) {
    report_error(outcome.error_kind, outcome.error_message);
    return 1;
  }
  return 0;
}

int cmd_validate(const std::string& config_path, const Common& common) {
  const ExperimentConfig cfg = load_config(config_path, common);
  std::cout << json{{"valid", true}, {"config_hash", config_hash(cfg)}}.dump() << '\n';
  return 0;
}

int cmd_run(const std::string& config_path, const std::string& events_path, const std::string& trace_out,
            const Common& common) {
  const ExperimentConfig cfg = load_config(config_path, common);
  const std::vector<Request> trace = generate_trace(cfg.workload);
  if (!trace_out.empty()) {
    Output t(trace_out);
    write_trace(t.stream(), trace);
  }
  EngineOptions opts;
  opts.record_events = !events_path.empty();
  return finish_run(cfg, run_experiment_on_trace(cfg, trace, opts), common, events_path);
}

int cmd_replay(const std::string& config_path, const std::string& trace_path, const std::string& events_path,
               const Common& common) {
  const ExperimentConfig cfg = load_config(config_path, common);
  const std::vector<Request> trace = read_trace_file(trace_path);
  EngineOptions opts;
  opts.record_events = !events_path.empty();
  return finish_run(cfg, run_experiment_on_trace(cfg, trace, opts), common, events_path);
}

int cmd_trace(const std::string& config_path, const Common& common) {
  const ExperimentConfig cfg = load_config(config_path, common);
  Output out(common.out);
  write_trace(out.stream(), generate_trace(cfg.workload));
  return 0;
}

int cmd_sweep(const std::string& spec_path, const std::string& grid_path, const Common& common) {
  SweepSpec spec = load_sweep_file(spec_path);
  if (common.seed) spec.base.workload.seed = *common.seed;
  const std::vector<SweepRow> rows = run_sweep(spec, common.parallel);
  Output out(common.out);
  if (common.format == "json") write_sweep_json(out.stream(), rows);
  else write_sweep_csv(out.stream(), rows);
  if (!grid_path.empty()) {
    Output grid(grid_path);
    write_ratio_grid_csv(grid.stream(), rows);
  }
  return 0;
}

json residuals_json(const CalibrationResult& r, const std::vector<CalibrationTarget>& targets) {
  json arr = json::array();
  for (const TargetResidual& t : r.residuals) {
    const CalibrationTarget& tg = targets[t.target_index];
    arr.push_back({{"model", tg.model},
                   {"bits", std::to_string(tg.prefill_bits) + "/" + std::to_string(tg.decode_bits)},
                   {"isl", tg.isl},
                   {"osl", tg.osl},
                   {"metric", t.metric},
                   {"measured_ms", t.measured_ms},
                   {"predicted_ms", t.predicted_ms},
                   {"rel_error", t.rel_error}});
  }
  return arr;
}

int cmd_calibrate(const std::string& targets_path, const std::string& config_path, const std::string& model,
                  double tolerance, const Common& common) {
  std::vector<CalibrationTarget> targets = read_targets_csv_file(targets_path);
  if (!model.empty()) std::erase_if(targets, [&](const CalibrationTarget& t) { return t.model != model; });
  ExperimentConfig cfg;
  if (!config_path.empty()) {
    cfg = load_config(config_path, common);
  } else {
    cfg = parse_experiment(json::object({{"cluster", json::object()}}));
  }
  const ModelProfile& backbone = cfg.cluster.models.front();
  CalibrationResult result;
  try {
    result = calibrate(targets, backbone, cfg.cluster.gpu, tolerance);
  } catch (const CalibrationInfeasible& e) {
    report_error(e.kind(), e.what());
    std::cerr << json{{"best_params", to_json(e.best().params)}, {"residuals", residuals_json(e.best(), targets)}}.dump(2)
              << '\n';
    return 1;
  }
  Output out(common.out);
  if (common.format == "json") {
    out.stream() << json{{"cost", to_json(result.params)},
                         {"max_rel_error", result.max_rel_error},
                         {"residuals", residuals_json(result, targets)}}
                        .dump(2)
                 << '\n';
  } else {
    out.stream() << "model,bits,isl,osl,metric,measured_ms,predicted_ms,rel_error\n";
    for (const auto& r : residuals_json(result, targets)) {
      out.stream() << r["model"].get<std::string>() << ',' << r["bits"].get<std::string>() << ',' << r["isl"] << ','
                   << r["osl"] << ',' << r["metric"].get<std::string>() << ','
                   << format_number(r["measured_ms"].get<double>()) << ','
                   << format_number(r["predicted_ms"].get<double>()) << ','
                   << format_number(r["rel_error"].get<double>()) << '\n';
    }
    std::cerr << to_json(result.params).dump() << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"poolsim: disaggregated multi-model serving simulator (prefill per model, pooled decode)"};
  app.require_subcommand(1);

  Common common;
  std::uint64_t seed = 0;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--out", common.out, "Output file (default: stdout)");
    sub->add_option("--format", common.format, "Output format")->check(CLI::IsMember({"csv", "json"}));
    sub->add_option("--parallel", common.parallel, "Concurrent runs (sweep)")->check(CLI::PositiveNumber);
    sub->add_option_function<std::uint64_t>("--seed", [&](const std::uint64_t& s) { common.seed = s; },
                                            "Override workload.seed");
  };
  (void)seed;

  std::string config_path, trace_path, events_path, trace_out, spec_path, grid_path, targets_path, model;
  double tolerance = 0.03;

  auto* validate = app.add_subcommand("validate", "Check a config file");
  validate->add_option("--config,config", config_path, "Config JSON")->required();
  add_common(validate);

  auto* run = app.add_subcommand("run", "Run one config");
  run->add_option("--config,config", config_path, "Config JSON")->required();
  run->add_option("--events", events_path, "Write the event trace here");
  run->add_option("--trace-out", trace_out, "Write the generated arrival trace here");
  add_common(run);

  auto* replay = app.add_subcommand("replay", "Run a config on a recorded arrival trace");
  replay->add_option("--config", config_path, "Config JSON")->required();
  replay->add_option("--trace", trace_path, "Trace file (arrival_time_ns,model_id,isl,osl)")->required();
  replay->add_option("--events", events_path, "Write the event trace here");
  add_common(replay);

  auto* trace = app.add_subcommand("trace", "Generate the arrival trace of a config");
  trace->add_option("--config,config", config_path, "Config JSON")->required();
  add_common(trace);

  auto* sweep = app.add_subcommand("sweep", "Run a parameter sweep");
  sweep->add_option("--spec,spec", spec_path, "Sweep JSON")->required();
  sweep->add_option("--ratio-grid", grid_path, "Also write offered_rps,alpha,mode,ratio here");
  add_common(sweep);

  auto* calib = app.add_subcommand("calibrate", "Fit cost parameters to measured TTFT/TPOT");
  calib->add_option("--targets,targets", targets_path, "Targets CSV")->required();
  calib->add_option("--config", config_path, "Config supplying the backbone model and GPU");
  calib->add_option("--model", model, "Only use rows whose model column matches");
  calib->add_option("--tolerance", tolerance, "Max relative error per target")->check(CLI::PositiveNumber);
  add_common(calib);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*validate) return cmd_validate(config_path, common);
    if (*run) return cmd_run(config_path, events_path, trace_out, common);
    if (*replay) return cmd_replay(config_path, trace_path, events_path, common);
    if (*trace) return cmd_trace(config_path, common);
    if (*sweep) return cmd_sweep(spec_path, grid_path, common);
    if (*calib) {
      if (!app.get_subcommand("calibrate")->count("--format")) common.format = "json";
      return cmd_calibrate(targets_path, config_path, model, tolerance, common);
    }
  } catch (const InvalidConfig& e) {
    report_error(e.kind(), "invalid configuration", e.violations());
    std::cerr << kConfigSchemaHelp;
    return 1;
  } catch (const Error& e) {
    report_error(e.kind(), e.what());
    return 1;
  } catch (const std::exception& e) {
    report_error("InternalError", e.what());
    return 1;
  }
  return 0;
}
