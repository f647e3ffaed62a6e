// Copyright (C) 2026 The poolsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "poolsim/calibration.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>

namespace poolsim {

CalibrationInfeasible::CalibrationInfeasible(const std::string& reason, CalibrationResult best)
    : Error("CalibrationInfeasible", reason), best_(std::move(best)) {}

namespace {

ModelProfile with_bits(const ModelProfile& backbone, const CalibrationTarget& t) {
  ModelProfile m = backbone;
  m.prefill_weight_bits = t.prefill_bits;
  m.decode_weight_bits = t.decode_bits;
  return m;
}

struct Row {
  std::vector<double> x;
  double y = 0;
  double weight = 1;
};

// Weighted least squares with the identification rules documented on
// calibrate(). Column 0 is the fixed-overhead column.
std::vector<double> fit_affine(const std::vector<Row>& rows, std::size_t n_cols) {
  std::vector<bool> active(n_cols, false);
  for (const Row& r : rows) {
    for (std::size_t c = 0; c < n_cols; ++c) active[c] = active[c] || r.x[c] != 0.0;
  }

  auto solve = [&](const std::vector<bool>& use, Eigen::Index* rank) {
    std::vector<std::size_t> cols;
    for (std::size_t c = 0; c < n_cols; ++c)
      if (use[c]) cols.push_back(c);
    const auto n = static_cast<Eigen::Index>(rows.size());
    const auto m = static_cast<Eigen::Index>(cols.size());
    Eigen::MatrixXd a(n, m);
    Eigen::VectorXd b(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Row& r = rows[static_cast<std::size_t>(i)];
      for (Eigen::Index j = 0; j < m; ++j) a(i, j) = r.weight * r.x[cols[static_cast<std::size_t>(j)]];
      b(i) = r.weight * r.y;
    }
    Eigen::VectorXd scale = a.colwise().norm().transpose();
    for (Eigen::Index j = 0; j < m; ++j) {
      if (scale(j) == 0) scale(j) = 1;
      a.col(j) /= scale(j);
    }
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(a);
    *rank = cod.rank();
    Eigen::VectorXd sol = cod.solve(b);
    std::vector<double> coef(n_cols, 0.0);
    for (Eigen::Index j = 0; j < m; ++j) coef[cols[static_cast<std::size_t>(j)]] = sol(j) / scale(j);
    return coef;
  };

  const auto n_active = static_cast<Eigen::Index>(std::count(active.begin(), active.end(), true));
  Eigen::Index rank = 0;
  std::vector<double> coef = solve(active, &rank);
  if (active[0] && (rank < n_active || coef[0] < 0)) {
    active[0] = false;
    coef = solve(active, &rank);
  }
  return coef;
}

double mean_decode_kv_tokens(const CalibrationTarget& t) {
  // Steps k = 1..osl-1 read isl + k - 1 resident tokens.
  return static_cast<double>(t.isl) + static_cast<double>(t.osl - 2) / 2.0;
}

}  // namespace

Seconds predicted_ttft(const CalibrationTarget& target, const ModelProfile& backbone, const CostParams& params,
                       const GpuSpec& gpu) {
  const ModelProfile m = with_bits(backbone, target);
  const KvHandle kv{0, target.isl, m.kv_bytes_per_token, kInTransit};
  return prefill_time(m, target.isl, params, gpu) + transfer_time(kv, gpu);
}

Seconds predicted_tpot(const CalibrationTarget& target, const ModelProfile& backbone, const CostParams& params,
                       const GpuSpec& gpu) {
  const ModelProfile m = with_bits(backbone, target);
  const Tokens steps = target.osl - 1;
  if (steps < 1) return kUnset;
  Seconds total = 0;
  for (Tokens k = 1; k <= steps; ++k) {
    const Tokens resident = target.isl + k - 1;
    total += decode_step_time_from_bytes(m.decode_weight_bytes(), resident * m.kv_bytes_per_token, params, gpu);
  }
  return total / static_cast<double>(steps);
}

CalibrationResult calibrate(std::span<const CalibrationTarget> targets, const ModelProfile& backbone,
                            const GpuSpec& gpu, double tolerance) {
  std::vector<std::size_t> used;
  for (std::size_t i = 0; i < targets.size(); ++i)
    if (targets[i].concurrency == 1) used.push_back(i);

  std::vector<Row> prefill_rows;
  std::vector<Row> decode_rows;
  for (std::size_t i : used) {
    const CalibrationTarget& t = targets[i];
    const ModelProfile m = with_bits(backbone, t);
    if (t.ttft_ms) {
      const double ttft = *t.ttft_ms / 1e3;
      const KvHandle kv{0, t.isl, m.kv_bytes_per_token, kInTransit};
      const double isl = static_cast<double>(t.isl);
      const bool full = t.prefill_bits >= 16;
      prefill_rows.push_back({{1.0, full ? isl : 0.0, full ? 0.0 : isl}, ttft - transfer_time(kv, gpu), 1.0 / ttft});
    }
    if (t.tpot_ms && t.osl >= 2) {
      const double tpot = *t.tpot_ms / 1e3;
      const double traffic = static_cast<double>(m.decode_weight_bytes()) +
                             static_cast<double>(m.kv_bytes_per_token) * mean_decode_kv_tokens(t);
      decode_rows.push_back({{1.0, traffic}, tpot, 1.0 / tpot});
    }
  }
  if (prefill_rows.empty() || decode_rows.empty()) {
    throw CalibrationInfeasible("calibration needs at least one concurrency-1 TTFT and one TPOT target", {});
  }

  const std::vector<double> pc = fit_affine(prefill_rows, 3);
  const std::vector<double> dc = fit_affine(decode_rows, 2);

  CalibrationResult result;
  CostParams& p = result.params;
  p.prefill_flops_per_token = 2.0 * static_cast<double>(backbone.param_count);
  p.prefill_fixed_overhead = pc[0];
  double slope_full = pc[1];
  const double slope_quant = pc[2];
  if (slope_full == 0.0) slope_full = slope_quant;  // only quantized-prefill rows: no penalty identifiable
  p.mfu = slope_full > 0 ? p.prefill_flops_per_token / (slope_full * gpu.flops) : 0.0;
  p.dequant_compute_penalty = (slope_quant != 0.0 && slope_full > 0) ? slope_quant / slope_full : 1.0;
  if (std::abs(p.dequant_compute_penalty - 1.0) < 1e-9) p.dequant_compute_penalty = 1.0;
  p.decode_fixed_overhead = dc[0];
  p.mbu = dc[1] > 0 ? 1.0 / (dc[1] * gpu.hbm_bandwidth) : 0.0;

  for (std::size_t i : used) {
    const CalibrationTarget& t = targets[i];
    auto add = [&](const char* metric, double measured_ms, double predicted_s) {
      const double predicted_ms = predicted_s * 1e3;
      const double rel = std::abs(predicted_ms - measured_ms) / measured_ms;
      result.residuals.push_back({i, metric, measured_ms, predicted_ms, rel});
      result.max_rel_error = std::max(result.max_rel_error, rel);
    };
    if (t.ttft_ms) add("ttft", *t.ttft_ms, predicted_ttft(t, backbone, p, gpu));
    if (t.tpot_ms && t.osl >= 2) add("tpot", *t.tpot_ms, predicted_tpot(t, backbone, p, gpu));
  }

  if (auto bad = check_cost_params(p); !bad.empty()) {
    throw CalibrationInfeasible("fitted parameters out of range: " + bad.front().path + " " + bad.front().message,
                                result);
  }
  if (result.max_rel_error > tolerance) {
    std::ostringstream msg;
    msg << "best fit misses a target by " << result.max_rel_error * 100 << "% (tolerance " << tolerance * 100
        << "%)";
    throw CalibrationInfeasible(msg.str(), result);
  }
  return result;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    cell.erase(0, cell.find_first_not_of(" \t\r"));
    cell.erase(cell.find_last_not_of(" \t\r") + 1);
    cells.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

}  // namespace

std::vector<CalibrationTarget> read_targets_csv(std::istream& in) {
  static const char* kColumns[] = {"model", "prefill_bits", "decode_bits", "isl", "osl", "concurrency", "ttft_ms",
                                   "tpot_ms"};
  std::string line;
  std::map<std::string, std::size_t> col;
  std::vector<Violation> errors;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') continue;
    auto header = split_csv_line(line);
    for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
    break;
  }
  for (const char* name : kColumns) {
    if (!col.contains(name)) errors.push_back({std::string("targets.") + name, "missing column"});
  }
  if (!errors.empty()) throw InvalidConfig(std::move(errors));

  std::vector<CalibrationTarget> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') continue;
    auto cells = split_csv_line(line);
    const std::string where = "targets:" + std::to_string(line_no);
    auto get = [&](const char* name) -> std::string {
      const std::size_t i = col[name];
      return i < cells.size() ? cells[i] : std::string();
    };
    try {
      CalibrationTarget t;
      t.model = get("model");
      t.prefill_bits = std::stoi(get("prefill_bits"));
      t.decode_bits = std::stoi(get("decode_bits"));
      t.isl = std::stoll(get("isl"));
      t.osl = std::stoll(get("osl"));
      t.concurrency = std::stoi(get("concurrency"));
      if (auto v = get("ttft_ms"); !v.empty()) t.ttft_ms = std::stod(v);
      if (auto v = get("tpot_ms"); !v.empty()) t.tpot_ms = std::stod(v);
      if (t.isl < 1) errors.push_back({where + ".isl", "must be >= 1"});
      if (t.tpot_ms && t.osl < 2) errors.push_back({where + ".osl", "a TPOT target needs osl >= 2"});
      if ((t.ttft_ms && !(*t.ttft_ms > 0)) || (t.tpot_ms && !(*t.tpot_ms > 0)))
        errors.push_back({where, "measured latencies must be > 0"});
      out.push_back(std::move(t));
    } catch (const std::exception&) {
      errors.push_back({where, "malformed row '" + line + "'"});
    }
  }
  if (!errors.empty()) throw InvalidConfig(std::move(errors));
  return out;
}

std::vector<CalibrationTarget> read_targets_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidConfig(path, "cannot open targets file");
  return read_targets_csv(in);
}

}  // namespace poolsim
