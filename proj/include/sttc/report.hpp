#pragma once

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "sttc/config.hpp"
#include "sttc/errors.hpp"
#include "sttc/metrics.hpp"

namespace sttc {

using Json = nlohmann::ordered_json;

/// Everything one repetition of the test stream produced.
struct SeedRunResult {
  std::uint64_t sub_seed = 0;
  MetricsReport metrics;
  std::size_t updates_applied = 0;
  std::size_t updates_skipped_masked = 0;
  std::size_t clip_events = 0;
  std::vector<double> calibrate_seconds;  // one entry per stream step
  std::vector<double> update_seconds;
};

namespace detail {

inline double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  CompensatedSum s;
  for (double x : v) s.add(x);
  return s.value() / static_cast<double>(v.size());
}

inline double p99_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t rank = static_cast<std::size_t>(
      std::ceil(0.99 * static_cast<double>(v.size())));
  return v[std::max<std::size_t>(rank, 1) - 1];
}

/// NaN-aware mean and population std over per-seed values; NaN (e.g. MAPE
/// with every entry excluded) poisons the aggregate and serializes as null.
inline Json mean_std(const std::vector<double>& v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  var /= static_cast<double>(v.size());
  return Json{{"mean", mean}, {"std", std::sqrt(var)}};
}

inline Json config_echo(const RunConfig& cfg) {
  Json j = Json::object();
  std::istringstream lines(canonical_config(cfg, false));
  std::string line;
  while (std::getline(lines, line)) {
    const std::size_t eq = line.find(" = ");
    j[line.substr(0, eq)] = line.substr(eq + 3);
  }
  return j;
}

}  // namespace detail

inline Json metrics_json(const MetricsReport& m) {
  return Json{{"mae", m.mae},
              {"rmse", m.rmse},
              {"mape_percent", m.mape},
              {"mae_h", m.mae_h},
              {"rmse_h", m.rmse_h},
              {"mape_h", m.mape_h},
              {"blocks", m.blocks},
              {"entries", m.entries},
              {"masked", m.masked}};
}

/// Assembles the run report. Every wall-clock quantity lives under
/// "runtime"; the rest of the document is a pure function of config + seed,
/// which is what the determinism contract and the fingerprint protect.
/// `budget_ms` is the per-step latency allowance (the sliding-window stride
/// unless the config overrides it).
inline Json make_run_report(const RunConfig& cfg,
                            const std::vector<SeedRunResult>& runs,
                            const std::string& timestamp_utc,
                            double total_seconds, double budget_ms) {
  Json report;
  report["schema"] = "sttc-run-v1";
  report["fingerprint"] = config_fingerprint(cfg);
  report["ttc"] = cfg.ttc ? "on" : "off";
  report["config"] = detail::config_echo(cfg);

  Json seeds = Json::array();
  std::vector<double> maes, rmses, mapes;
  for (const SeedRunResult& r : runs) {
    seeds.push_back(Json{{"seed", r.sub_seed},
                         {"metrics", metrics_json(r.metrics)},
                         {"updates_applied", r.updates_applied},
                         {"updates_skipped_masked", r.updates_skipped_masked},
                         {"clip_events", r.clip_events}});
    maes.push_back(r.metrics.mae);
    rmses.push_back(r.metrics.rmse);
    mapes.push_back(r.metrics.mape);
  }
  report["seeds"] = std::move(seeds);
  report["aggregate"] = Json{{"mae", detail::mean_std(maes)},
                             {"rmse", detail::mean_std(rmses)},
                             {"mape_percent", detail::mean_std(mapes)}};

  std::vector<double> cal_ms, upd_ms, step_ms;
  for (const SeedRunResult& r : runs)
    for (std::size_t i = 0; i < r.calibrate_seconds.size(); ++i) {
      cal_ms.push_back(r.calibrate_seconds[i] * 1e3);
      upd_ms.push_back(r.update_seconds[i] * 1e3);
      step_ms.push_back((r.calibrate_seconds[i] + r.update_seconds[i]) * 1e3);
    }
  std::size_t exceeded = 0;
  for (double ms : step_ms)
    if (ms > budget_ms) ++exceeded;

  Json runtime;
  runtime["timestamp_utc"] = timestamp_utc;
  runtime["total_seconds"] = total_seconds;
  runtime["calibrate_ms"] = Json{{"mean", detail::mean_of(cal_ms)},
                                 {"p99", detail::p99_of(cal_ms)}};
  runtime["update_ms"] = Json{{"mean", detail::mean_of(upd_ms)},
                              {"p99", detail::p99_of(upd_ms)}};
  runtime["step_ms"] = Json{{"mean", detail::mean_of(step_ms)},
                            {"p99", detail::p99_of(step_ms)}};
  runtime["latency_budget_ms"] = budget_ms;
  runtime["budget_exceeded_steps"] = exceeded;
  report["runtime"] = std::move(runtime);
  return report;
}

/// Per-metric relative improvement in percent, positive = calibration
/// helped. Null when the baseline value is zero or either side is missing.
inline Json delta_percent(const Json& base, const Json& cal,
                          const char* key) {
  if (!base.contains(key) || !cal.contains(key)) return nullptr;
  if (base[key].is_null() || cal[key].is_null()) return nullptr;
  const double b = base[key].get<double>();
  const double c = cal[key].get<double>();
  if (!(std::abs(b) > 0.0)) return nullptr;
  return (b - c) / b * 100.0;
}

inline Json make_compare_report(const Json& base, const Json& cal,
                                const std::string& base_path,
                                const std::string& cal_path) {
  for (const Json* r : {&base, &cal}) {
    if (!r->contains("schema") || (*r)["schema"] != "sttc-run-v1")
      throw InvalidConfig("compare: input is not a run report");
  }
  if (base["fingerprint"] != cal["fingerprint"])
    throw InvalidConfig(
        "compare: reports were produced from different configs (fingerprint "
        "mismatch)");
  if (base["ttc"] != "off")
    throw InvalidConfig("compare: first report must be a --ttc off run");
  if (cal["ttc"] != "on")
    throw InvalidConfig("compare: second report must be a --ttc on run");

  auto agg_means = [](const Json& r) {
    Json out;
    for (const char* k : {"mae", "rmse", "mape_percent"})
      out[k] = r["aggregate"][k]["mean"];
    return out;
  };
  const Json base_means = agg_means(base);
  const Json cal_means = agg_means(cal);

  Json report;
  report["schema"] = "sttc-compare-v1";
  report["fingerprint"] = base["fingerprint"];
  report["config"] = base["config"];
  report["baseline"] = Json{{"path", base_path},
                            {"ttc", "off"},
                            {"metrics", base_means},
                            {"runtime", base["runtime"]}};
  report["calibrated"] = Json{{"path", cal_path},
                              {"ttc", "on"},
                              {"metrics", cal_means},
                              {"runtime", cal["runtime"]}};
  Json deltas, improved;
  for (const char* k : {"mae", "rmse", "mape_percent"}) {
    deltas[k] = delta_percent(base_means, cal_means, k);
    improved[k] =
        deltas[k].is_null() ? Json(nullptr) : Json(deltas[k].get<double>() > 0);
  }
  report["delta_percent"] = std::move(deltas);
  report["improved"] = std::move(improved);
  return report;
}

/// Plain-text view of a comparison; regressions are flagged inline.
inline std::string render_compare_table(const Json& report) {
  std::ostringstream out;
  out << std::left << std::setw(14) << "metric" << std::right << std::setw(14)
      << "baseline" << std::setw(14) << "calibrated" << std::setw(12)
      << "delta%" << "\n";
  for (const char* k : {"mae", "rmse", "mape_percent"}) {
    const Json& b = report["baseline"]["metrics"][k];
    const Json& c = report["calibrated"]["metrics"][k];
    const Json& d = report["delta_percent"][k];
    out << std::left << std::setw(14) << k << std::right;
    auto cell = [&](const Json& v) {
      std::ostringstream s;
      if (v.is_null())
        s << "n/a";
      else
        s << std::fixed << std::setprecision(4) << v.get<double>();
      out << std::setw(14) << s.str();
    };
    cell(b);
    cell(c);
    std::ostringstream ds;
    if (d.is_null())
      ds << "n/a";
    else
      ds << std::showpos << std::fixed << std::setprecision(2)
         << d.get<double>();
    out << std::setw(12) << ds.str();
    if (!d.is_null() && d.get<double>() < 0.0) out << "  (regression)";
    out << "\n";
  }
  return out.str();
}

}  // namespace sttc
