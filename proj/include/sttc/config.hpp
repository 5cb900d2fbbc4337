#pragma once

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>

#include "sttc/calibrator.hpp"
#include "sttc/digest.hpp"
#include "sttc/errors.hpp"
#include "sttc/series.hpp"
#include "sttc/stream.hpp"

namespace sttc {

/// Everything a train/run invocation needs, resolved from a flat
/// `key = value` file plus flag overrides (flags win). The canonical
/// serialization below defines config identity: its SHA-256, minus the `ttc`
/// and `out` keys, is the fingerprint that pairs baseline and calibrated
/// reports at compare time.
struct RunConfig {
  std::string dataset;
  std::string format = "auto";  // auto | csv | binary
  std::size_t lookback = 12;
  std::size_t horizon = 12;
  SplitSpec split;

  std::string backbone = "seasonal_naive";  // | historical_average | ridge
  std::size_t period = 0;  // 0 = one day of samples at the data's interval
  double ridge_alpha = 1e-3;
  std::size_t ridge_max_rows = 0;  // 0 = use every pooled row
  std::string scaler = "global";   // | per_node

  std::size_t groups = 4;
  double lr = 1e-4;
  std::string optimizer = "adam";  // | sgd
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::string loss = "mae";        // | mse
  std::string queue_rule = "strict";  // | listing
  std::size_t update_samples = 1;
  std::size_t update_steps = 1;
  std::optional<double> clip_eps;
  bool ttc = true;

  std::uint64_t seed = 1;
  std::size_t seeds = 1;
  double mape_eps = 1e-6;
  std::optional<double> latency_budget_ms;

  std::string backbone_file;
  std::string out;

  std::size_t resolved_period(std::chrono::minutes sampling) const {
    if (period > 0) return period;
    const long minutes = std::max<long>(1, sampling.count());
    return static_cast<std::size_t>(std::max<long>(1, (24 * 60) / minutes));
  }
};

namespace detail {

inline std::string canon_num(double v) { return nlohmann::json(v).dump(); }

inline double config_double(const std::string& v, const std::string& where) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ParseError(where + ": bad number '" + v + "'");
  }
}

inline std::size_t config_size(const std::string& v, const std::string& where) {
  const double d = config_double(v, where);
  if (d < 0 || d != std::floor(d))
    throw ParseError(where + ": expected a non-negative integer, got '" + v +
                     "'");
  return static_cast<std::size_t>(d);
}

inline bool config_on_off(const std::string& v, const std::string& where) {
  if (v == "on" || v == "true" || v == "1") return true;
  if (v == "off" || v == "false" || v == "0") return false;
  throw ParseError(where + ": expected on or off, got '" + v + "'");
}

}  // namespace detail

/// Applies one key/value pair; shared by the file parser and CLI overrides.
inline void config_set(RunConfig& cfg, const std::string& key,
                       const std::string& value, const std::string& where) {
  using detail::config_double;
  using detail::config_on_off;
  using detail::config_size;
  if (key == "dataset") cfg.dataset = value;
  else if (key == "format") cfg.format = value;
  else if (key == "lookback") cfg.lookback = config_size(value, where);
  else if (key == "horizon") cfg.horizon = config_size(value, where);
  else if (key == "train_ratio") cfg.split.train = config_double(value, where);
  else if (key == "val_ratio") cfg.split.val = config_double(value, where);
  else if (key == "test_ratio") cfg.split.test = config_double(value, where);
  else if (key == "backbone") cfg.backbone = value;
  else if (key == "period") cfg.period = config_size(value, where);
  else if (key == "ridge_alpha") cfg.ridge_alpha = config_double(value, where);
  else if (key == "ridge_max_rows")
    cfg.ridge_max_rows = config_size(value, where);
  else if (key == "scaler") cfg.scaler = value;
  else if (key == "groups") cfg.groups = config_size(value, where);
  else if (key == "lr") cfg.lr = config_double(value, where);
  else if (key == "optimizer") cfg.optimizer = value;
  else if (key == "beta1") cfg.beta1 = config_double(value, where);
  else if (key == "beta2") cfg.beta2 = config_double(value, where);
  else if (key == "adam_eps") cfg.adam_eps = config_double(value, where);
  else if (key == "loss") cfg.loss = value;
  else if (key == "queue_rule") cfg.queue_rule = value;
  else if (key == "update_samples")
    cfg.update_samples = config_size(value, where);
  else if (key == "update_steps") cfg.update_steps = config_size(value, where);
  else if (key == "clip_eps") cfg.clip_eps = config_double(value, where);
  else if (key == "ttc") cfg.ttc = config_on_off(value, where);
  else if (key == "seed")
    cfg.seed = static_cast<std::uint64_t>(config_size(value, where));
  else if (key == "seeds") cfg.seeds = config_size(value, where);
  else if (key == "mape_eps") cfg.mape_eps = config_double(value, where);
  else if (key == "latency_budget_ms")
    cfg.latency_budget_ms = config_double(value, where);
  else if (key == "backbone_file") cfg.backbone_file = value;
  else if (key == "out") cfg.out = value;
  else throw ParseError(where + ": unknown key '" + key + "'");
}

inline RunConfig parse_run_config(std::istream& in,
                                  const std::string& source) {
  RunConfig cfg;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const std::string where = source + ":" + std::to_string(line_no);
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      throw ParseError(where + ": expected key = value");
    }
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ParseError(where + ": empty key or value");
    config_set(cfg, key, value, where);
  }
  return cfg;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  return parse_run_config(in, path);
}

/// Rejects every out-of-domain setting up front so commands fail with a
/// config error before touching data.
inline void validate_config(const RunConfig& cfg) {
  auto fail = [](const std::string& msg) { throw InvalidConfig(msg); };
  if (cfg.format != "auto" && cfg.format != "csv" && cfg.format != "binary")
    fail("format must be auto, csv or binary");
  if (cfg.lookback == 0) fail("lookback must be positive");
  if (cfg.horizon < 2) fail("horizon must be >= 2");
  if (!(cfg.split.train > 0.0) || !(cfg.split.val > 0.0) ||
      !(cfg.split.test > 0.0))
    fail("split ratios must be positive");
  if (std::abs(cfg.split.train + cfg.split.val + cfg.split.test - 1.0) > 1e-9)
    fail("split ratios must sum to 1");
  if (cfg.backbone != "seasonal_naive" &&
      cfg.backbone != "historical_average" && cfg.backbone != "ridge")
    fail("backbone must be seasonal_naive, historical_average or ridge");
  if (cfg.ridge_alpha < 0.0) fail("ridge_alpha must be >= 0");
  if (cfg.scaler != "global" && cfg.scaler != "per_node")
    fail("scaler must be global or per_node");
  if (cfg.groups == 0) fail("groups must be positive");
  if (!(cfg.lr > 0.0)) fail("lr must be positive");
  parse_optimizer(cfg.optimizer);
  if (!(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0) ||
      !(cfg.beta2 >= 0.0 && cfg.beta2 < 1.0))
    fail("adam betas must lie in [0, 1)");
  if (!(cfg.adam_eps > 0.0)) fail("adam_eps must be positive");
  parse_loss(cfg.loss);
  parse_queue_rule(cfg.queue_rule);
  if (cfg.update_samples == 0 || cfg.update_steps == 0)
    fail("update_samples and update_steps must be positive");
  if (cfg.clip_eps && !(*cfg.clip_eps > 0.0))
    fail("clip_eps must be positive when set");
  if (cfg.seeds == 0) fail("seeds must be positive");
  if (cfg.mape_eps < 0.0) fail("mape_eps must be >= 0");
  if (cfg.latency_budget_ms && !(*cfg.latency_budget_ms > 0.0))
    fail("latency_budget_ms must be positive when set");
}

/// Canonical text form: fixed key order, shortest round-trip numbers, unset
/// optionals omitted. `for_fingerprint` drops the two keys that may differ
/// between a baseline run and its calibrated partner.
inline std::string canonical_config(const RunConfig& cfg,
                                    bool for_fingerprint) {
  using detail::canon_num;
  std::ostringstream out;
  auto put = [&](const char* key, const std::string& value) {
    out << key << " = " << value << "\n";
  };
  if (!cfg.dataset.empty()) put("dataset", cfg.dataset);
  put("format", cfg.format);
  put("lookback", std::to_string(cfg.lookback));
  put("horizon", std::to_string(cfg.horizon));
  put("train_ratio", canon_num(cfg.split.train));
  put("val_ratio", canon_num(cfg.split.val));
  put("test_ratio", canon_num(cfg.split.test));
  put("backbone", cfg.backbone);
  put("period", std::to_string(cfg.period));
  put("ridge_alpha", canon_num(cfg.ridge_alpha));
  put("ridge_max_rows", std::to_string(cfg.ridge_max_rows));
  put("scaler", cfg.scaler);
  put("groups", std::to_string(cfg.groups));
  put("lr", canon_num(cfg.lr));
  put("optimizer", cfg.optimizer);
  put("beta1", canon_num(cfg.beta1));
  put("beta2", canon_num(cfg.beta2));
  put("adam_eps", canon_num(cfg.adam_eps));
  put("loss", cfg.loss);
  put("queue_rule", cfg.queue_rule);
  put("update_samples", std::to_string(cfg.update_samples));
  put("update_steps", std::to_string(cfg.update_steps));
  if (cfg.clip_eps) put("clip_eps", canon_num(*cfg.clip_eps));
  if (!for_fingerprint) put("ttc", cfg.ttc ? "on" : "off");
  put("seed", std::to_string(cfg.seed));
  put("seeds", std::to_string(cfg.seeds));
  put("mape_eps", canon_num(cfg.mape_eps));
  if (cfg.latency_budget_ms)
    put("latency_budget_ms", canon_num(*cfg.latency_budget_ms));
  if (!cfg.backbone_file.empty()) put("backbone_file", cfg.backbone_file);
  if (!for_fingerprint && !cfg.out.empty()) put("out", cfg.out);
  return out.str();
}

inline std::string config_fingerprint(const RunConfig& cfg) {
  return sha256_hex(canonical_config(cfg, true));
}

}  // namespace sttc
