// Command line front end: train backbones, stream the benchmark, compare
// reports, generate synthetic datasets, and run the property battery.

#include <CLI11.hpp>

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <string>
#include <vector>

#include "sttc/config.hpp"
#include "sttc/digest.hpp"
#include "sttc/harness.hpp"
#include "sttc/report.hpp"
#include "sttc/synth.hpp"
#include "sttc/verify.hpp"

namespace {

// Config and spec files are part of the invocation, so failing to parse one
// is a usage error, not a data error.
sttc::RunConfig load_config_as_usage(const std::string& path) {
  try {
    return sttc::load_run_config(path);
  } catch (const sttc::ParseError& e) {
    throw sttc::InvalidConfig(e.what());
  }
}

sttc::SynthSpec load_spec_as_usage(const std::string& path) {
  try {
    return sttc::load_synth_spec(path);
  } catch (const sttc::ParseError& e) {
    throw sttc::InvalidConfig(e.what());
  }
}

void apply_override(sttc::RunConfig& cfg, const std::string& key,
                    const std::string& value) {
  try {
    sttc::config_set(cfg, key, value, "--" + key);
  } catch (const sttc::ParseError& e) {
    throw sttc::InvalidConfig(e.what());
  }
}

struct RunFlags {
  std::string config_path;
  std::string ttc;
  std::string seeds;
  std::string seed;
  std::string queue_rule;
  std::string out;
};

/// File config first, then command line values on top.
sttc::RunConfig resolve_config(const RunFlags& f) {
  sttc::RunConfig cfg = load_config_as_usage(f.config_path);
  if (!f.ttc.empty()) apply_override(cfg, "ttc", f.ttc);
  if (!f.seeds.empty()) apply_override(cfg, "seeds", f.seeds);
  if (!f.seed.empty()) apply_override(cfg, "seed", f.seed);
  if (!f.queue_rule.empty()) apply_override(cfg, "queue_rule", f.queue_rule);
  if (!f.out.empty()) apply_override(cfg, "out", f.out);
  sttc::validate_config(cfg);
  return cfg;
}

int cmd_train(const RunFlags& flags, const std::string& backbone_out) {
  sttc::RunConfig cfg = resolve_config(flags);
  sttc::LoadedData data = sttc::harness_load(cfg);
  const std::uint64_t fit_seed =
      sttc::lane_seed(cfg.seed, sttc::SeedLane::ridge_fit, 0);
  sttc::FittedBackbone fb =
      sttc::harness_fit_backbone(cfg, data.series, data.split, fit_seed);
  const double mae = sttc::validation_mae(cfg, data.series, data.split, fb);
  std::cout << "backbone " << cfg.backbone << ", validation mae "
            << std::setprecision(10) << mae << "\n";
  const std::string dest =
      backbone_out.empty() ? cfg.backbone_file : backbone_out;
  if (!dest.empty()) {
    sttc::save_backbone(dest, fb);
    std::cout << "wrote " << dest << "\n";
  }
  return 0;
}

int cmd_run(const RunFlags& flags) {
  sttc::RunConfig cfg = resolve_config(flags);
  sttc::HarnessOutcome outcome = sttc::harness_run(cfg);
  sttc::Json report =
      sttc::make_run_report(cfg, outcome.runs, outcome.timestamp_utc,
                            outcome.total_seconds, outcome.budget_ms);
  const std::string text = report.dump(2) + "\n";
  if (cfg.out.empty()) {
    std::cout << text;
    return 0;
  }
  sttc::atomic_write_text(cfg.out, text);
  std::cout << "ttc " << (cfg.ttc ? "on" : "off") << ", "
            << outcome.runs.size() << " seed(s), mae "
            << report["aggregate"]["mae"]["mean"].dump() << ", rmse "
            << report["aggregate"]["rmse"]["mean"].dump() << "\n";
  std::cout << "wrote " << cfg.out << "\n";
  return 0;
}

int cmd_compare(const std::string& base_path, const std::string& cal_path,
                const std::string& out) {
  auto read_report = [](const std::string& path) {
    std::ifstream in(path);
    if (!in) throw sttc::FormatError("cannot open " + path);
    try {
      return sttc::Json::parse(in);
    } catch (const std::exception& e) {
      throw sttc::FormatError(path + ": " + e.what());
    }
  };
  const sttc::Json base = read_report(base_path);
  const sttc::Json cal = read_report(cal_path);
  const sttc::Json report =
      sttc::make_compare_report(base, cal, base_path, cal_path);
  std::cout << sttc::render_compare_table(report);
  if (!out.empty()) {
    sttc::atomic_write_text(out, report.dump(2) + "\n");
    std::cout << "wrote " << out << "\n";
  }
  return 0;
}

int cmd_verify(std::uint64_t seed, bool break_bound,
               const std::vector<double>& extra_etas) {
  sttc::VerifyOptions opt;
  opt.seed = seed;
  if (break_bound) opt.break_bound_scale = 2.0;
  opt.extra_etas = extra_etas;
  const std::vector<sttc::PropertyResult> results =
      sttc::run_property_battery(opt);
  for (const sttc::PropertyResult& r : results)
    std::cout << "[verify] " << r.name << ": "
              << (r.passed ? "PASS" : "FAIL") << "  " << r.detail << "\n";
  if (const sttc::PropertyResult* bad = sttc::first_failure(results)) {
    std::cerr << "sttc verify: property '" << bad->name << "' failed\n";
    return static_cast<int>(sttc::ErrorCode::property);
  }
  std::cout << "all " << results.size() << " properties hold\n";
  return 0;
}

int cmd_synth(const std::string& spec_path, const std::string& out_prefix,
              const std::string& seed_override) {
  sttc::SynthSpec spec = load_spec_as_usage(spec_path);
  if (!seed_override.empty()) {
    try {
      std::size_t used = 0;
      spec.seed = std::stoull(seed_override, &used);
      if (used != seed_override.size()) throw std::invalid_argument("");
    } catch (const std::exception&) {
      throw sttc::InvalidConfig("--seed: expected a non-negative integer, got '" +
                                seed_override + "'");
    }
  }
  const sttc::SeriesTensor series = sttc::synth_generate(spec);
  const std::string bin_path = out_prefix + ".sttc";
  const std::string csv_path = out_prefix + ".csv";
  const std::string meta_path = out_prefix + ".json";
  sttc::save_binary(bin_path, series);
  sttc::save_csv(csv_path, series);

  sttc::Json meta;
  meta["schema"] = "sttc-synth-v1";
  sttc::Json echo;
  echo["nodes"] = spec.nodes;
  echo["steps"] = spec.steps;
  sttc::Json tones = sttc::Json::array();
  for (const sttc::Tone& t : spec.tones)
    tones.push_back({{"freq", t.freq}, {"amp", t.amp}, {"phase", t.phase}});
  echo["tones"] = tones;
  echo["noise_std"] = spec.noise_std;
  echo["amp_drift"] = spec.amp_drift;
  echo["phase_drift"] = spec.phase_drift;
  echo["node_amp_jitter"] = spec.node_amp_jitter;
  echo["node_phase_shuffle"] = spec.node_phase_shuffle;
  echo["train_ratio"] = spec.split.train;
  echo["val_ratio"] = spec.split.val;
  echo["test_ratio"] = spec.split.test;
  echo["seed"] = spec.seed;
  echo["sampling_minutes"] = spec.sampling_minutes;
  meta["spec"] = echo;
  meta["files"] = {{"binary", {{"path", bin_path},
                               {"sha256", sttc::sha256_file(bin_path)}}},
                   {"csv", {{"path", csv_path},
                            {"sha256", sttc::sha256_file(csv_path)}}}};
  sttc::atomic_write_text(meta_path, meta.dump(2) + "\n");
  std::cout << "wrote " << bin_path << ", " << csv_path << ", " << meta_path
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"streaming test-time calibration toolkit"};
  app.require_subcommand(1);

  auto* train = app.add_subcommand(
      "train", "fit a backbone and report its validation error");
  RunFlags train_flags;
  std::string train_out;
  train->add_option("--config", train_flags.config_path, "run config file")
      ->required();
  train->add_option("--seed", train_flags.seed, "override the config seed");
  train->add_option("--out", train_out,
                    "write the fitted backbone here (defaults to the "
                    "backbone_file config key)");

  auto* run = app.add_subcommand(
      "run", "stream the test split and emit a JSON report");
  RunFlags run_flags;
  run->add_option("--config", run_flags.config_path, "run config file")
      ->required();
  run->add_option("--ttc", run_flags.ttc,
                  "override calibration: on or off");
  run->add_option("--seeds", run_flags.seeds,
                  "override the seed repetition count");
  run->add_option("--seed", run_flags.seed, "override the base seed");
  run->add_option("--queue-rule", run_flags.queue_rule,
                  "override the release rule: strict or listing");
  run->add_option("--out", run_flags.out,
                  "write the report here instead of stdout");

  auto* compare = app.add_subcommand(
      "compare", "diff a baseline report against a calibrated one");
  std::string base_path, cal_path, compare_out;
  compare->add_option("baseline", base_path, "report produced with ttc off")
      ->required();
  compare->add_option("calibrated", cal_path, "report produced with ttc on")
      ->required();
  compare->add_option("--out", compare_out,
                      "also write the comparison as JSON");

  auto* verify = app.add_subcommand(
      "verify", "run the numerical property battery");
  std::uint64_t verify_seed = 1;
  std::vector<double> verify_etas;
  bool break_bound = false;
  verify->add_option("--seed", verify_seed, "battery seed");
  verify->add_option("--eta", verify_etas,
                     "extra trial rates for the descent check");
  verify->add_flag("--break-bound", break_bound)->group("");

  auto* synth = app.add_subcommand(
      "synth", "generate a synthetic dataset from a spec file");
  std::string synth_spec, synth_out, synth_seed;
  synth->add_option("--config", synth_spec, "synthetic series spec file")
      ->required();
  synth->add_option("--out", synth_out,
                    "output prefix; writes <out>.sttc, <out>.csv, <out>.json")
      ->required();
  synth->add_option("--seed", synth_seed, "override the spec seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(sttc::ErrorCode::config);
  }

  try {
    if (*train) return cmd_train(train_flags, train_out);
    if (*run) return cmd_run(run_flags);
    if (*compare) return cmd_compare(base_path, cal_path, compare_out);
    if (*verify) return cmd_verify(verify_seed, break_bound, verify_etas);
    if (*synth) return cmd_synth(synth_spec, synth_out, synth_seed);
  } catch (const sttc::Error& e) {
    std::cerr << "sttc: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "sttc: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
