// End-to-end checks of the installed command line: pipelines, exit codes,
// and report determinism, all through real subprocesses.

#include <gtest/gtest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "sttc/digest.hpp"
#include "sttc/harness.hpp"

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

struct CliResult {
  int code = -1;
  std::string out;  // stdout and stderr merged
};

CliResult run_cli(const std::string& args, const fs::path& cwd) {
  const std::string cmd =
      "cd " + cwd.string() + " && " + STTC_CLI_PATH + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) throw std::runtime_error("popen failed");
  CliResult r;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
  ASSERT_TRUE(out.good());
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

// Small drifting dataset so streamed updates have something to chase.
const char* kSpec =
    "nodes = 3\n"
    "steps = 600\n"
    "tone = 0.25 1.0 0.4\n"
    "tone = 0.125 0.5\n"
    "noise_std = 0.02\n"
    "amp_drift = 1.0\n"
    "seed = 3\n";

std::string run_cfg(const std::string& dataset) {
  return "dataset = " + dataset +
         "\n"
         "lookback = 8\n"
         "horizon = 4\n"
         "backbone = seasonal_naive\n"
         "period = 4\n"
         "scaler = per_node\n"
         "groups = 2\n"
         "optimizer = adam\n"
         "lr = 3e-4\n"
         "loss = mae\n"
         "queue_rule = strict\n"
         "seeds = 2\n"
         "seed = 1\n";
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("sttc_cli_" + std::to_string(::getpid()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
  }
  void TearDown() override {
    std::error_code ec;
    fs::remove_all(dir_, ec);
  }

  CliResult cli(const std::string& args) { return run_cli(args, dir_); }

  void make_dataset() {
    write_file(dir_ / "gen.spec", kSpec);
    CliResult r = cli("synth --config gen.spec --out data");
    ASSERT_EQ(r.code, 0) << r.out;
    write_file(dir_ / "run.cfg", run_cfg("data.sttc"));
  }

  fs::path dir_;
};

TEST_F(CliTest, SynthIsDeterministicPerSeed) {
  write_file(dir_ / "gen.spec", kSpec);
  ASSERT_EQ(cli("synth --config gen.spec --out a").code, 0);
  ASSERT_EQ(cli("synth --config gen.spec --out b").code, 0);
  EXPECT_EQ(read_file(dir_ / "a.sttc"), read_file(dir_ / "b.sttc"));
  EXPECT_EQ(read_file(dir_ / "a.csv"), read_file(dir_ / "b.csv"));

  ASSERT_EQ(cli("synth --config gen.spec --out c --seed 9").code, 0);
  EXPECT_NE(read_file(dir_ / "a.sttc"), read_file(dir_ / "c.sttc"));
}

TEST_F(CliTest, SynthProvenanceDigestsMatchTheFiles) {
  write_file(dir_ / "gen.spec", kSpec);
  ASSERT_EQ(cli("synth --config gen.spec --out data").code, 0);
  Json meta = Json::parse(read_file(dir_ / "data.json"));
  EXPECT_EQ(meta["schema"], "sttc-synth-v1");
  EXPECT_EQ(meta["spec"]["nodes"], 3u);
  EXPECT_EQ(meta["spec"]["tones"].size(), 2u);
  EXPECT_EQ(meta["files"]["binary"]["sha256"],
            sttc::sha256_file((dir_ / "data.sttc").string()));
  EXPECT_EQ(meta["files"]["csv"]["sha256"],
            sttc::sha256_file((dir_ / "data.csv").string()));
}

TEST_F(CliTest, TrainRunComparePipeline) {
  make_dataset();

  CliResult train = cli("train --config run.cfg --out fitted.sttcb");
  ASSERT_EQ(train.code, 0) << train.out;
  EXPECT_NE(train.out.find("validation mae"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir_ / "fitted.sttcb"));

  ASSERT_EQ(cli("run --config run.cfg --ttc off --out base.json").code, 0);
  ASSERT_EQ(cli("run --config run.cfg --ttc on --out cal.json").code, 0);

  Json base = Json::parse(read_file(dir_ / "base.json"));
  Json cal = Json::parse(read_file(dir_ / "cal.json"));
  EXPECT_EQ(base["schema"], "sttc-run-v1");
  EXPECT_EQ(base["ttc"], "off");
  EXPECT_EQ(cal["ttc"], "on");
  EXPECT_EQ(base["fingerprint"], cal["fingerprint"]);
  EXPECT_EQ(base["seeds"].size(), 2u);

  CliResult cmp = cli("compare base.json cal.json --out cmp.json");
  ASSERT_EQ(cmp.code, 0) << cmp.out;
  EXPECT_NE(cmp.out.find("mae"), std::string::npos);
  EXPECT_NE(cmp.out.find("delta%"), std::string::npos);
  Json cmp_json = Json::parse(read_file(dir_ / "cmp.json"));
  EXPECT_EQ(cmp_json["schema"], "sttc-compare-v1");
  EXPECT_EQ(cmp_json["fingerprint"], base["fingerprint"]);
}

TEST_F(CliTest, ReportsAreByteStableOutsideTheRuntimeSection) {
  make_dataset();
  CliResult r1 = cli("run --config run.cfg --ttc on");
  CliResult r2 = cli("run --config run.cfg --ttc on");
  ASSERT_EQ(r1.code, 0);
  ASSERT_EQ(r2.code, 0);
  Json a = Json::parse(r1.out);
  Json b = Json::parse(r2.out);
  ASSERT_TRUE(a.contains("runtime"));
  a.erase("runtime");
  b.erase("runtime");
  EXPECT_EQ(a.dump(), b.dump());
}

TEST_F(CliTest, SeedsFlagControlsRepetitionsAndSubSeeds) {
  make_dataset();
  CliResult r = cli("run --config run.cfg --seeds 3");
  ASSERT_EQ(r.code, 0);
  Json rep = Json::parse(r.out);
  ASSERT_EQ(rep["seeds"].size(), 3u);
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_EQ(rep["seeds"][k]["seed"].get<std::uint64_t>(),
              sttc::lane_seed(1, sttc::SeedLane::run_rep, k));
  }
  EXPECT_EQ(rep["config"]["seeds"], "3");
}

TEST_F(CliTest, CsvDatasetGivesTheSameMetricsAsBinary) {
  make_dataset();
  write_file(dir_ / "run_csv.cfg", run_cfg("data.csv"));
  CliResult bin = cli("run --config run.cfg --ttc on");
  CliResult csv = cli("run --config run_csv.cfg --ttc on");
  ASSERT_EQ(bin.code, 0);
  ASSERT_EQ(csv.code, 0);
  Json a = Json::parse(bin.out);
  Json b = Json::parse(csv.out);
  // the binary container quantizes to float32, the csv keeps full doubles,
  // so the two paths agree only to float32 precision
  for (const char* k : {"mae", "rmse", "mape_percent"}) {
    const double av = a["aggregate"][k]["mean"].get<double>();
    const double bv = b["aggregate"][k]["mean"].get<double>();
    EXPECT_NEAR(av, bv, 1e-5 * std::abs(av)) << k;
  }
  // different dataset path means a different identity
  EXPECT_NE(a["fingerprint"], b["fingerprint"]);
}

TEST_F(CliTest, QueueRuleChangesTheFingerprintAndBlocksMixedCompares) {
  make_dataset();
  ASSERT_EQ(cli("run --config run.cfg --ttc off --out base.json").code, 0);
  ASSERT_EQ(cli("run --config run.cfg --ttc on --queue-rule listing "
                "--out cal.json")
                .code,
            0);
  CliResult cmp = cli("compare base.json cal.json");
  EXPECT_EQ(cmp.code, 2);
  EXPECT_NE(cmp.out.find("fingerprint"), std::string::npos);
}

TEST_F(CliTest, UsageErrorsExitTwo) {
  write_file(dir_ / "unknown.cfg", "dataset = d\nwat = 1\n");
  EXPECT_EQ(cli("run --config unknown.cfg").code, 2);

  write_file(dir_ / "short.cfg", "dataset = d\nhorizon = 1\n");
  EXPECT_EQ(cli("run --config short.cfg").code, 2);

  EXPECT_EQ(cli("run").code, 2);                  // missing --config
  EXPECT_EQ(cli("frobnicate").code, 2);           // unknown subcommand
  EXPECT_EQ(cli("run --config nope.cfg").code, 2);  // unreadable config

  write_file(dir_ / "toneless.spec", "nodes = 2\nsteps = 50\n");
  EXPECT_EQ(cli("synth --config toneless.spec --out x").code, 2);
}

TEST_F(CliTest, DataErrorsExitThree) {
  write_file(dir_ / "missing.cfg", run_cfg("absent.sttc"));
  EXPECT_EQ(cli("run --config missing.cfg").code, 3);

  write_file(dir_ / "garbage.sttc", "BADMAGIC and then some");
  write_file(dir_ / "garbage.cfg",
             run_cfg("garbage.sttc") + "format = binary\n");
  EXPECT_EQ(cli("run --config garbage.cfg").code, 3);

  write_file(dir_ / "not_json.json", "this is not a report");
  EXPECT_EQ(cli("compare not_json.json not_json.json").code, 3);
}

TEST_F(CliTest, VerifyPassesCleanAndFailsUnderFaultInjection) {
  CliResult ok = cli("verify");
  EXPECT_EQ(ok.code, 0) << ok.out;
  EXPECT_NE(ok.out.find("[verify] fft_round_trip: PASS"), std::string::npos);
  EXPECT_NE(ok.out.find("[verify] leakage_audit: PASS"), std::string::npos);
  EXPECT_NE(ok.out.find("properties hold"), std::string::npos);
  EXPECT_EQ(ok.out.find("FAIL"), std::string::npos);

  CliResult broken = cli("verify --break-bound");
  EXPECT_EQ(broken.code, 5);
  EXPECT_NE(broken.out.find("[verify] perturbation_bound: FAIL"),
            std::string::npos);
  EXPECT_NE(broken.out.find("property 'perturbation_bound' failed"),
            std::string::npos);
  // the battery keeps going past the failure
  EXPECT_NE(broken.out.find("[verify] parameter_count: PASS"),
            std::string::npos);
}

TEST_F(CliTest, VerifyReportsOversizedRatesWithoutFailing) {
  CliResult r = cli("verify --eta 10");
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("eta 10"), std::string::npos);
  EXPECT_NE(r.out.find("no descent"), std::string::npos);
}

TEST_F(CliTest, HelpExitsZero) {
  EXPECT_EQ(cli("--help").code, 0);
  EXPECT_EQ(cli("run --help").code, 0);
  CliResult top = cli("--help");
  EXPECT_NE(top.out.find("train"), std::string::npos);
  EXPECT_NE(top.out.find("compare"), std::string::npos);
  // fault-injection flag stays out of the public surface
  EXPECT_EQ(cli("verify --help").out.find("break-bound"), std::string::npos);
}

TEST_F(CliTest, StreamedBackboneFileMatchesInlineRefit) {
  make_dataset();
  ASSERT_EQ(cli("train --config run.cfg --out fitted.sttcb").code, 0);
  write_file(dir_ / "run_bb.cfg",
             run_cfg("data.sttc") + "backbone_file = fitted.sttcb\n");
  CliResult inline_fit = cli("run --config run.cfg --ttc on --seeds 1");
  CliResult from_file = cli("run --config run_bb.cfg --ttc on --seeds 1");
  ASSERT_EQ(inline_fit.code, 0);
  ASSERT_EQ(from_file.code, 0) << from_file.out;
  Json a = Json::parse(inline_fit.out);
  Json b = Json::parse(from_file.out);
  // seasonal backbone has no fit randomness, so metrics agree exactly
  EXPECT_EQ(a["aggregate"].dump(), b["aggregate"].dump());
}

}  // namespace
