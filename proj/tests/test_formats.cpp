#include <doctest.h>

#include <filesystem>

#include "ccid/checkpoint.hpp"
#include "ccid/dataset_io.hpp"
#include "ccid/error.hpp"
#include "ccid/io_util.hpp"
#include "ccid/protocol_sim.hpp"
#include "ccid/run_manifest.hpp"
#include "ccid/trace_csv.hpp"
#include "ccid/trainer.hpp"

using namespace ccid;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  auto d = fs::temp_directory_path() / ("ccid_test_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

train::Checkpoint sample_checkpoint(bool with_state) {
  nn::ModelConfig cfg;
  cfg.hidden_size = 3;
  cfg.num_layers = 2;
  cfg.attention_size = 2;
  train::Checkpoint c;
  c.params = nn::init_params(cfg, 4);
  c.seed = 99;
  c.seq_len = 60;
  c.normalization.mean = {1, 2, 3, 4, 5};
  c.normalization.stddev = {0.1, 0.2, 0.3, 0.4, 0.5};
  if (with_state) {
    train::TrainingState t;
    t.optimizer = train::OptimizerState::fresh(c.params, 7.5e-5);
    t.optimizer.t = 12;
    t.optimizer.m[3] = -0.25;
    t.optimizer.v[5] = 1e-300;
    t.scheduler.best = 0.123456789;
    t.scheduler.stalled = 2;
    t.epochs_done = 4;
    t.best_val_loss = 0.1;
    t.best_epoch = 3;
    t.best_params = nn::init_params(cfg, 5);
    t.history = {{0, 1.4, 1.39, 0.25, 0.25, 7.5e-5}, {1, 1.1, 1.2, 0.5, 0.4, 3.75e-5}};
    c.training = t;
  }
  return c;
}

}  // namespace

TEST_CASE("format_double round-trips") {
  for (double v : {0.0, 0.1, 1.0 / 3.0, 1e-300, 123456789.123456789, -2.5e17}) {
    double back = 0;
    REQUIRE(io::parse_double(io::format_double(v), back));
    CHECK(back == v);
  }
  double x;
  CHECK_FALSE(io::parse_double("1.5x", x));
  CHECK_FALSE(io::parse_double("", x));
}

TEST_CASE("parse_byte_size") {
  CHECK(io::parse_byte_size("500M") == 500'000'000);
  CHECK(io::parse_byte_size("500MB") == 500'000'000);
  CHECK(io::parse_byte_size("2G") == 2'000'000'000);
  CHECK(io::parse_byte_size("1.5k") == 1500);
  CHECK(io::parse_byte_size("4096") == 4096);
  CHECK_THROWS_AS(io::parse_byte_size("0"), Error);
  CHECK_THROWS_AS(io::parse_byte_size("12Q"), Error);
  CHECK_THROWS_AS(io::parse_byte_size("1.2345K"), Error);
}

TEST_CASE("trace file naming") {
  CHECK(io::trace_filename(ProtocolLabel::Bbr, 7, "20250101T060000") == "bbr_7_20250101T060000.csv");
  CHECK(io::capture_timestamp(0) == "20250101T060000");
  CHECK(io::capture_timestamp(1) == "20250101T120000");
  CHECK(io::capture_timestamp(2) == "20250101T180000");
  CHECK(io::capture_timestamp(3) == "20250102T060000");
  CHECK(io::capture_timestamp(3 * 31) == "20250201T060000");
  CHECK(label_from_filename(io::trace_filename(ProtocolLabel::Vegas, 1, io::capture_timestamp(5))) ==
        ProtocolLabel::Vegas);
}

TEST_CASE("trace CSV round trip") {
  LinkConfig link;
  link.seed = 17;
  auto t = sim::simulate_flow(ProtocolLabel::Cubic, link, 30'000'000);
  t.records[1].smoothed_mbps = 1.0 / 3.0;
  const auto text = io::trace_to_csv(t);
  auto back = io::trace_from_csv(text, "cubic_17_x.csv");
  back.source_id = t.source_id;
  CHECK(back == t);
  CHECK(io::trace_to_csv(back) == text);

  const auto dir = scratch_dir("trace");
  io::write_trace_csv(t, dir / "a.csv");
  const auto first = io::read_file(dir / "a.csv");
  io::write_trace_csv(io::read_trace_csv(dir / "a.csv"), dir / "b.csv");
  CHECK(io::read_file(dir / "b.csv") == first);
  fs::remove_all(dir);
}

TEST_CASE("external trace CSV") {
  const std::string text =
      "time,size,Max_Winc,Mbps,Smoothed,rtt_ms\n"
      "0.1,1000,2920,0.08,,0.1\n"
      "0.2,2000,2920,0.16,nan,0.11\n";
  const auto t = io::trace_from_csv(text, "dir/reno_capture.csv");
  CHECK(t.label == ProtocolLabel::Reno);
  CHECK(t.records.size() == 2);
  CHECK_FALSE(t.records[0].smoothed_mbps.has_value());
  CHECK(t.sample_interval_s == doctest::Approx(0.1));
  CHECK_THROWS_WITH(io::trace_from_csv(text, "capture.csv"),
                    doctest::Contains("cannot infer protocol"));
}

TEST_CASE("trace CSV errors name file and line") {
  CHECK_THROWS_WITH(io::trace_from_csv("time,size,Mbps\n", "bbr_x.csv"),
                    "bbr_x.csv:1: missing columns: Max_Winc, Smoothed, rtt_ms");
  CHECK_THROWS_WITH(io::trace_from_csv("time,size,Max_Winc,Mbps,Smoothed,rtt_ms\n0.1,1,1,1,,abc\n", "bbr_x.csv"),
                    "bbr_x.csv:2: bad rtt_ms value 'abc'");
  CHECK_THROWS_WITH(
      io::trace_from_csv("time,size,Max_Winc,Mbps,Smoothed,rtt_ms\n0.2,1,1,1,,1\n0.1,1,1,1,,1\n", "vegas.csv"),
      "vegas.csv:3: time must be strictly increasing");
  CHECK_THROWS_WITH(io::trace_from_csv("time,size,Max_Winc,Mbps,Smoothed,rtt_ms\n0.1,1,1\n", "vegas.csv"),
                    "vegas.csv:2: expected 6 fields, got 3");
  CHECK_THROWS_AS(io::trace_from_csv("", "vegas.csv"), Error);
}

TEST_CASE("dataset container round trip") {
  features::DatasetSplit ds;
  ds.seed = 5;
  ds.normalization.mean = {1, 2, 3, 4, 5};
  ds.normalization.stddev = {1, 1, 0, 2, 1e-9};
  for (int i = 0; i < 7; ++i) {
    features::SequenceSample s;
    s.length = 4;
    s.label = label_from_index(i % 4);
    s.source_id = "flow" + std::to_string(i) + "@0";
    for (int k = 0; k < 20; ++k) s.features.push_back(0.1 * k - i / 7.0);
    (i < 4 ? ds.train : i < 5 ? ds.validation : ds.test).push_back(s);
  }
  const auto bytes = io::encode_dataset(ds);
  const auto back = io::decode_dataset(bytes);
  CHECK(back == ds);
  CHECK(io::encode_dataset(back) == bytes);

  CHECK_THROWS_AS(io::decode_dataset(bytes.substr(0, bytes.size() - 3)), Error);
  CHECK_THROWS_AS(io::decode_dataset("NOTADSET" + bytes.substr(8)), Error);
  CHECK_THROWS_AS(io::decode_dataset(bytes + "x"), Error);
}

TEST_CASE("checkpoint round trip") {
  for (bool with_state : {false, true}) {
    const auto c = sample_checkpoint(with_state);
    const auto bytes = train::encode_checkpoint(c);
    const auto back = train::decode_checkpoint(bytes);
    CHECK(back == c);
    CHECK(train::encode_checkpoint(back) == bytes);
    CHECK_THROWS_AS(train::decode_checkpoint(bytes.substr(0, bytes.size() - 1)), Error);
  }
  const auto dir = scratch_dir("ckpt");
  train::write_checkpoint(sample_checkpoint(true), dir / "c.ckpt");
  CHECK(train::read_checkpoint(dir / "c.ckpt") == sample_checkpoint(true));
  fs::remove_all(dir);
}

TEST_CASE("checkpoint config mismatch") {
  const auto c = sample_checkpoint(false);
  nn::ModelConfig cfg = c.config();
  CHECK_NOTHROW(train::require_config(c, cfg));
  cfg.hidden_size = 4;
  CHECK_THROWS_WITH(train::require_config(c, cfg), doctest::Contains("hidden size is 3, expected 4"));
  cfg = c.config();
  cfg.num_layers = 1;
  CHECK_THROWS_AS(train::require_config(c, cfg), Error);
}

TEST_CASE("metrics CSV") {
  std::vector<train::EpochMetrics> h = {{0, 1.3862943611198906, 1.38, 0.25, 0.25, 7.5e-5},
                                        {1, 0.9, 0.95, 0.6, 0.55, 3.75e-5}};
  const auto text = train::metrics_to_csv(h);
  CHECK(text.rfind("# ccid-metrics v1\nepoch,train_loss,val_loss,train_acc,val_acc,lr\n", 0) == 0);
  const auto back = train::metrics_from_csv(text, "m.csv");
  CHECK(back == h);
  CHECK(train::metrics_to_csv(back) == text);
  CHECK_THROWS_WITH(train::metrics_from_csv("epoch,train_loss\n0,1\n", "m.csv"),
                    "m.csv:1: missing columns: val_loss, train_acc, val_acc, lr");
  CHECK_THROWS_WITH(train::metrics_from_csv(std::string(train::metrics_csv_header()), "m.csv"),
                    "m.csv: metrics file has no epochs");
  CHECK_THROWS_AS(train::metrics_from_csv("", "m.csv"), Error);
}

TEST_CASE("run manifest") {
  RunManifest m;
  m.subcommand = "simulate";
  m.argv = {"simulate", "--flows", "3"};
  m.config = {{"flows", "3"}};
  m.outputs = {"/tmp/x"};
  m.seeds = {{"master", 18446744073709551615ull}};
  m.duration_s = 0.125;
  const auto back = manifest_from_json(manifest_to_json(m), "m.json");
  CHECK(back == m);
  CHECK_THROWS_AS(manifest_from_json("{}", "m.json"), Error);
  CHECK_THROWS_AS(manifest_from_json("not json", "m.json"), Error);
  CHECK(manifest_path_for("out/traces") == fs::path("out/traces.manifest.json"));
  CHECK(manifest_path_for("out/traces/") == fs::path("out/traces.manifest.json"));
}
