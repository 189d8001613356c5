#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "ccid/dataset_io.hpp"
#include "ccid/error.hpp"
#include "ccid/figures.hpp"
#include "ccid/io_util.hpp"
#include "ccid/run_manifest.hpp"
#include "ccid/svg_plot.hpp"
#include "ccid/protocol_sim.hpp"
#include "ccid/trace_csv.hpp"
#include "ccid/trainer.hpp"
#include "cli.hpp"

using namespace ccid;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run ccid_run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path fresh_root(const std::string& name) {
  const auto d = fs::temp_directory_path() / ("ccid_cli_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  ::setenv("CCID_OUT_ROOT", (d / "out").c_str(), 1);
  return d;
}

std::size_t count_files(const fs::path& dir) {
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(dir)) n += e.is_regular_file();
  return n;
}

}  // namespace

static plot::Panel panel_of(std::vector<double> y, bool log_y) {
  plot::Panel p;
  p.title = "p";
  p.y.log_scale = log_y;
  plot::Series s;
  s.y = std::move(y);
  for (std::size_t i = 0; i < s.y.size(); ++i) s.x.push_back(static_cast<double>(i));
  p.series.push_back(std::move(s));
  return p;
}

TEST_CASE("axis ranges and ticks") {
  const auto r = plot::axis_range(panel_of({0.5, 3.0, 2.0}, false), true);
  CHECK(r.lo <= 0.5);
  CHECK(r.hi >= 3.0);
  const auto t = plot::axis_ticks(r, false);
  REQUIRE(t.size() >= 2);
  for (std::size_t i = 1; i < t.size(); ++i) CHECK(t[i] > t[i - 1]);
  for (double v : t) CHECK((v >= r.lo && v <= r.hi));
  const auto lt = plot::axis_ticks(plot::axis_range(panel_of({0.02, 1.4}, true), true), true);
  CHECK(std::find(lt.begin(), lt.end(), 0.1) != lt.end());
  CHECK(std::find(lt.begin(), lt.end(), 1.0) != lt.end());
  CHECK_THROWS_AS(plot::axis_range(panel_of({1.0, 0.0}, true), true), Error);
  CHECK_THROWS_AS(plot::axis_range(panel_of({}, false), true), Error);
}

TEST_CASE("loss figure") {
  std::vector<train::EpochMetrics> h = {{0, 1.38, 1.39, 0.25, 0.25, 1e-3}, {1, 0.7, 0.8, 0.8, 0.7, 1e-3},
                                        {2, 0.2, 0.3, 0.9, 0.9, 5e-4}};
  const auto svg = plot::render_svg(plot::loss_figure(h));
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(svg.find("(log)") != std::string::npos);
  CHECK(svg.find("train") != std::string::npos);
  CHECK(svg.find("validation") != std::string::npos);
  CHECK(plot::render_svg(plot::loss_figure(h)) == svg);
}

TEST_CASE("trace figure needs every protocol") {
  std::vector<FlowTrace> traces;
  LinkConfig link;
  for (auto p : {ProtocolLabel::Vegas, ProtocolLabel::Reno, ProtocolLabel::Cubic})
    traces.push_back(sim::simulate_flow(p, link, 20'000'000));
  CHECK_THROWS_WITH(plot::trace_figure(traces), doctest::Contains("no traces for"));
  traces.push_back(sim::simulate_flow(ProtocolLabel::Bbr, link, 20'000'000));
  const auto fig = plot::trace_figure(traces);
  CHECK(fig.panels.size() == 8);
  CHECK(fig.columns == 2);
}

TEST_CASE("cli usage errors") {
  fresh_root("usage");
  CHECK(ccid_run({}).code != 0);
  CHECK(ccid_run({"frobnicate"}).code != 0);
  const auto r = ccid_run({"simulate", "--protocols", "reno,quic", "--flows", "1"});
  CHECK(r.code == 2);
  CHECK(r.err.find("quic") != std::string::npos);
  CHECK(ccid_run({"simulate", "--flows", "1", "--bytes", "12Q"}).code == 2);
  CHECK(ccid_run({"--version"}).out.find(kVersion) != std::string::npos);
}

TEST_CASE("cli end to end") {
  const auto root = fresh_root("e2e");
  const auto traces = root / "traces";

  auto r = ccid_run({"simulate", "--flows", "12", "--bytes", "300M", "--seed", "3", "--out", traces.string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(count_files(traces) == 48);
  const auto manifest = read_manifest(manifest_path_for(traces));
  CHECK(manifest.subcommand == "simulate");
  CHECK(manifest.seeds.at("master") == 3);

  SUBCASE("simulate is deterministic and rerunnable") {
    const auto again = root / "again";
    REQUIRE(ccid_run({"simulate", "--flows", "12", "--bytes", "300M", "--seed", "3", "--out", again.string()}).code == 0);
    for (const auto& e : fs::directory_iterator(traces))
      CHECK(io::read_file(e.path()) == io::read_file(again / e.path().filename()));
    const auto name = fs::directory_iterator(traces)->path().filename();
    const auto before = io::read_file(traces / name);
    fs::remove_all(traces);
    REQUIRE(ccid_run({"rerun", manifest_path_for(traces).string()}).code == 0);
    CHECK(count_files(traces) == 48);
    CHECK(io::read_file(traces / name) == before);
  }

  SUBCASE("pipeline, training, evaluation and plots") {
    const auto ds = root / "ds.bin";
    r = ccid_run({"build-dataset", "--in", traces.string(), "--out", ds.string(), "--seq-len", "20", "--seed", "1"});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    CHECK(r.out.find("TCP Vegas") != std::string::npos);
    const auto split = io::read_dataset(ds);
    CHECK(split.seq_len() == 20);

    const auto run_dir = root / "run";
    r = ccid_run({"train", "--data", ds.string(), "--out", run_dir.string(), "--hidden", "8", "--layers", "1",
                  "--epochs", "2", "--lr", "0.01", "--quiet"});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    for (const char* f : {"metrics.csv", "final.ckpt", "best.ckpt"}) CHECK(fs::exists(run_dir / f));
    const auto metrics = train::metrics_from_csv(io::read_file(run_dir / "metrics.csv"), "metrics.csv");
    CHECK(metrics.size() == 3);

    r = ccid_run({"eval", "--checkpoint", (run_dir / "best.ckpt").string(), "--data", ds.string()});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    CHECK(r.out.find("Accuracy (test)") != std::string::npos);

    r = ccid_run({"eval", "--checkpoint", (run_dir / "best.ckpt").string(), "--data", ds.string(), "--split", "nope"});
    CHECK(r.code == 2);

    const auto loss_svg = root / "loss.svg";
    CHECK(ccid_run({"plot", "--loss", (run_dir / "metrics.csv").string(), "--out", loss_svg.string()}).code == 0);
    CHECK(io::read_file(loss_svg).find("<svg") != std::string::npos);
    const auto trace_svg = root / "traces.svg";
    CHECK(ccid_run({"plot", "--traces", traces.string(), "--out", trace_svg.string()}).code == 0);
    CHECK(fs::exists(trace_svg));

    // Resuming a finished two-epoch run to three epochs adds one row.
    r = ccid_run({"train", "--data", ds.string(), "--out", (root / "run2").string(), "--hidden", "8", "--layers",
                  "1", "--epochs", "3", "--lr", "0.01", "--quiet", "--resume", (run_dir / "final.ckpt").string()});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    CHECK(train::metrics_from_csv(io::read_file(root / "run2" / "metrics.csv"), "m").size() == 4);

    r = ccid_run({"train", "--data", ds.string(), "--out", (root / "run3").string(), "--hidden", "9", "--layers",
                  "1", "--epochs", "3", "--resume", (run_dir / "final.ckpt").string()});
    CHECK(r.code == 1);
    CHECK(r.err.find("hidden") != std::string::npos);
  }
}

TEST_CASE("cli failures leave no partial outputs") {
  const auto root = fresh_root("fail");
  fs::create_directories(root / "empty");
  auto r = ccid_run({"build-dataset", "--in", (root / "empty").string(), "--out", (root / "ds.bin").string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("ccid: error:") == 0);
  CHECK_FALSE(fs::exists(root / "ds.bin"));
  CHECK_FALSE(fs::exists(root / "ds.bin.manifest.json"));

  io::write_file_atomic(root / "metrics.csv", train::metrics_csv_header());
  r = ccid_run({"plot", "--loss", (root / "metrics.csv").string(), "--out", (root / "loss.svg").string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("no epochs") != std::string::npos);
  CHECK_FALSE(fs::exists(root / "loss.svg"));

  r = ccid_run({"eval", "--checkpoint", (root / "missing.ckpt").string(), "--data", (root / "ds.bin").string()});
  CHECK(r.code == 1);
}

TEST_CASE("cli default outputs go under the output root") {
  const auto root = fresh_root("defaults");
  REQUIRE(ccid_run({"simulate", "--flows", "1", "--bytes", "20M", "--protocols", "bbr"}).code == 0);
  CHECK(count_files(root / "out" / "traces") == 1);
  CHECK(fs::exists(root / "out" / "traces.manifest.json"));
}
