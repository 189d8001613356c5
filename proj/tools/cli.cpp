#include "cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <thread>

#include "ccid/checkpoint.hpp"
#include "ccid/dataset_io.hpp"
#include "ccid/error.hpp"
#include "ccid/feature_pipeline.hpp"
#include "ccid/figures.hpp"
#include "ccid/io_util.hpp"
#include "ccid/protocol_sim.hpp"
#include "ccid/rng.hpp"
#include "ccid/run_manifest.hpp"
#include "ccid/trace_csv.hpp"
#include "ccid/trainer.hpp"

namespace ccid::cli {

namespace fs = std::filesystem;

namespace {

class UsageError : public Error {
 public:
  using Error::Error;
};

/// Deletes everything registered unless commit() is called.
class OutputGuard {
 public:
  ~OutputGuard() {
    if (committed_) return;
    std::error_code ec;
    for (auto it = paths_.rbegin(); it != paths_.rend(); ++it) fs::remove_all(*it, ec);
  }
  void add(const fs::path& p) { paths_.push_back(p); }
  void commit() { committed_ = true; }

 private:
  std::vector<fs::path> paths_;
  bool committed_ = false;
};

/// Creates `dir` if needed; a directory this run created is removed on failure.
void ensure_dir(const fs::path& dir, OutputGuard& guard) {
  if (fs::exists(dir)) {
    if (!fs::is_directory(dir)) throw Error("not a directory: " + dir.string());
    return;
  }
  fs::path top = dir;
  while (top.has_parent_path() && !top.parent_path().empty() && !fs::exists(top.parent_path())) top = top.parent_path();
  fs::create_directories(dir);
  guard.add(top);
}

void ensure_parent(const fs::path& file, OutputGuard& guard) {
  if (file.has_parent_path()) ensure_dir(file.parent_path(), guard);
}

fs::path out_root() {
  const char* env = std::getenv("CCID_OUT_ROOT");
  return env && *env ? fs::path(env) : fs::path("ccid-out");
}

std::string abs_str(const fs::path& p) { return fs::absolute(p).lexically_normal().string(); }

struct Outcome {
  RunManifest manifest;
  fs::path manifest_path;
};

/// Resolved command line plus the same values keyed by flag name.
struct Resolved {
  std::vector<std::string> argv;
  std::map<std::string, std::string> config;

  explicit Resolved(std::string sub) { argv.push_back(std::move(sub)); }
  void add(const std::string& flag, const std::string& value) {
    argv.push_back("--" + flag);
    argv.push_back(value);
    config[flag] = value;
  }
  void add(const std::string& flag, double v) { add(flag, io::format_double(v)); }
  void add_int(const std::string& flag, std::int64_t v) { add(flag, std::to_string(v)); }
  void add_uint(const std::string& flag, std::uint64_t v) { add(flag, std::to_string(v)); }
  void flag(const std::string& name, bool on) {
    if (on) argv.push_back("--" + name);
    config[name] = on ? "true" : "false";
  }
};

std::vector<ProtocolLabel> parse_protocols(const std::string& list) {
  const std::string valid = "vegas, reno, cubic, bbr, all";
  std::vector<ProtocolLabel> out;
  for (auto tok : io::split(list, ',')) {
    tok = io::trim(tok);
    if (tok == "all") {
      for (auto p : kAllProtocols)
        if (std::find(out.begin(), out.end(), p) == out.end()) out.push_back(p);
      continue;
    }
    auto p = parse_protocol(tok);
    if (!p) throw UsageError("unknown protocol '" + std::string(tok) + "' (valid: " + valid + ")");
    if (std::find(out.begin(), out.end(), *p) == out.end()) out.push_back(*p);
  }
  if (out.empty()) throw UsageError("no protocols given (valid: " + valid + ")");
  return out;
}

// ---------------------------------------------------------------------------

struct SimulateOpts {
  std::string protocols = "all";
  int flows = 50;
  std::uint64_t seed = 0;
  std::string out;
  std::string bytes = "500M";
  double interval = 0.1;
  double capacity = 1e9;
  double base_rtt_us = 90.0;
  std::int64_t buffer = 8;
  double jitter = 0.05;
  double delay_noise = 0.5;
  double loss = 0.0;
  unsigned jobs = 1;
};

Outcome cmd_simulate(const SimulateOpts& o, std::ostream& out) {
  const auto labels = parse_protocols(o.protocols);
  if (o.flows < 1) throw UsageError("--flows must be at least 1");
  std::int64_t bytes = 0;
  try {
    bytes = io::parse_byte_size(o.bytes);
  } catch (const Error& e) {
    throw UsageError(std::string("--bytes: ") + e.what());
  }
  const fs::path dir = o.out.empty() ? out_root() / "traces" : fs::path(o.out);

  LinkConfig link;
  link.capacity_bits_per_s = o.capacity;
  link.base_rtt_s = o.base_rtt_us * 1e-6;
  link.buffer_pkts = o.buffer;
  link.validate();
  sim::SimConfig cfg;
  cfg.link_jitter = o.jitter;
  cfg.delay_noise_ratio = o.delay_noise;
  cfg.random_loss_rate = o.loss;

  struct Job {
    ProtocolLabel label;
    std::uint64_t seed;
    fs::path path;
  };
  std::vector<Job> jobs;
  for (auto label : labels)
    for (int i = 0; i < o.flows; ++i) {
      const auto seed = derive_seed(o.seed, static_cast<std::uint64_t>(index_of(label)), static_cast<std::uint64_t>(i));
      jobs.push_back({label, seed, dir / io::trace_filename(label, seed, io::capture_timestamp(static_cast<std::uint64_t>(i)))});
    }

  OutputGuard guard;
  ensure_dir(dir, guard);
  for (const auto& j : jobs) guard.add(j.path);

  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(std::max(1u, o.jobs));
  auto worker = [&](std::size_t w) {
    try {
      for (std::size_t k = next++; k < jobs.size(); k = next++) {
        LinkConfig l = link;
        l.seed = jobs[k].seed;
        auto trace = sim::simulate_flow(jobs[k].label, l, bytes, o.interval, cfg);
        trace.source_id = jobs[k].path.stem().string();
        io::write_trace_csv(trace, jobs[k].path);
      }
    } catch (...) {
      errors[w] = std::current_exception();
    }
  };
  if (o.jobs <= 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < o.jobs; ++w) pool.emplace_back(worker, w);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  out << "wrote " << jobs.size() << " traces to " << dir.string() << "\n";

  RunManifest m;
  Resolved r("simulate");
  std::string protos;
  for (auto l : labels) protos += (protos.empty() ? "" : ",") + std::string(to_string(l));
  r.add("protocols", protos);
  r.add_int("flows", o.flows);
  r.add_uint("seed", o.seed);
  r.add("out", abs_str(dir));
  r.add_int("bytes", bytes);
  r.add("interval", o.interval);
  r.add("capacity", o.capacity);
  r.add("base-rtt-us", o.base_rtt_us);
  r.add_int("buffer", o.buffer);
  r.add("jitter", o.jitter);
  r.add("delay-noise", o.delay_noise);
  r.add("loss", o.loss);
  r.add_uint("jobs", o.jobs);
  m.subcommand = "simulate";
  m.argv = r.argv;
  m.config = r.config;
  m.outputs.push_back(abs_str(dir));
  m.seeds["master"] = o.seed;
  guard.commit();
  return {m, manifest_path_for(dir)};
}

// ---------------------------------------------------------------------------

struct BuildOpts {
  std::string in;
  std::string out;
  std::size_t seq_len = features::kDefaultSeqLen;
  std::size_t stride = 0;
  std::size_t window = features::kDefaultSmoothingWindow;
  std::string split_unit = "sequence";
  double train = 0.7;
  double val = 0.1;
  double test = 0.2;
  std::uint64_t seed = 0;
};

Outcome cmd_build_dataset(const BuildOpts& o, std::ostream& out) {
  const fs::path in = o.in.empty() ? out_root() / "traces" : fs::path(o.in);
  const fs::path dst = o.out.empty() ? out_root() / "dataset.bin" : fs::path(o.out);
  features::PipelineConfig cfg;
  cfg.seq_len = o.seq_len;
  cfg.stride = o.stride;
  cfg.smoothing_window = o.window;
  cfg.seed = o.seed;
  cfg.ratios = {o.train, o.val, o.test};
  if (o.split_unit == "sequence")
    cfg.unit = features::SplitUnit::Sequence;
  else if (o.split_unit == "flow")
    cfg.unit = features::SplitUnit::Flow;
  else
    throw UsageError("--split-unit must be 'sequence' or 'flow'");

  const auto files = io::list_trace_files(in);
  if (files.empty()) throw Error("no trace CSV files in " + in.string());
  std::vector<FlowTrace> traces;
  traces.reserve(files.size());
  for (const auto& f : files) traces.push_back(io::read_trace_csv(f));

  features::PipelineReport report;
  const auto ds = features::build_dataset(std::move(traces), cfg, &report);
  out << features::format_counts_table(report);

  OutputGuard guard;
  ensure_parent(dst, guard);
  io::write_dataset(ds, dst);
  guard.add(dst);
  out << "train " << ds.train.size() << ", validation " << ds.validation.size() << ", test " << ds.test.size()
      << " sequences of " << ds.seq_len() << " steps -> " << dst.string() << "\n";

  RunManifest m;
  Resolved r("build-dataset");
  r.add("in", abs_str(in));
  r.add("out", abs_str(dst));
  r.add_uint("seq-len", o.seq_len);
  r.add_uint("stride", o.stride);
  r.add_uint("window", o.window);
  r.add("split-unit", o.split_unit);
  r.add("train", o.train);
  r.add("val", o.val);
  r.add("test", o.test);
  r.add_uint("seed", o.seed);
  m.subcommand = "build-dataset";
  m.argv = r.argv;
  m.config = r.config;
  m.inputs.push_back(abs_str(in));
  m.outputs.push_back(abs_str(dst));
  m.seeds["split"] = o.seed;
  guard.commit();
  return {m, manifest_path_for(dst)};
}

// ---------------------------------------------------------------------------

struct TrainOpts {
  std::string data;
  std::string out;
  std::size_t hidden = 512;
  std::size_t layers = 3;
  std::size_t attention = 0;
  double dropout = 0.4;
  double lr = 7.5e-5;
  int epochs = 30;
  std::size_t batch = 8;
  double factor = 0.5;
  int patience = 5;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  double max_grad_norm = 0.0;
  bool zero_head = false;
  std::string resume;
  bool quiet = false;
};

Outcome cmd_train(const TrainOpts& o, std::ostream& out) {
  const fs::path data = o.data.empty() ? out_root() / "dataset.bin" : fs::path(o.data);
  const fs::path dir = o.out.empty() ? out_root() / "run" : fs::path(o.out);

  nn::ModelConfig model;
  model.hidden_size = o.hidden;
  model.num_layers = o.layers;
  model.attention_size = o.attention;
  model.dropout = o.dropout;
  model.validate();
  train::TrainConfig tc;
  tc.learning_rate = o.lr;
  tc.epochs = o.epochs;
  tc.batch_size = o.batch;
  tc.plateau_factor = o.factor;
  tc.plateau_patience = o.patience;
  tc.seed = o.seed;
  tc.threads = std::max(1u, o.threads);
  tc.max_grad_norm = o.max_grad_norm;
  tc.validate();

  const auto ds = io::read_dataset(data);
  if (ds.train.empty() || ds.validation.empty()) throw Error(data.string() + ": train and validation splits must be nonempty");
  if (model.input_size != features::kNumFeatures)
    throw Error("model expects " + std::to_string(model.input_size) + " features, dataset has " +
                std::to_string(features::kNumFeatures));

  std::optional<train::Checkpoint> resume;
  if (!o.resume.empty()) {
    resume = train::read_checkpoint(o.resume);
    train::require_config(*resume, model);
  }

  OutputGuard guard;
  ensure_dir(dir, guard);
  const fs::path metrics_path = dir / "metrics.csv";
  const fs::path final_path = dir / "final.ckpt";
  const fs::path best_path = dir / "best.ckpt";
  for (const auto& p : {metrics_path, final_path, best_path})
    if (!fs::exists(p) || (!resume.has_value())) guard.add(p);

  std::ofstream metrics(metrics_path, std::ios::binary | std::ios::trunc);
  if (!metrics) throw Error("cannot write " + metrics_path.string());
  metrics << train::metrics_csv_header();
  if (resume && resume->training)
    for (const auto& m : resume->training->history) metrics << train::metrics_csv_row(m);
  metrics.flush();

  train::TrainOptions opts;
  opts.head_init = o.zero_head ? nn::HeadInit::Zero : nn::HeadInit::Uniform;
  opts.resume = resume ? &*resume : nullptr;
  opts.on_epoch = [&](const train::EpochMetrics& m, const train::Checkpoint& current) {
    metrics << train::metrics_csv_row(m);
    metrics.flush();
    train::write_checkpoint(current, final_path);
    if (!o.quiet) {
      char line[160];
      std::snprintf(line, sizeof(line), "epoch %3d/%d  train_loss %.6f  val_loss %.6f  train_acc %.4f  val_acc %.4f  lr %g\n",
                    m.epoch, o.epochs, m.train_loss, m.val_loss, m.train_acc, m.val_acc, m.lr);
      out << line << std::flush;
    }
  };
  const auto result = train::train(ds, model, tc, opts);
  metrics.close();

  io::write_file_atomic(metrics_path, train::metrics_to_csv(result.history));
  train::write_checkpoint(result.final_checkpoint, final_path);
  train::write_checkpoint(result.best_checkpoint, best_path);
  const auto& st = *result.final_checkpoint.training;
  out << "best validation loss " << io::format_double(st.best_val_loss) << " at epoch " << st.best_epoch << "; wrote "
      << dir.string() << "\n";

  RunManifest m;
  Resolved r("train");
  r.add("data", abs_str(data));
  r.add("out", abs_str(dir));
  r.add_uint("hidden", o.hidden);
  r.add_uint("layers", o.layers);
  r.add_uint("attention", o.attention);
  r.add("dropout", o.dropout);
  r.add("lr", o.lr);
  r.add_int("epochs", o.epochs);
  r.add_uint("batch", o.batch);
  r.add("factor", o.factor);
  r.add_int("patience", o.patience);
  r.add_uint("seed", o.seed);
  r.add_uint("threads", tc.threads);
  r.add("max-grad-norm", o.max_grad_norm);
  r.flag("zero-head", o.zero_head);
  if (!o.resume.empty()) r.add("resume", abs_str(o.resume));
  r.flag("quiet", o.quiet);
  m.subcommand = "train";
  m.argv = r.argv;
  m.config = r.config;
  m.inputs.push_back(abs_str(data));
  if (!o.resume.empty()) m.inputs.push_back(abs_str(o.resume));
  m.outputs = {abs_str(metrics_path), abs_str(final_path), abs_str(best_path)};
  m.seeds["train"] = o.seed;
  m.seeds["init"] = derive_seed(o.seed, 1);
  m.seeds["dataset"] = ds.seed;
  guard.commit();
  return {m, manifest_path_for(dir)};
}

// ---------------------------------------------------------------------------

struct EvalOpts {
  std::string checkpoint;
  std::string data;
  std::string split = "test";
  std::string report;
  unsigned threads = 1;
};

std::string format_eval(const train::EvalResult& r, const std::string& split) {
  std::ostringstream s;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < kNumProtocols; ++i) correct += static_cast<std::size_t>(r.confusion[i][i]);
  char buf[200];
  std::snprintf(buf, sizeof(buf), "Accuracy (%s): %.2f%% (%zu/%zu)\nMean loss: %.6f\n\n", split.c_str(),
                100.0 * r.accuracy, correct, r.total, r.mean_loss);
  s << buf;
  std::snprintf(buf, sizeof(buf), "%-10s %10s %10s %8s\n", "class", "precision", "recall", "support");
  s << buf;
  for (std::size_t c = 0; c < kNumProtocols; ++c) {
    std::int64_t support = 0;
    for (auto v : r.confusion[c]) support += v;
    auto fmt = [](double v) {
      char b[16];
      if (std::isnan(v)) return std::string("n/a");
      std::snprintf(b, sizeof(b), "%.4f", v);
      return std::string(b);
    };
    std::snprintf(buf, sizeof(buf), "%-10s %10s %10s %8lld\n", std::string(display_name(label_from_index(static_cast<int>(c)))).c_str(),
                  fmt(r.precision(c)).c_str(), fmt(r.recall(c)).c_str(), static_cast<long long>(support));
    s << buf;
  }
  s << "\nConfusion matrix (rows: true, columns: predicted)\n";
  std::snprintf(buf, sizeof(buf), "%-10s", "");
  s << buf;
  for (auto p : kAllProtocols) {
    std::snprintf(buf, sizeof(buf), " %8s", std::string(to_string(p)).c_str());
    s << buf;
  }
  s << "\n";
  for (std::size_t t = 0; t < kNumProtocols; ++t) {
    std::snprintf(buf, sizeof(buf), "%-10s", std::string(to_string(label_from_index(static_cast<int>(t)))).c_str());
    s << buf;
    for (auto v : r.confusion[t]) {
      std::snprintf(buf, sizeof(buf), " %8lld", static_cast<long long>(v));
      s << buf;
    }
    s << "\n";
  }
  return s.str();
}

Outcome cmd_eval(const EvalOpts& o, std::ostream& out, std::ostream& err) {
  const fs::path ckpt_path = o.checkpoint.empty() ? out_root() / "run" / "best.ckpt" : fs::path(o.checkpoint);
  const fs::path data = o.data.empty() ? out_root() / "dataset.bin" : fs::path(o.data);
  const auto ckpt = train::read_checkpoint(ckpt_path);
  const auto ds = io::read_dataset(data);
  if (ckpt.config().input_size != features::kNumFeatures)
    throw Error("checkpoint expects " + std::to_string(ckpt.config().input_size) + " features, dataset has " +
                std::to_string(features::kNumFeatures));
  if (ckpt.normalization != ds.normalization)
    err << "ccid: warning: checkpoint and dataset were normalized with different statistics\n";

  std::vector<features::SequenceSample> samples;
  if (o.split == "test" || o.split == "all") samples.insert(samples.end(), ds.test.begin(), ds.test.end());
  if (o.split == "validation" || o.split == "all")
    samples.insert(samples.end(), ds.validation.begin(), ds.validation.end());
  if (o.split == "train" || o.split == "all") samples.insert(samples.end(), ds.train.begin(), ds.train.end());
  if (o.split != "test" && o.split != "validation" && o.split != "train" && o.split != "all")
    throw UsageError("--split must be test, validation, train, or all");

  const auto res = train::evaluate(ckpt.params, samples, std::max(1u, o.threads));
  const auto text = format_eval(res, o.split);
  out << text;

  OutputGuard guard;
  RunManifest m;
  Resolved r("eval");
  r.add("checkpoint", abs_str(ckpt_path));
  r.add("data", abs_str(data));
  r.add("split", o.split);
  r.add_uint("threads", std::max(1u, o.threads));
  m.inputs = {abs_str(ckpt_path), abs_str(data)};
  if (!o.report.empty()) {
    ensure_parent(o.report, guard);
    guard.add(o.report);
    io::write_file_atomic(o.report, text);
    r.add("report", abs_str(o.report));
    m.outputs.push_back(abs_str(o.report));
  }
  m.subcommand = "eval";
  m.argv = r.argv;
  m.config = r.config;
  m.seeds["checkpoint"] = ckpt.seed;
  const fs::path manifest_base = o.report.empty() ? ckpt_path.parent_path() / "eval" : fs::path(o.report);
  guard.commit();
  return {m, manifest_path_for(manifest_base)};
}

// ---------------------------------------------------------------------------

struct PlotOpts {
  std::string loss;
  std::string traces;
  std::string out;
};

Outcome cmd_plot(const PlotOpts& o, std::ostream& out) {
  if (o.loss.empty() == o.traces.empty()) throw UsageError("give exactly one of --loss or --traces");
  plot::Figure fig;
  fs::path dst;
  if (!o.loss.empty()) {
    const auto history = train::metrics_from_csv(io::read_file(o.loss), o.loss);
    fig = plot::loss_figure(history);
    dst = o.out.empty() ? out_root() / "loss.svg" : fs::path(o.out);
  } else {
    std::vector<FlowTrace> traces;
    for (const auto& f : io::list_trace_files(o.traces)) traces.push_back(io::read_trace_csv(f));
    if (traces.empty()) throw Error("no trace CSV files in " + o.traces);
    fig = plot::trace_figure(traces);
    dst = o.out.empty() ? out_root() / "traces.svg" : fs::path(o.out);
  }
  const auto svg = plot::render_svg(fig);

  OutputGuard guard;
  ensure_parent(dst, guard);
  guard.add(dst);
  io::write_file_atomic(dst, svg);
  out << "wrote " << dst.string() << "\n";

  RunManifest m;
  Resolved r("plot");
  if (!o.loss.empty()) r.add("loss", abs_str(o.loss));
  if (!o.traces.empty()) r.add("traces", abs_str(o.traces));
  r.add("out", abs_str(dst));
  m.subcommand = "plot";
  m.argv = r.argv;
  m.config = r.config;
  m.inputs.push_back(abs_str(o.loss.empty() ? o.traces : o.loss));
  m.outputs.push_back(abs_str(dst));
  guard.commit();
  return {m, manifest_path_for(dst)};
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Congestion-control identification toolkit", "ccid"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  SimulateOpts so;
  auto* sim = app.add_subcommand("simulate", "Simulate labelled flows and write trace CSVs");
  sim->add_option("--protocols", so.protocols, "Comma-separated list of vegas,reno,cubic,bbr or 'all'");
  sim->add_option("--flows", so.flows, "Flows per protocol");
  sim->add_option("--seed", so.seed, "Master seed; per-flow seeds are derived from it");
  sim->add_option("--out", so.out, "Output directory (default $CCID_OUT_ROOT/traces)");
  sim->add_option("--bytes", so.bytes, "Transfer size per flow, decimal suffixes K/M/G");
  sim->add_option("--interval", so.interval, "Sample interval in seconds");
  sim->add_option("--capacity", so.capacity, "Bottleneck capacity in bits/s");
  sim->add_option("--base-rtt-us", so.base_rtt_us, "Base round-trip time in microseconds");
  sim->add_option("--buffer", so.buffer, "Bottleneck buffer in packets");
  sim->add_option("--jitter", so.jitter, "Per-flow link jitter fraction");
  sim->add_option("--delay-noise", so.delay_noise, "Mean extra per-round delay as a fraction of base RTT");
  sim->add_option("--loss", so.loss, "Random per-packet loss probability");
  sim->add_option("--jobs", so.jobs, "Worker threads");

  BuildOpts bo;
  auto* build = app.add_subcommand("build-dataset", "Smooth, balance, window, split, and normalize traces");
  build->add_option("--in", bo.in, "Directory of trace CSVs (default $CCID_OUT_ROOT/traces)");
  build->add_option("--out", bo.out, "Dataset file (default $CCID_OUT_ROOT/dataset.bin)");
  build->add_option("--seq-len", bo.seq_len, "Time steps per sequence");
  build->add_option("--stride", bo.stride, "Window stride; 0 means the sequence length");
  build->add_option("--window", bo.window, "Smoothing window in samples");
  build->add_option("--split-unit", bo.split_unit, "Split by 'sequence' or by 'flow'");
  build->add_option("--train", bo.train, "Train fraction");
  build->add_option("--val", bo.val, "Validation fraction");
  build->add_option("--test", bo.test, "Test fraction");
  build->add_option("--seed", bo.seed, "Split seed");

  TrainOpts to;
  auto* tr = app.add_subcommand("train", "Train the GRU classifier");
  tr->add_option("--data", to.data, "Dataset file (default $CCID_OUT_ROOT/dataset.bin)");
  tr->add_option("--out", to.out, "Run directory (default $CCID_OUT_ROOT/run)");
  tr->add_option("--hidden", to.hidden, "GRU hidden size");
  tr->add_option("--layers", to.layers, "Stacked bidirectional GRU layers");
  tr->add_option("--attention", to.attention, "Attention width; 0 means the hidden size");
  tr->add_option("--dropout", to.dropout, "Dropout between layers");
  tr->add_option("--lr", to.lr, "Adam learning rate");
  tr->add_option("--epochs", to.epochs, "Training epochs");
  tr->add_option("--batch", to.batch, "Batch size");
  tr->add_option("--factor", to.factor, "Plateau learning-rate factor");
  tr->add_option("--patience", to.patience, "Plateau patience in epochs");
  tr->add_option("--seed", to.seed, "Training seed (init, shuffle, dropout)");
  tr->add_option("--threads", to.threads, "Worker threads for per-sample gradients");
  tr->add_option("--max-grad-norm", to.max_grad_norm, "Clip the global gradient norm; 0 disables");
  tr->add_flag("--zero-head", to.zero_head, "Start the classifier head at zero (uniform predictions)");
  tr->add_option("--resume", to.resume, "Continue from a final.ckpt");
  tr->add_flag("--quiet", to.quiet, "Suppress per-epoch progress lines");

  EvalOpts eo;
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset split");
  ev->add_option("--checkpoint", eo.checkpoint, "Checkpoint (default $CCID_OUT_ROOT/run/best.ckpt)");
  ev->add_option("--data", eo.data, "Dataset file (default $CCID_OUT_ROOT/dataset.bin)");
  ev->add_option("--split", eo.split, "test, validation, train, or all");
  ev->add_option("--report", eo.report, "Also write the report to this file");
  ev->add_option("--threads", eo.threads, "Worker threads");

  PlotOpts po;
  auto* pl = app.add_subcommand("plot", "Render a loss curve or per-protocol trace panels as SVG");
  pl->add_option("--loss", po.loss, "Metrics CSV from train");
  pl->add_option("--traces", po.traces, "Directory of trace CSVs");
  pl->add_option("--out", po.out, "Output SVG (default $CCID_OUT_ROOT/loss.svg or traces.svg)");

  std::string manifest_file;
  auto* rr = app.add_subcommand("rerun", "Replay the command recorded in a run manifest");
  rr->add_option("manifest", manifest_file, "Manifest JSON")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  const auto t0 = std::chrono::steady_clock::now();
  try {
    Outcome r;
    if (sim->parsed()) {
      r = cmd_simulate(so, out);
    } else if (build->parsed()) {
      r = cmd_build_dataset(bo, out);
    } else if (tr->parsed()) {
      r = cmd_train(to, out);
    } else if (ev->parsed()) {
      r = cmd_eval(eo, out, err);
    } else if (pl->parsed()) {
      r = cmd_plot(po, out);
    } else {
      const auto recorded = read_manifest(manifest_file);
      if (recorded.argv.empty() || recorded.argv.front() == "rerun") throw Error(manifest_file + ": nothing to replay");
      return run(recorded.argv, out, err);
    }
    r.manifest.duration_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_manifest(r.manifest, r.manifest_path);
    return 0;
  } catch (const UsageError& e) {
    err << "ccid: usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "ccid: error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace ccid::cli
