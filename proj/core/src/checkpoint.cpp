#include "ccid/checkpoint.hpp"

#include <algorithm>

#include "ccid/error.hpp"
#include "ccid/io_util.hpp"

namespace ccid::train {

namespace {

void write_config(io::ByteWriter& w, const nn::ModelConfig& c) {
  w.u64(c.input_size);
  w.u64(c.hidden_size);
  w.u64(c.num_layers);
  w.u64(c.attention_size);
  w.u64(c.num_classes);
  w.f64(c.dropout);
}

nn::ModelConfig read_config(io::ByteReader& r) {
  nn::ModelConfig c;
  c.input_size = r.u64();
  c.hidden_size = r.u64();
  c.num_layers = r.u64();
  c.attention_size = r.u64();
  c.num_classes = r.u64();
  c.dropout = r.f64();
  try {
    c.validate();
  } catch (const Error& e) {
    r.fail(std::string("invalid model config: ") + e.what());
  }
  if (c.hidden_size > (1u << 16) || c.num_layers > 64 || c.input_size > (1u << 16) || c.attention_size > (1u << 16))
    r.fail("model config out of range");
  return c;
}

void read_params(io::ByteReader& r, nn::ModelParams& p, const char* what) {
  const auto values = r.f64s();
  if (values.size() != p.size())
    r.fail(std::string(what) + " has " + std::to_string(values.size()) + " values, config needs " +
           std::to_string(p.size()));
  std::copy(values.begin(), values.end(), p.data().begin());
}

}  // namespace

std::string encode_checkpoint(const Checkpoint& ckpt) {
  io::ByteWriter w;
  w.bytes(kCheckpointMagic);
  w.u32(kCheckpointVersion);
  write_config(w, ckpt.config());
  w.u64(ckpt.seed);
  w.u64(ckpt.seq_len);
  for (double m : ckpt.normalization.mean) w.f64(m);
  for (double s : ckpt.normalization.stddev) w.f64(s);
  w.f64s(ckpt.params.data());
  w.u8(ckpt.training ? 1 : 0);
  if (ckpt.training) {
    const auto& t = *ckpt.training;
    if (t.best_params.size() != ckpt.params.size()) throw Error("best parameters do not match the model");
    w.u64(t.optimizer.t);
    w.f64(t.optimizer.lr);
    w.f64s(t.optimizer.m);
    w.f64s(t.optimizer.v);
    w.f64(t.scheduler.best);
    w.u64(static_cast<std::uint64_t>(t.scheduler.stalled));
    w.u64(t.epochs_done);
    w.f64(t.best_val_loss);
    w.u64(t.best_epoch);
    w.f64s(t.best_params.data());
    w.u64(t.history.size());
    for (const auto& e : t.history) {
      w.u64(static_cast<std::uint64_t>(e.epoch));
      w.f64(e.train_loss);
      w.f64(e.val_loss);
      w.f64(e.train_acc);
      w.f64(e.val_acc);
      w.f64(e.lr);
    }
  }
  return w.data();
}

Checkpoint decode_checkpoint(std::string_view bytes, std::string_view name) {
  io::ByteReader r(bytes, std::string(name));
  r.expect_magic(kCheckpointMagic);
  const auto version = r.u32();
  if (version != kCheckpointVersion) r.fail("unsupported checkpoint version " + std::to_string(version));
  const auto config = read_config(r);
  Checkpoint c;
  c.params = nn::ModelParams(config);
  c.seed = r.u64();
  c.seq_len = r.u64();
  for (auto& m : c.normalization.mean) m = r.f64();
  for (auto& s : c.normalization.stddev) s = r.f64();
  read_params(r, c.params, "parameter block");

  const auto has_training = r.u8();
  if (has_training > 1) r.fail("bad training-state flag");
  if (has_training) {
    TrainingState t;
    t.optimizer.t = r.u64();
    t.optimizer.lr = r.f64();
    t.optimizer.m = r.f64s();
    t.optimizer.v = r.f64s();
    if (t.optimizer.m.size() != c.params.size() || t.optimizer.v.size() != c.params.size())
      r.fail("optimizer moments do not match the parameter count");
    t.scheduler.best = r.f64();
    t.scheduler.stalled = static_cast<int>(r.u64());
    t.epochs_done = r.u64();
    t.best_val_loss = r.f64();
    t.best_epoch = r.u64();
    t.best_params = nn::ModelParams(config);
    read_params(r, t.best_params, "best parameter block");
    const auto n = r.u64();
    if (n > bytes.size()) r.fail("metrics history length out of range");
    t.history.resize(static_cast<std::size_t>(n));
    for (auto& e : t.history) {
      e.epoch = static_cast<int>(r.u64());
      e.train_loss = r.f64();
      e.val_loss = r.f64();
      e.train_acc = r.f64();
      e.val_acc = r.f64();
      e.lr = r.f64();
    }
    c.training = std::move(t);
  }
  r.expect_end();
  return c;
}

void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  io::write_file_atomic(path, encode_checkpoint(ckpt));
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(io::read_file(path), path.string());
}

void require_config(const Checkpoint& ckpt, const nn::ModelConfig& expected) {
  const auto& c = ckpt.config();
  auto mismatch = [](const char* field, auto have, auto want) {
    throw Error(std::string("checkpoint config mismatch: ") + field + " is " + std::to_string(have) + ", expected " +
                std::to_string(want));
  };
  if (c.input_size != expected.input_size) mismatch("input size", c.input_size, expected.input_size);
  if (c.hidden_size != expected.hidden_size) mismatch("hidden size", c.hidden_size, expected.hidden_size);
  if (c.num_layers != expected.num_layers) mismatch("layers", c.num_layers, expected.num_layers);
  if (c.attention_width() != expected.attention_width())
    mismatch("attention size", c.attention_width(), expected.attention_width());
  if (c.num_classes != expected.num_classes) mismatch("classes", c.num_classes, expected.num_classes);
  if (c.dropout != expected.dropout) mismatch("dropout", c.dropout, expected.dropout);
}

}  // namespace ccid::train
