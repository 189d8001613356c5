#include "ccid/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <thread>

#include "ccid/error.hpp"
#include "ccid/io_util.hpp"
#include "ccid/rng.hpp"

namespace ccid::train {

namespace {

constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kShuffleStream = 2;
constexpr std::uint64_t kDropoutStream = 3;

/// Runs fn(i) for i in [0, n) on up to `threads` workers, strided so each
/// index is handled by exactly one worker.
template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
  const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(threads, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += workers) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw Error("learning rate must be positive");
  if (epochs < 0) throw Error("epochs must be nonnegative");
  if (batch_size < 1) throw Error("batch size must be at least 1");
  if (!(plateau_factor > 0.0 && plateau_factor < 1.0)) throw Error("plateau factor must be in (0, 1)");
  if (plateau_patience < 1) throw Error("plateau patience must be at least 1");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0))
    throw Error("Adam betas must be in [0, 1)");
  if (!(adam.epsilon > 0.0)) throw Error("Adam epsilon must be positive");
  if (max_grad_norm < 0.0) throw Error("max gradient norm must be nonnegative");
}

double EvalResult::precision(std::size_t cls) const {
  std::int64_t col = 0;
  for (std::size_t t = 0; t < kNumProtocols; ++t) col += confusion[t][cls];
  return col == 0 ? std::numeric_limits<double>::quiet_NaN()
                  : static_cast<double>(confusion[cls][cls]) / static_cast<double>(col);
}

double EvalResult::recall(std::size_t cls) const {
  std::int64_t row = 0;
  for (std::size_t p = 0; p < kNumProtocols; ++p) row += confusion[cls][p];
  return row == 0 ? std::numeric_limits<double>::quiet_NaN()
                  : static_cast<double>(confusion[cls][cls]) / static_cast<double>(row);
}

EvalResult evaluate(const nn::ModelParams& params, std::span<const features::SequenceSample> samples,
                    unsigned threads) {
  if (samples.empty()) throw Error("cannot evaluate on an empty sample set");
  const std::size_t nf = params.config().input_size;
  for (const auto& s : samples)
    if (s.features.size() != s.length * nf)
      throw Error("sample " + s.source_id + " has " + std::to_string(s.features.size()) +
                  " values, expected length x " + std::to_string(nf));

  std::vector<double> losses(samples.size());
  std::vector<std::size_t> preds(samples.size());
  parallel_for(samples.size(), threads, [&](std::size_t i) {
    const auto fr = nn::forward(samples[i].features, samples[i].length, params, false, 0);
    losses[i] = nn::cross_entropy(fr.logits, index_of(samples[i].label));
    preds[i] = nn::argmax(fr.logits);
  });

  EvalResult r;
  r.total = samples.size();
  double loss = 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    loss += losses[i];
    const auto truth = static_cast<std::size_t>(index_of(samples[i].label));
    r.confusion[truth][preds[i]] += 1;
    if (truth == preds[i]) ++correct;
  }
  r.mean_loss = loss / static_cast<double>(r.total);
  r.accuracy = static_cast<double>(correct) / static_cast<double>(r.total);
  return r;
}

TrainResult train(const features::DatasetSplit& data, const nn::ModelConfig& model, const TrainConfig& config,
                  const TrainOptions& options) {
  config.validate();
  model.validate();
  if (data.train.empty()) throw Error("training split is empty");
  if (data.validation.empty()) throw Error("validation split is empty");
  const std::size_t seq_len = data.seq_len();
  if (model.input_size != features::kNumFeatures)
    throw Error("model input size " + std::to_string(model.input_size) + " does not match the dataset's " +
                std::to_string(features::kNumFeatures) + " features");

  Checkpoint current;
  current.normalization = data.normalization;
  current.seed = config.seed;
  current.seq_len = seq_len;

  TrainingState state;
  std::vector<EpochMetrics>& history = state.history;

  auto measure = [&](int epoch, double lr) {
    const auto tr = evaluate(current.params, data.train, config.threads);
    const auto va = evaluate(current.params, data.validation, config.threads);
    return EpochMetrics{epoch, tr.mean_loss, va.mean_loss, tr.accuracy, va.accuracy, lr};
  };

  if (options.resume) {
    const auto& r = *options.resume;
    if (!r.training) throw Error("checkpoint has no training state to resume from");
    require_config(r, model);
    if (r.seq_len != seq_len)
      throw Error("checkpoint sequence length " + std::to_string(r.seq_len) + " does not match dataset's " +
                  std::to_string(seq_len));
    if (r.normalization != data.normalization)
      throw Error("checkpoint normalization does not match the dataset (different split?)");
    if (r.seed != config.seed) throw Error("resume seed differs from the checkpoint's seed");
    current.params = r.params;
    state = *r.training;
  } else {
    current.params = nn::init_params(model, derive_seed(config.seed, kInitStream), options.head_init);
    state.optimizer = OptimizerState::fresh(current.params, config.learning_rate);
    history.push_back(measure(0, config.learning_rate));
    state.best_val_loss = std::numeric_limits<double>::infinity();
    state.best_epoch = 0;
    state.best_params = current.params;
    if (options.on_epoch) {
      current.training = state;
      options.on_epoch(history.back(), current);
    }
  }

  std::vector<std::size_t> order(data.train.size());
  std::vector<nn::Example> batch;
  for (int epoch = static_cast<int>(state.epochs_done) + 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng(derive_seed(config.seed, kShuffleStream, static_cast<std::uint64_t>(epoch)))
        .shuffle(std::span<std::size_t>(order));
    const std::uint64_t dropout_base = derive_seed(config.seed, kDropoutStream, static_cast<std::uint64_t>(epoch));

    for (std::size_t start = 0, b = 0; start < order.size(); start += config.batch_size, ++b) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      batch.clear();
      for (std::size_t i = start; i < end; ++i) {
        const auto& s = data.train[order[i]];
        batch.push_back(nn::Example{s.features, s.length, index_of(s.label)});
      }
      try {
        auto lg = nn::loss_and_grads(batch, current.params, true, derive_seed(dropout_base, b), config.threads);
        if (config.max_grad_norm > 0.0) clip_grad_norm(lg.grads, config.max_grad_norm);
        adam_step(current.params, lg.grads, state.optimizer, config.adam);
      } catch (const NumericError& e) {
        throw NumericError("epoch " + std::to_string(epoch) + " batch " + std::to_string(b) + ": " + e.what());
      }
    }

    auto m = measure(epoch, state.optimizer.lr);
    state.optimizer.lr = plateau_step(state.scheduler, m.val_loss, state.optimizer.lr, config.plateau_factor,
                                      config.plateau_patience);
    m.lr = state.optimizer.lr;
    history.push_back(m);
    state.epochs_done = static_cast<std::uint64_t>(epoch);
    if (m.val_loss < state.best_val_loss) {
      state.best_val_loss = m.val_loss;
      state.best_epoch = static_cast<std::uint64_t>(epoch);
      state.best_params = current.params;
    }
    if (options.on_epoch) {
      current.training = state;
      options.on_epoch(m, current);
    }
  }

  TrainResult result;
  result.history = history;
  result.best_checkpoint.params = state.best_params;
  result.best_checkpoint.normalization = current.normalization;
  result.best_checkpoint.seed = current.seed;
  result.best_checkpoint.seq_len = current.seq_len;
  current.training = std::move(state);
  result.final_checkpoint = std::move(current);
  return result;
}

std::string metrics_csv_header() {
  return std::string(kMetricsMagic) + "\n" + std::string(kMetricsHeader) + "\n";
}

std::string metrics_csv_row(const EpochMetrics& m) {
  return std::to_string(m.epoch) + "," + io::format_double(m.train_loss) + "," + io::format_double(m.val_loss) + "," +
         io::format_double(m.train_acc) + "," + io::format_double(m.val_acc) + "," + io::format_double(m.lr) + "\n";
}

std::string metrics_to_csv(std::span<const EpochMetrics> history) {
  std::string out = metrics_csv_header();
  for (const auto& m : history) out += metrics_csv_row(m);
  return out;
}

std::vector<EpochMetrics> metrics_from_csv(std::string_view text, std::string_view name) {
  auto fail = [&](std::size_t line, const std::string& msg) -> void {
    throw Error(std::string(name) + ":" + std::to_string(line) + ": " + msg);
  };
  std::vector<std::string_view> lines;
  for (auto l : io::split(text, '\n')) lines.push_back(io::trim(l));

  std::size_t i = 0;
  while (i < lines.size() && (lines[i].empty() || lines[i].starts_with("#"))) ++i;
  if (i == lines.size()) throw Error(std::string(name) + ": empty metrics file");

  static const char* const kCols[] = {"epoch", "train_loss", "val_loss", "train_acc", "val_acc", "lr"};
  const auto header = io::split(lines[i], ',');
  int idx[6];
  std::string missing;
  for (int c = 0; c < 6; ++c) {
    idx[c] = -1;
    for (std::size_t h = 0; h < header.size(); ++h)
      if (io::trim(header[h]) == kCols[c]) idx[c] = static_cast<int>(h);
    if (idx[c] < 0) missing += (missing.empty() ? "" : ", ") + std::string(kCols[c]);
  }
  if (!missing.empty()) fail(i + 1, "missing columns: " + missing);

  std::vector<EpochMetrics> out;
  for (++i; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto f = io::split(lines[i], ',');
    if (f.size() != header.size())
      fail(i + 1, "expected " + std::to_string(header.size()) + " fields, got " + std::to_string(f.size()));
    EpochMetrics m;
    std::int64_t epoch = 0;
    if (!io::parse_int64(io::trim(f[static_cast<std::size_t>(idx[0])]), epoch)) fail(i + 1, "bad epoch value");
    m.epoch = static_cast<int>(epoch);
    double* dst[] = {&m.train_loss, &m.val_loss, &m.train_acc, &m.val_acc, &m.lr};
    for (int c = 1; c < 6; ++c) {
      const auto s = io::trim(f[static_cast<std::size_t>(idx[c])]);
      if (!io::parse_double(s, *dst[c - 1])) fail(i + 1, std::string("bad ") + kCols[c] + " value '" + std::string(s) + "'");
    }
    out.push_back(m);
  }
  if (out.empty()) throw Error(std::string(name) + ": metrics file has no epochs");
  return out;
}

}  // namespace ccid::train
