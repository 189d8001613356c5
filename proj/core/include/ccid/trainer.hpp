#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ccid/checkpoint.hpp"
#include "ccid/feature_pipeline.hpp"
#include "ccid/neural.hpp"
#include "ccid/optim.hpp"

namespace ccid::train {

struct TrainConfig {
  double learning_rate = 7.5e-5;
  AdamConfig adam;
  int epochs = 30;
  std::size_t batch_size = 8;
  double plateau_factor = 0.5;
  int plateau_patience = 5;
  std::uint64_t seed = 0;
  /// Worker threads for per-sample forward/backward; results do not depend on it.
  unsigned threads = 1;
  /// Global gradient-norm clip; 0 disables.
  double max_grad_norm = 0.0;

  void validate() const;
};

using Confusion = std::array<std::array<std::int64_t, kNumProtocols>, kNumProtocols>;

struct EvalResult {
  double accuracy = 0.0;
  double mean_loss = 0.0;
  std::size_t total = 0;
  Confusion confusion{};  // [true][predicted]

  /// NaN when the class was never predicted / never present.
  double precision(std::size_t cls) const;
  double recall(std::size_t cls) const;
};

/// Evaluation-mode pass; never modifies `params`. Throws on an empty set or a
/// sequence shape that does not match the model.
EvalResult evaluate(const nn::ModelParams& params, std::span<const features::SequenceSample> samples,
                    unsigned threads = 1);

using EpochCallback = std::function<void(const EpochMetrics&, const Checkpoint& current)>;

struct TrainOptions {
  nn::HeadInit head_init = nn::HeadInit::Uniform;
  /// Continue from a checkpoint carrying training state.
  const Checkpoint* resume = nullptr;
  /// Called after the pre-training evaluation (epoch 0) and after every epoch.
  EpochCallback on_epoch;
};

struct TrainResult {
  Checkpoint final_checkpoint;  // includes training state
  Checkpoint best_checkpoint;   // lowest validation loss, parameters only
  /// history[0] is the pre-training evaluation (epoch 0); history[k] is epoch k.
  std::vector<EpochMetrics> history;
};

/// Seeds: parameters from derive_seed(seed, 1), epoch shuffle from
/// derive_seed(seed, 2, epoch), dropout for batch b of an epoch from
/// derive_seed(derive_seed(seed, 3, epoch), b).
TrainResult train(const features::DatasetSplit& data, const nn::ModelConfig& model, const TrainConfig& config,
                  const TrainOptions& options = {});

/// Metrics log: magic line, header, one full-precision row per epoch.
inline constexpr std::string_view kMetricsMagic = "# ccid-metrics v1";
inline constexpr std::string_view kMetricsHeader = "epoch,train_loss,val_loss,train_acc,val_acc,lr";

std::string metrics_csv_header();
std::string metrics_csv_row(const EpochMetrics& m);
std::string metrics_to_csv(std::span<const EpochMetrics> history);
/// Accepts the columns in any order; names every missing column on error.
std::vector<EpochMetrics> metrics_from_csv(std::string_view text, std::string_view name);

}  // namespace ccid::train
