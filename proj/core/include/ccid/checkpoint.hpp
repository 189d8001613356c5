#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ccid/feature_pipeline.hpp"
#include "ccid/neural.hpp"
#include "ccid/optim.hpp"

namespace ccid::train {

struct EpochMetrics {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double train_acc = 0.0;
  double val_acc = 0.0;
  double lr = 0.0;  // after this epoch's scheduler step

  bool operator==(const EpochMetrics&) const = default;
};

/// Everything needed to continue a run exactly where it stopped.
struct TrainingState {
  OptimizerState optimizer;
  PlateauState scheduler;
  std::uint64_t epochs_done = 0;
  double best_val_loss = 0.0;
  std::uint64_t best_epoch = 0;
  nn::ModelParams best_params;
  std::vector<EpochMetrics> history;

  bool operator==(const TrainingState&) const = default;
};

struct Checkpoint {
  nn::ModelParams params;
  features::FeatureStats normalization;
  std::uint64_t seed = 0;
  std::uint64_t seq_len = 0;
  std::optional<TrainingState> training;

  const nn::ModelConfig& config() const { return params.config(); }
  bool operator==(const Checkpoint&) const = default;
};

/// Binary checkpoint, little-endian:
///
///   "CCIDCKPT" u32 version=1
///   u64 input, hidden, layers, attention, classes; f64 dropout
///   u64 seed, u64 seq_len, f64[5] mean, f64[5] stddev
///   u64 n + f64[n] parameters (tensor order of ModelParams, row-major)
///   u8 has_training, then if set:
///     u64 t, f64 lr, u64 n + f64[n] m, u64 n + f64[n] v,
///     f64 plateau best, u64 plateau stalled,
///     u64 epochs_done, f64 best_val_loss, u64 best_epoch,
///     u64 n + f64[n] best parameters,
///     u64 n_epochs + per epoch: u64 epoch, f64 train_loss, val_loss,
///     train_acc, val_acc, lr
inline constexpr std::string_view kCheckpointMagic = "CCIDCKPT";
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::string_view bytes, std::string_view name = "checkpoint");

void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Throws unless `ckpt` was built for `expected` (all architecture fields).
void require_config(const Checkpoint& ckpt, const nn::ModelConfig& expected);

}  // namespace ccid::train
