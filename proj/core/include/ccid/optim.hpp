#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "ccid/neural.hpp"

namespace ccid::train {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam moments share the flat layout of ModelParams.
struct OptimizerState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t t = 0;
  double lr = 7.5e-5;

  static OptimizerState fresh(const nn::ModelParams& params, double lr);
  bool operator==(const OptimizerState&) const = default;
};

/// t <- t+1, bias-corrected moment update, theta -= lr * m_hat / (sqrt(v_hat) + eps).
/// Throws NumericError naming the first tensor holding a non-finite gradient;
/// params and state are untouched in that case.
void adam_step(nn::ModelParams& params, const nn::ModelParams& grads, OptimizerState& state,
               const AdamConfig& config = {});

/// Rescales grads so their global L2 norm is at most max_norm. Returns the
/// norm before clipping.
double clip_grad_norm(nn::ModelParams& grads, double max_norm);

/// Reduce-on-plateau in min mode: an epoch improves when its loss is below the
/// best so far by more than 1e-8. After `patience` consecutive epochs without
/// improvement lr is multiplied by `factor` and the stall counter resets. No
/// cooldown, no minimum lr.
struct PlateauState {
  double best = std::numeric_limits<double>::infinity();
  int stalled = 0;
  bool operator==(const PlateauState&) const = default;
};

inline constexpr double kPlateauThreshold = 1e-8;

double plateau_step(PlateauState& state, double val_loss, double lr, double factor, int patience);

/// Folds plateau_step over a whole history and returns the final lr.
double plateau_schedule(std::span<const double> history, double initial_lr, double factor, int patience);

}  // namespace ccid::train
