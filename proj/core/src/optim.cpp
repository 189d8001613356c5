#include "ccid/optim.hpp"

#include <cmath>

#include "ccid/error.hpp"

namespace ccid::train {

OptimizerState OptimizerState::fresh(const nn::ModelParams& params, double lr) {
  OptimizerState s;
  s.m.assign(params.size(), 0.0);
  s.v.assign(params.size(), 0.0);
  s.lr = lr;
  return s;
}

void adam_step(nn::ModelParams& params, const nn::ModelParams& grads, OptimizerState& state,
               const AdamConfig& config) {
  if (grads.size() != params.size()) throw Error("gradient size does not match parameters");
  if (state.m.size() != params.size() || state.v.size() != params.size())
    throw Error("optimizer state size does not match parameters");

  for (std::size_t i = 0; i < grads.tensors().size(); ++i)
    for (double g : grads.tensor(i))
      if (!std::isfinite(g)) throw NumericError("non-finite gradient in tensor " + grads.tensors()[i].name);

  state.t += 1;
  const double t = static_cast<double>(state.t);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  auto theta = params.data();
  auto g = grads.data();
  for (std::size_t i = 0; i < theta.size(); ++i) {
    state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * g[i];
    state.v[i] = config.beta2 * state.v[i] + (1.0 - config.beta2) * g[i] * g[i];
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    theta[i] -= state.lr * m_hat / (std::sqrt(v_hat) + config.epsilon);
  }
}

double clip_grad_norm(nn::ModelParams& grads, double max_norm) {
  double sq = 0.0;
  for (double g : grads.data()) sq += g * g;
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double scale = max_norm / norm;
    for (double& g : grads.data()) g *= scale;
  }
  return norm;
}

double plateau_step(PlateauState& state, double val_loss, double lr, double factor, int patience) {
  if (val_loss < state.best - kPlateauThreshold) {
    state.best = val_loss;
    state.stalled = 0;
    return lr;
  }
  state.stalled += 1;
  if (state.stalled >= patience) {
    state.stalled = 0;
    return lr * factor;
  }
  return lr;
}

double plateau_schedule(std::span<const double> history, double initial_lr, double factor, int patience) {
  if (history.empty()) throw Error("plateau schedule needs at least one validation loss");
  PlateauState s;
  double lr = initial_lr;
  for (double v : history) lr = plateau_step(s, v, lr, factor, patience);
  return lr;
}

}  // namespace ccid::train
