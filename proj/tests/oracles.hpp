#pragma once

// Independent reference implementations used as test oracles. They read the
// same parameter layout as the library but share none of its code paths:
// plain loops, no Eigen, no traces.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "ccid/neural.hpp"

namespace oracle {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// One GRU step with row-major W (3H x I), U (3H x H), b (3H); gate blocks z, r, h.
inline std::vector<double> gru_step(const double* W, const double* U, const double* b, std::size_t I, std::size_t H,
                                    const std::vector<double>& x, const std::vector<double>& h) {
  std::vector<double> z(H), r(H), rh(H), c(H), out(H);
  for (std::size_t j = 0; j < H; ++j) {
    double az = b[j], ar = b[H + j];
    for (std::size_t i = 0; i < I; ++i) {
      az += W[j * I + i] * x[i];
      ar += W[(H + j) * I + i] * x[i];
    }
    for (std::size_t k = 0; k < H; ++k) {
      az += U[j * H + k] * h[k];
      ar += U[(H + j) * H + k] * h[k];
    }
    z[j] = sigmoid(az);
    r[j] = sigmoid(ar);
  }
  for (std::size_t k = 0; k < H; ++k) rh[k] = r[k] * h[k];
  for (std::size_t j = 0; j < H; ++j) {
    double ac = b[2 * H + j];
    for (std::size_t i = 0; i < I; ++i) ac += W[(2 * H + j) * I + i] * x[i];
    for (std::size_t k = 0; k < H; ++k) ac += U[(2 * H + j) * H + k] * rh[k];
    c[j] = std::tanh(ac);
    out[j] = (1.0 - z[j]) * h[j] + z[j] * c[j];
  }
  return out;
}

struct ModelOutput {
  std::vector<std::vector<double>> top;  // T x 2H
  std::vector<double> weights;
  std::vector<double> context;
  std::vector<double> logits;
};

/// Evaluation-mode forward pass of the full model.
inline ModelOutput model_forward(const ccid::nn::ModelParams& p, const std::vector<double>& seq, std::size_t T) {
  const auto& cfg = p.config();
  const std::size_t H = cfg.hidden_size;
  std::vector<std::vector<double>> in(T);
  for (std::size_t t = 0; t < T; ++t)
    in[t].assign(seq.begin() + static_cast<long>(t * cfg.input_size),
                 seq.begin() + static_cast<long>((t + 1) * cfg.input_size));

  for (std::size_t l = 0; l < cfg.num_layers; ++l) {
    const std::size_t I = in[0].size();
    std::vector<std::vector<double>> out(T, std::vector<double>(2 * H));
    for (std::size_t d = 0; d < 2; ++d) {
      const double* W = p.tensor(p.gru_w(l, d)).data();
      const double* U = p.tensor(p.gru_u(l, d)).data();
      const double* b = p.tensor(p.gru_b(l, d)).data();
      std::vector<double> h(H, 0.0);
      for (std::size_t k = 0; k < T; ++k) {
        const std::size_t t = d == 0 ? k : T - 1 - k;
        h = gru_step(W, U, b, I, H, in[t], h);
        for (std::size_t j = 0; j < H; ++j) out[t][d * H + j] = h[j];
      }
    }
    in = std::move(out);
  }

  ModelOutput o;
  o.top = in;
  const std::size_t A = cfg.attention_width();
  const double* Wa = p.tensor(p.attn_w()).data();
  const double* v = p.tensor(p.attn_v()).data();
  std::vector<double> e(T);
  for (std::size_t t = 0; t < T; ++t) {
    double s = 0.0;
    for (std::size_t a = 0; a < A; ++a) {
      double pre = 0.0;
      for (std::size_t k = 0; k < 2 * H; ++k) pre += Wa[a * 2 * H + k] * in[t][k];
      s += v[a] * std::tanh(pre);
    }
    e[t] = s;
  }
  const double m = *std::max_element(e.begin(), e.end());
  double z = 0.0;
  o.weights.resize(T);
  for (std::size_t t = 0; t < T; ++t) z += (o.weights[t] = std::exp(e[t] - m));
  for (auto& w : o.weights) w /= z;
  o.context.assign(2 * H, 0.0);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t k = 0; k < 2 * H; ++k) o.context[k] += o.weights[t] * in[t][k];
  const double* Wo = p.tensor(p.head_w()).data();
  const double* bo = p.tensor(p.head_b()).data();
  o.logits.assign(cfg.num_classes, 0.0);
  for (std::size_t c = 0; c < cfg.num_classes; ++c) {
    double s = bo[c];
    for (std::size_t k = 0; k < 2 * H; ++k) s += Wo[c * 2 * H + k] * o.context[k];
    o.logits[c] = s;
  }
  return o;
}

inline double model_loss(const ccid::nn::ModelParams& p, const std::vector<double>& seq, std::size_t T, int label) {
  const auto lg = model_forward(p, seq, T).logits;
  const double m = *std::max_element(lg.begin(), lg.end());
  double z = 0.0;
  for (double v : lg) z += std::exp(v - m);
  return -(lg[static_cast<std::size_t>(label)] - m - std::log(z));
}

/// Trailing mean by direct summation over each window.
inline std::vector<double> rolling_mean(const std::vector<double>& x, std::size_t w) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const std::size_t lo = i + 1 >= w ? i + 1 - w : 0;
    double s = 0.0;
    for (std::size_t j = lo; j <= i; ++j) s += x[j];
    out[i] = s / static_cast<double>(i - lo + 1);
  }
  return out;
}

/// Scalar Adam with constant settings.
struct ScalarAdam {
  double lr, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  double m = 0.0, v = 0.0;
  int t = 0;
  double step(double theta, double g) {
    ++t;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mh = m / (1 - std::pow(b1, t));
    const double vh = v / (1 - std::pow(b2, t));
    return theta - lr * mh / (std::sqrt(vh) + eps);
  }
};

/// Reno congestion avoidance with the per-ack counter rule: one packet of
/// growth after every cwnd acknowledgements.
inline double reno_ca_per_ack(double cwnd, long acks) {
  long counter = 0;
  for (long a = 0; a < acks; ++a) {
    if (++counter >= static_cast<long>(cwnd)) {
      cwnd += 1.0;
      counter = 0;
    }
  }
  return cwnd;
}

/// Startup plateau detector: counts consecutive samples that fail to grow the
/// running best by 25%.
inline bool startup_plateaued(const std::vector<double>& bw, int rounds = 3, double growth = 1.25) {
  double best = 0.0;
  int stalled = 0;
  for (double s : bw) {
    const double filtered = std::max(best, s);
    if (filtered >= best * growth) {
      best = filtered;
      stalled = 0;
    } else if (++stalled >= rounds) {
      return true;
    }
  }
  return false;
}

}  // namespace oracle
