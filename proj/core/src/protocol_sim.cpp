#include "ccid/protocol_sim.hpp"

#include <algorithm>
#include <cmath>

#include "ccid/error.hpp"
#include "ccid/rng.hpp"

namespace ccid {

void LinkConfig::validate() const {
  if (!(capacity_bits_per_s > 0.0) || !std::isfinite(capacity_bits_per_s))
    throw Error("link capacity must be positive");
  if (!(base_rtt_s > 0.0) || !std::isfinite(base_rtt_s))
    throw Error("link base RTT must be positive");
  if (buffer_pkts < 1) throw Error("link buffer must hold at least one packet");
  if (mss_bytes < 1) throw Error("MSS must be positive");
}

std::int64_t FlowTrace::total_bytes() const {
  std::int64_t total = 0;
  for (const auto& r : records) total += r.size_bytes;
  return total;
}

}  // namespace ccid

namespace ccid::sim {

namespace {
constexpr double kMinWindowPkts = 2.0;
}

RenoState step_reno(RenoState s, double acks, bool loss) {
  if (loss) {
    s.ssthresh_pkts = std::max(kMinWindowPkts, s.cwnd_pkts / 2.0);
    s.cwnd_pkts = s.ssthresh_pkts;
    s.phase = RenoPhase::CongestionAvoidance;
    return s;
  }
  if (acks <= 0.0) return s;

  if (s.phase == RenoPhase::FastRecovery) {
    // A new ack ends recovery; the window deflates to ssthresh.
    s.cwnd_pkts = s.ssthresh_pkts;
    s.phase = RenoPhase::CongestionAvoidance;
    return s;
  }
  if (s.phase == RenoPhase::SlowStart) {
    const double room = s.ssthresh_pkts - s.cwnd_pkts;
    if (acks < room) {
      s.cwnd_pkts += acks;
      return s;
    }
    s.cwnd_pkts = s.ssthresh_pkts;
    s.phase = RenoPhase::CongestionAvoidance;
    acks -= room;
    if (acks <= 0.0) return s;
  }
  s.cwnd_pkts += acks / s.cwnd_pkts;
  return s;
}

double cubic_k(double w_max_pkts, double beta, double c_scale) {
  return std::cbrt(w_max_pkts * (1.0 - beta) / c_scale);
}

CubicState make_cubic_state(double w_max_pkts, double beta, double c_scale) {
  CubicState s;
  s.w_max_pkts = w_max_pkts;
  s.beta_cubic = beta;
  s.c_scale = c_scale;
  s.k_s = cubic_k(w_max_pkts, beta, c_scale);
  s.t_since_reduction_s = 0.0;
  s.cwnd_pkts = std::max(kMinWindowPkts, beta * w_max_pkts);
  s.ssthresh_pkts = s.cwnd_pkts;
  s.slow_start = false;
  s.w_est_pkts = s.cwnd_pkts;
  return s;
}

double cubic_window(const CubicState& s, double t_s) {
  const double d = t_s - s.k_s;
  return std::max(kMinWindowPkts, s.c_scale * d * d * d + s.w_max_pkts);
}

CubicState step_cubic(CubicState s, double acks, double elapsed_s, double rtt_s, bool loss,
                      const CubicParams& params) {
  if (loss) {
    CubicState next = make_cubic_state(s.cwnd_pkts, params.beta, params.c_scale);
    return next;
  }
  if (acks <= 0.0) {
    s.t_since_reduction_s += elapsed_s;
    return s;
  }
  if (s.slow_start) {
    const double room = s.ssthresh_pkts - s.cwnd_pkts;
    if (acks < room) {
      s.cwnd_pkts += acks;
      return s;
    }
    // Reaching ssthresh without a loss: anchor the curve at the current window.
    return make_cubic_state(s.ssthresh_pkts / params.beta, params.beta, params.c_scale);
  }

  s.t_since_reduction_s += elapsed_s;
  double target = cubic_window(s, s.t_since_reduction_s + rtt_s);
  if (params.tcp_friendly) {
    const double aimd = 3.0 * (1.0 - s.beta_cubic) / (1.0 + s.beta_cubic);
    s.w_est_pkts += aimd * acks / s.cwnd_pkts;
    target = std::max(target, s.w_est_pkts);
  }
  s.cwnd_pkts = std::max(kMinWindowPkts, target);
  return s;
}

double vegas_diff(double cwnd_pkts, double base_rtt_s, double rtt_s) {
  return cwnd_pkts * (1.0 - base_rtt_s / rtt_s);
}

VegasState step_vegas(VegasState s, double rtt_s) {
  s.base_rtt_s = std::min(s.base_rtt_s, rtt_s);
  const double diff = vegas_diff(s.cwnd_pkts, s.base_rtt_s, rtt_s);

  if (s.slow_start) {
    if (diff > s.gamma_pkts) {
      s.slow_start = false;
      // Leave slow start at the window the path actually sustains.
      s.cwnd_pkts = std::max(kMinWindowPkts, s.cwnd_pkts * s.base_rtt_s / rtt_s + 1.0);
    } else {
      s.cwnd_pkts *= 2.0;
    }
    return s;
  }

  if (diff < s.alpha_pkts) {
    s.cwnd_pkts += 1.0;
  } else if (diff > s.beta_pkts) {
    s.cwnd_pkts = std::max(kMinWindowPkts, s.cwnd_pkts - 1.0);
  }
  return s;
}

VegasState on_vegas_loss(VegasState s) {
  s.cwnd_pkts = std::max(kMinWindowPkts, s.cwnd_pkts / 2.0);
  s.slow_start = false;
  return s;
}

BbrState make_bbr_state(const BbrParams& p) {
  BbrState s;
  s.pacing_gain = p.high_gain;
  s.cwnd_gain = p.cwnd_gain;
  s.cwnd_pkts = p.initial_cwnd_pkts;
  return s;
}

double bbr_cwnd_cap_pkts(const BbrState& s, std::int64_t mss_bytes) {
  return s.cwnd_gain * (s.btl_bw_bits_per_s * s.rt_prop_s / 8.0) / static_cast<double>(mss_bytes);
}

double bbr_pacing_rate(const BbrState& s) {
  if (s.btl_bw_bits_per_s <= 0.0) return std::numeric_limits<double>::infinity();
  return s.pacing_gain * s.btl_bw_bits_per_s;
}

namespace {

double bw_filter_max(const BbrState& s) {
  double m = 0.0;
  for (std::size_t i = 0; i < s.bw_count; ++i) m = std::max(m, s.bw_samples[i]);
  return m;
}

void enter_probe_bw(BbrState& s, const BbrParams& p, double now) {
  s.phase = BbrPhase::ProbeBW;
  s.cycle_index = 0;
  s.cycle_stamp_s = now;
  s.pacing_gain = p.cycle_gains[0];
}

}  // namespace

BbrState step_bbr(BbrState s, const BbrSample& in, const BbrParams& p) {
  ++s.round;

  // Bandwidth: max over the last N round samples.
  s.bw_samples[s.bw_head] = std::max(0.0, in.delivered_bits_per_s);
  s.bw_head = (s.bw_head + 1) % kBbrBwWindowRounds;
  s.bw_count = std::min(s.bw_count + 1, kBbrBwWindowRounds);
  s.btl_bw_bits_per_s = bw_filter_max(s);

  // Propagation delay: min over a time window; a stale estimate is replaced
  // and triggers ProbeRTT.
  const bool rt_prop_expired = s.round > 1 && in.now_s - s.rt_prop_stamp_s > p.rt_prop_window_s;
  if (in.rtt_s > 0.0 && (in.rtt_s <= s.rt_prop_s || rt_prop_expired)) {
    s.rt_prop_s = in.rtt_s;
    s.rt_prop_stamp_s = in.now_s;
  }

  const double bdp_pkts = bbr_cwnd_cap_pkts(s, p.mss_bytes) / s.cwnd_gain;

  switch (s.phase) {
    case BbrPhase::Startup:
      if (!s.filled_pipe) {
        if (s.btl_bw_bits_per_s >= s.full_bw_bits_per_s * p.startup_growth) {
          s.full_bw_bits_per_s = s.btl_bw_bits_per_s;
          s.plateau_rounds = 0;
        } else {
          ++s.plateau_rounds;
          if (s.plateau_rounds >= p.plateau_rounds) s.filled_pipe = true;
        }
      }
      if (s.filled_pipe) {
        s.phase = BbrPhase::Drain;
        s.pacing_gain = 1.0 / p.high_gain;
      }
      break;
    case BbrPhase::Drain:
      if (in.inflight_pkts <= bdp_pkts) enter_probe_bw(s, p, in.now_s);
      break;
    case BbrPhase::ProbeBW:
      if (in.now_s - s.cycle_stamp_s >= s.rt_prop_s) {
        s.cycle_index = (s.cycle_index + 1) % static_cast<int>(kBbrCycleLength);
        s.cycle_stamp_s = in.now_s;
        s.pacing_gain = p.cycle_gains[static_cast<std::size_t>(s.cycle_index)];
      }
      break;
    case BbrPhase::ProbeRTT:
      if (in.now_s >= s.probe_rtt_done_s) {
        s.rt_prop_stamp_s = in.now_s;
        if (s.filled_pipe) {
          enter_probe_bw(s, p, in.now_s);
        } else {
          s.phase = BbrPhase::Startup;
          s.pacing_gain = p.high_gain;
        }
      }
      break;
  }

  if (rt_prop_expired && s.phase != BbrPhase::ProbeRTT) {
    s.phase = BbrPhase::ProbeRTT;
    s.pacing_gain = 1.0;
    s.probe_rtt_done_s = in.now_s + p.probe_rtt_duration_s;
  }

  if (s.btl_bw_bits_per_s > 0.0) {
    const double cap = bbr_cwnd_cap_pkts(s, p.mss_bytes);
    const double want = s.phase == BbrPhase::ProbeRTT ? std::min(p.probe_rtt_cwnd_pkts, cap) : cap;
    s.cwnd_pkts = std::max(1.0, want);
  }
  return s;
}

// ---------------------------------------------------------------------------

namespace {

/// Accumulates per-round quantities into fixed-width sample intervals.
class IntervalSampler {
 public:
  IntervalSampler(double interval_s, std::int64_t mss_bytes, double base_rtt_s,
                  std::vector<FeatureRecord>& out)
      : interval_(interval_s), mss_(mss_bytes), base_rtt_(base_rtt_s), out_(out) {}

  /// Adds a round spanning [t0, t0 + dur) which delivered `bytes` with
  /// window `cwnd_pkts` and RTT `rtt_s`.
  void add_round(double t0, double dur, double bytes, double cwnd_pkts, double rtt_s) {
    const double t1 = t0 + dur;
    const auto win_bytes = static_cast<std::int64_t>(std::llround(cwnd_pkts * static_cast<double>(mss_)));
    double t = t0;
    while (t < t1) {
      const double boundary = static_cast<double>(index_ + 1) * interval_;
      const double end = std::min(t1, boundary);
      const double overlap = end - t;
      if (overlap > 0.0) {
        cum_bytes_ += bytes * (overlap / dur);
        excess_weighted_ += (rtt_s - base_rtt_) * overlap;
        covered_ += overlap;
        max_win_ = std::max(max_win_, win_bytes);
      }
      if (end >= boundary) {
        emit();
      }
      t = end;
    }
  }

  /// Closes the last (possibly partial) interval with the exact total.
  void finish(double final_total_bytes) {
    cum_bytes_ = final_total_bytes;
    if (covered_ > 0.0) emit();
  }

 private:
  void emit() {
    FeatureRecord r;
    r.time_s = static_cast<double>(index_) * interval_;
    const auto cum_floor = static_cast<std::int64_t>(std::floor(cum_bytes_));
    r.size_bytes = cum_floor - emitted_bytes_;
    emitted_bytes_ = cum_floor;
    r.max_win_bytes = max_win_;
    r.throughput_mbps = static_cast<double>(r.size_bytes) * 8.0 / interval_ / 1e6;
    const double mean_excess = covered_ > 0.0 ? excess_weighted_ / covered_ : 0.0;
    r.rtt_ms = (base_rtt_ + std::max(0.0, mean_excess)) * 1000.0;
    out_.push_back(r);
    ++index_;
    excess_weighted_ = 0.0;
    covered_ = 0.0;
    max_win_ = 0;
  }

  double interval_;
  std::int64_t mss_;
  double base_rtt_;
  std::vector<FeatureRecord>& out_;
  std::int64_t index_ = 0;
  double cum_bytes_ = 0.0;
  std::int64_t emitted_bytes_ = 0;
  double excess_weighted_ = 0.0;
  double covered_ = 0.0;
  std::int64_t max_win_ = 0;
};

/// Uniform interface over the four window controllers.
class Controller {
 public:
  Controller(ProtocolLabel label, const SimConfig& cfg, std::int64_t mss)
      : label_(label), cfg_(cfg) {
    reno_.cwnd_pkts = cfg.initial_cwnd_pkts;
    cubic_.cwnd_pkts = cfg.initial_cwnd_pkts;
    cubic_.c_scale = cfg.cubic.c_scale;
    cubic_.beta_cubic = cfg.cubic.beta;
    vegas_.cwnd_pkts = cfg.initial_cwnd_pkts;
    vegas_.alpha_pkts = cfg.vegas_alpha_pkts;
    vegas_.beta_pkts = cfg.vegas_beta_pkts;
    vegas_.slow_start = true;
    bbr_params_ = cfg.bbr;
    bbr_params_.mss_bytes = mss;
    bbr_params_.initial_cwnd_pkts = cfg.initial_cwnd_pkts;
    bbr_ = make_bbr_state(bbr_params_);
  }

  double cwnd_pkts() const {
    switch (label_) {
      case ProtocolLabel::Reno: return reno_.cwnd_pkts;
      case ProtocolLabel::Cubic: return cubic_.cwnd_pkts;
      case ProtocolLabel::Vegas: return vegas_.cwnd_pkts;
      case ProtocolLabel::Bbr: return bbr_.cwnd_pkts;
    }
    return 1.0;
  }

  double pacing_bits_per_s() const {
    return label_ == ProtocolLabel::Bbr ? bbr_pacing_rate(bbr_)
                                        : std::numeric_limits<double>::infinity();
  }

  void on_round(double acks, bool loss, double rtt_s, double now_s, double delivery_bps,
                double inflight_pkts) {
    switch (label_) {
      case ProtocolLabel::Reno:
        reno_ = step_reno(reno_, acks, loss);
        break;
      case ProtocolLabel::Cubic:
        cubic_ = step_cubic(cubic_, acks, rtt_s, rtt_s, loss, cfg_.cubic);
        break;
      case ProtocolLabel::Vegas:
        vegas_ = loss ? on_vegas_loss(vegas_) : step_vegas(vegas_, rtt_s);
        break;
      case ProtocolLabel::Bbr:
        // BBRv1 does not react to loss.
        bbr_ = step_bbr(bbr_, BbrSample{delivery_bps, rtt_s, now_s, inflight_pkts}, bbr_params_);
        break;
    }
  }

 private:
  ProtocolLabel label_;
  SimConfig cfg_;
  RenoState reno_;
  CubicState cubic_;
  VegasState vegas_;
  BbrParams bbr_params_;
  BbrState bbr_;
};

}  // namespace

FlowTrace simulate_flow(ProtocolLabel label, const LinkConfig& link, std::int64_t transfer_bytes,
                        double sample_interval_s, const SimConfig& cfg) {
  if (transfer_bytes <= 0) throw Error("transfer size must be positive");
  if (!(sample_interval_s > 0.0) || !std::isfinite(sample_interval_s))
    throw Error("sample interval must be positive");
  link.validate();
  if (cfg.link_jitter < 0.0 || cfg.link_jitter >= 0.5) throw Error("link jitter must be in [0, 0.5)");
  if (cfg.random_loss_rate < 0.0 || cfg.random_loss_rate >= 1.0)
    throw Error("random loss rate must be in [0, 1)");
  if (cfg.delay_noise_ratio < 0.0) throw Error("delay noise ratio must be nonnegative");

  Rng rng(link.seed);
  const double j = cfg.link_jitter;
  const double capacity = link.capacity_bits_per_s * (1.0 - rng.uniform(0.0, 2.0 * j));
  const double base_rtt = link.base_rtt_s * (1.0 + rng.uniform(0.0, 2.0 * j));
  const double mss_bits = static_cast<double>(link.mss_bytes) * 8.0;
  const double buffer_bits = link.buffer_bits();
  const double transfer_bits = static_cast<double>(transfer_bytes) * 8.0;

  FlowTrace trace;
  trace.label = label;
  trace.link = link;
  trace.transfer_bytes = transfer_bytes;
  trace.sample_interval_s = sample_interval_s;

  IntervalSampler sampler(sample_interval_s, link.mss_bytes, base_rtt, trace.records);
  Controller cc(label, cfg, link.mss_bytes);

  double now = 0.0;
  double queue_bits = 0.0;
  double accepted_bits = 0.0;  // sent and not dropped
  double delivered_bits = 0.0;

  // Sub-bit residue from floating-point accumulation counts as done.
  constexpr double kBitSlack = 0.5;
  while (delivered_bits < transfer_bits - kBitSlack && now < cfg.wall_clock_cap_s) {
    const double noise = cfg.delay_noise_ratio > 0.0 ? rng.exponential(cfg.delay_noise_ratio * base_rtt) : 0.0;
    const double rtt = base_rtt + queue_bits / capacity + noise;
    const double cwnd = cc.cwnd_pkts();

    double remaining = transfer_bits - accepted_bits;
    if (remaining < kBitSlack) remaining = 0.0;
    double sent = std::min({cwnd * mss_bits, cc.pacing_bits_per_s() * rtt, remaining});
    sent = std::max(0.0, sent);

    double next_queue = queue_bits + sent - capacity * rtt;
    double dropped = 0.0;
    if (next_queue > buffer_bits) {
      dropped = next_queue - buffer_bits;
      next_queue = buffer_bits;
    }
    next_queue = std::max(0.0, next_queue);
    double delivered = queue_bits + sent - next_queue - dropped;
    delivered = std::clamp(delivered, 0.0, capacity * rtt);

    bool loss = dropped > 0.0;
    double lost_downstream = 0.0;
    if (cfg.random_loss_rate > 0.0 && sent > 0.0) {
      const double pkts = sent / mss_bits;
      const double p_any = 1.0 - std::pow(1.0 - cfg.random_loss_rate, pkts);
      if (rng.bernoulli(p_any)) {
        loss = true;
        // One packet is lost past the bottleneck and must be resent.
        lost_downstream = std::min(mss_bits, delivered);
        delivered -= lost_downstream;
      }
    }

    accepted_bits += sent - dropped - lost_downstream;
    if (delivered_bits + delivered > transfer_bits) delivered = transfer_bits - delivered_bits;
    delivered_bits += delivered;

    sampler.add_round(now, rtt, delivered / 8.0, cwnd, rtt);
    now += rtt;
    queue_bits = next_queue;

    const double delivered_pkts = delivered / mss_bits;
    const double inflight_pkts = (queue_bits + sent * (base_rtt / rtt)) / mss_bits;
    cc.on_round(delivered_pkts, loss, rtt, now, delivered / rtt, inflight_pkts);
  }

  trace.completed = delivered_bits >= transfer_bits - kBitSlack;
  sampler.finish(trace.completed ? static_cast<double>(transfer_bytes) : delivered_bits / 8.0);
  return trace;
}

}  // namespace ccid::sim
