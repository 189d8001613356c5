#pragma once

#include <array>
#include <cstdint>
#include <limits>

#include "ccid/protocol.hpp"
#include "ccid/trace.hpp"

/// Fluid-model congestion-control simulation.
///
/// The window of each protocol evolves once per simulated round trip against a
/// single droptail bottleneck. Round-trip time is the flow's propagation delay
/// plus queueing delay plus an optional per-round delay-noise term; the sender
/// delivers min(cwnd / RTT, pacing rate) into the queue, which drains at link
/// capacity. Rounds are aggregated into fixed wall-clock sample intervals.
namespace ccid::sim {

inline constexpr double kInfinitePkts = std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// Reno

enum class RenoPhase { SlowStart, CongestionAvoidance, FastRecovery };

struct RenoState {
  double cwnd_pkts = 10.0;
  double ssthresh_pkts = kInfinitePkts;
  RenoPhase phase = RenoPhase::SlowStart;
};

/// One round of Reno. `acks` is the number of packets acknowledged. Congestion
/// avoidance adds acks / cwnd (the pre-step window), which is the per-ack
/// counter rule: exactly +1 packet after a full window of acks.
RenoState step_reno(RenoState state, double acks, bool loss);

// ---------------------------------------------------------------------------
// Cubic

struct CubicParams {
  double c_scale = 0.4;
  double beta = 0.7;
  /// Never grow slower than an AIMD flow with the same backoff.
  bool tcp_friendly = false;
};

struct CubicState {
  double w_max_pkts = 0.0;
  double t_since_reduction_s = 0.0;
  double k_s = 0.0;
  double c_scale = 0.4;
  double beta_cubic = 0.7;
  double cwnd_pkts = 10.0;
  double ssthresh_pkts = kInfinitePkts;
  bool slow_start = true;
  /// Reno-equivalent window estimate for the TCP-friendly region.
  double w_est_pkts = 0.0;
};

/// Inflection time: cbrt(w_max * (1 - beta) / c).
double cubic_k(double w_max_pkts, double beta, double c_scale);

/// Congestion-avoidance state anchored at `w_max_pkts`, as right after a
/// reduction (t = 0, cwnd = beta * w_max).
CubicState make_cubic_state(double w_max_pkts, double beta, double c_scale);

/// c * (t - k)^3 + w_max, floored at 2 packets.
double cubic_window(const CubicState& state, double t_s);

/// One round: `elapsed_s` is the round duration, `rtt_s` the measured RTT.
CubicState step_cubic(CubicState state, double acks, double elapsed_s, double rtt_s, bool loss,
                      const CubicParams& params = {});

// ---------------------------------------------------------------------------
// Vegas

struct VegasState {
  double cwnd_pkts = 10.0;
  double base_rtt_s = std::numeric_limits<double>::infinity();
  double alpha_pkts = 2.0;
  double beta_pkts = 4.0;
  /// Slow-start exit threshold (packets of queue).
  double gamma_pkts = 1.0;
  bool slow_start = false;
};

/// Expected-minus-actual backlog in packets: cwnd * (1 - base_rtt / rtt).
double vegas_diff(double cwnd_pkts, double base_rtt_s, double rtt_s);

/// One round of Vegas given the round's RTT sample. Base RTT is updated
/// first, then the window moves by at most one packet.
VegasState step_vegas(VegasState state, double rtt_s);

/// Loss response (Reno-style halving, floored at 2 packets).
VegasState on_vegas_loss(VegasState state);

// ---------------------------------------------------------------------------
// BBR (v1)

enum class BbrPhase { Startup, Drain, ProbeBW, ProbeRTT };

inline constexpr std::size_t kBbrCycleLength = 8;
inline constexpr std::size_t kBbrBwWindowRounds = 10;

struct BbrParams {
  double high_gain = 2.885;
  double cwnd_gain = 3.0;
  double startup_growth = 1.25;
  int plateau_rounds = 3;
  double rt_prop_window_s = 10.0;
  double probe_rtt_duration_s = 0.2;
  double probe_rtt_cwnd_pkts = 4.0;
  double initial_cwnd_pkts = 10.0;
  std::int64_t mss_bytes = 1460;
  std::array<double, kBbrCycleLength> cycle_gains = {1.25, 0.75, 1, 1, 1, 1, 1, 1};
};

struct BbrState {
  BbrPhase phase = BbrPhase::Startup;
  double btl_bw_bits_per_s = 0.0;
  double rt_prop_s = std::numeric_limits<double>::infinity();
  double pacing_gain = 2.885;
  double cwnd_gain = 3.0;
  int cycle_index = 0;
  int plateau_rounds = 0;
  double cwnd_pkts = 10.0;

  // Windowed max filter over the last kBbrBwWindowRounds delivery samples.
  std::array<double, kBbrBwWindowRounds> bw_samples{};
  std::size_t bw_count = 0;
  std::size_t bw_head = 0;

  double full_bw_bits_per_s = 0.0;
  bool filled_pipe = false;
  double rt_prop_stamp_s = 0.0;
  double cycle_stamp_s = 0.0;
  double probe_rtt_done_s = 0.0;
  std::uint64_t round = 0;
};

struct BbrSample {
  double delivered_bits_per_s = 0.0;
  double rtt_s = 0.0;
  double now_s = 0.0;
  /// Data outstanding at the end of the round, in packets.
  double inflight_pkts = 0.0;
};

BbrState make_bbr_state(const BbrParams& params = {});

/// BDP-based window cap in packets: cwnd_gain * btl_bw * rt_prop / 8 / mss.
double bbr_cwnd_cap_pkts(const BbrState& state, std::int64_t mss_bytes);

/// Pacing rate in bits/s; infinite before the first bandwidth sample.
double bbr_pacing_rate(const BbrState& state);

BbrState step_bbr(BbrState state, const BbrSample& sample, const BbrParams& params = {});

// ---------------------------------------------------------------------------
// Flow simulation

struct SimConfig {
  /// Stop after this much simulated time even if the transfer is unfinished.
  double wall_clock_cap_s = 600.0;
  /// Independent per-packet loss probability on top of droptail overflow.
  double random_loss_rate = 0.0;
  /// Per-flow link jitter. Capacity is scaled by U[1 - 2j, 1] and the
  /// propagation delay by U[1, 1 + 2j], so the configured link remains a hard
  /// bound on rate and a floor on RTT.
  double link_jitter = 0.05;
  /// Mean of the exponential per-round extra delay, as a fraction of the
  /// flow's propagation delay (host and ACK-path delay variation).
  double delay_noise_ratio = 0.5;
  double initial_cwnd_pkts = 10.0;
  CubicParams cubic;
  double vegas_alpha_pkts = 2.0;
  double vegas_beta_pkts = 4.0;
  BbrParams bbr;
};

/// Runs one transfer and samples it every `sample_interval_s`. Deterministic
/// in (label, link including seed, transfer_bytes, interval, config).
FlowTrace simulate_flow(ProtocolLabel label, const LinkConfig& link, std::int64_t transfer_bytes,
                        double sample_interval_s = 0.1, const SimConfig& config = {});

}  // namespace ccid::sim
