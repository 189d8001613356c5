#include <doctest.h>

#include <cmath>

#include "ccid/error.hpp"
#include "ccid/protocol.hpp"
#include "ccid/protocol_sim.hpp"
#include "ccid/rng.hpp"
#include "oracles.hpp"

using namespace ccid;
using namespace ccid::sim;

TEST_CASE("protocol labels and names") {
  CHECK(index_of(ProtocolLabel::Vegas) == 0);
  CHECK(index_of(ProtocolLabel::Bbr) == 3);
  CHECK(label_from_index(2) == ProtocolLabel::Cubic);
  CHECK_THROWS_AS(label_from_index(4), Error);
  CHECK(parse_protocol("BBR") == ProtocolLabel::Bbr);
  CHECK_FALSE(parse_protocol("westwood").has_value());
  CHECK(label_from_filename("traces/cubic_17_20250101T060000.csv") == ProtocolLabel::Cubic);
  CHECK(label_from_filename("/x/Reno-run.csv") == ProtocolLabel::Reno);
  CHECK_FALSE(label_from_filename("capture.csv").has_value());
}

TEST_CASE("reno") {
  SUBCASE("loss halves") {
    RenoState s{10.0, 100.0, RenoPhase::CongestionAvoidance};
    const auto n = step_reno(s, 0, true);
    CHECK(n.ssthresh_pkts == 5.0);
    CHECK(n.cwnd_pkts == 5.0);
    CHECK(n.phase == RenoPhase::CongestionAvoidance);
  }
  SUBCASE("loss floor") {
    const auto n = step_reno(RenoState{3.0, 8.0, RenoPhase::SlowStart}, 0, true);
    CHECK(n.cwnd_pkts == 2.0);
  }
  SUBCASE("slow start doubles") {
    const auto n = step_reno(RenoState{4.0, 64.0, RenoPhase::SlowStart}, 4, false);
    CHECK(n.cwnd_pkts == 8.0);
    CHECK(n.phase == RenoPhase::SlowStart);
  }
  SUBCASE("congestion avoidance matches per-ack counter") {
    for (double w : {10.0, 17.0, 40.0}) {
      RenoState s{w, 1.0, RenoPhase::CongestionAvoidance};
      // one full window of acks per step: both rules give exactly +1
      for (int k = 0; k < 3; ++k) {
        const auto acks = static_cast<long>(s.cwnd_pkts);
        const double want = oracle::reno_ca_per_ack(s.cwnd_pkts, acks);
        s = step_reno(s, static_cast<double>(acks), false);
        CHECK(s.cwnd_pkts == want);
      }
    }
    CHECK(step_reno(RenoState{10.0, 5.0, RenoPhase::CongestionAvoidance}, 10, false).cwnd_pkts == 11.0);
  }
  SUBCASE("halving property over random states") {
    Rng rng(11);
    for (int i = 0; i < 1000; ++i) {
      RenoState s{rng.uniform(1.0, 500.0), rng.uniform(2.0, 500.0),
                  static_cast<RenoPhase>(rng.below(3))};
      const auto n = step_reno(s, rng.uniform(0, 100), true);
      CHECK(n.ssthresh_pkts == std::max(2.0, s.cwnd_pkts / 2.0));
      CHECK(n.cwnd_pkts == n.ssthresh_pkts);
    }
  }
  SUBCASE("slow start stays below ssthresh") {
    RenoState s{10.0, 37.0, RenoPhase::SlowStart};
    for (int i = 0; i < 5; ++i) {
      s = step_reno(s, s.cwnd_pkts, false);
      if (s.phase == RenoPhase::SlowStart) CHECK(s.cwnd_pkts < s.ssthresh_pkts);
      CHECK(s.cwnd_pkts >= 1.0);
    }
    CHECK(s.phase == RenoPhase::CongestionAvoidance);
  }
}

TEST_CASE("cubic") {
  const auto s = make_cubic_state(100.0, 0.7, 0.4);
  CHECK(s.k_s == doctest::Approx(4.2171633265).epsilon(1e-9));
  CHECK(s.k_s * s.k_s * s.k_s == doctest::Approx(75.0).epsilon(1e-12));
  CHECK(cubic_window(s, s.k_s) == 100.0);
  CHECK(std::abs(cubic_window(s, 0.0) - 70.0) / 70.0 < 1e-9);

  Rng rng(5);
  for (int i = 0; i < 500; ++i) {
    const double wmax = rng.uniform(4.0, 5000.0);
    const double beta = rng.uniform(0.5, 0.9);
    const double c = rng.uniform(0.1, 1.0);
    const auto st = make_cubic_state(wmax, beta, c);
    CHECK(cubic_window(st, st.k_s) == doctest::Approx(wmax).epsilon(1e-15));
    CHECK(std::abs(cubic_window(st, 0.0) - beta * wmax) <= 1e-9 * beta * wmax);
    const double t = st.k_s + rng.uniform(0.001, 10.0);
    CHECK(cubic_window(st, t + 1e-3) > cubic_window(st, t));
  }

  SUBCASE("loss anchors the curve at the current window") {
    auto st = make_cubic_state(50.0, 0.7, 0.4);
    st.cwnd_pkts = 80.0;
    const auto n = step_cubic(st, 0, 0.001, 0.0001, true);
    CHECK(n.w_max_pkts == 80.0);
    CHECK(n.cwnd_pkts == doctest::Approx(56.0));
    CHECK(n.t_since_reduction_s == 0.0);
  }
}

TEST_CASE("vegas") {
  VegasState s;
  s.cwnd_pkts = 20;
  s.base_rtt_s = 0.1;
  CHECK(vegas_diff(20, 0.1, 0.12) == doctest::Approx(3.3333333333));
  CHECK(step_vegas(s, 0.12).cwnd_pkts == 20.0);
  CHECK(step_vegas(s, 0.1).cwnd_pkts == 21.0);
  s.cwnd_pkts = 40;
  CHECK(step_vegas(s, 0.12).cwnd_pkts == 39.0);

  SUBCASE("base RTT is a running minimum") {
    VegasState v;
    v.cwnd_pkts = 10;
    double prev = v.base_rtt_s;
    Rng rng(2);
    for (int i = 0; i < 200; ++i) {
      v = step_vegas(v, rng.uniform(0.01, 0.2));
      CHECK(v.base_rtt_s <= prev);
      prev = v.base_rtt_s;
    }
  }
  SUBCASE("fixed region and unit steps over random states") {
    Rng rng(3);
    int fixed = 0;
    for (int i = 0; i < 1000; ++i) {
      VegasState v;
      v.alpha_pkts = rng.uniform(0.5, 5.0);
      v.beta_pkts = v.alpha_pkts + rng.uniform(0.1, 5.0);
      v.cwnd_pkts = rng.uniform(3.0, 500.0);
      v.base_rtt_s = rng.uniform(1e-5, 0.2);
      const double rtt = v.base_rtt_s * rng.uniform(1.0, 1.5);
      const double diff = vegas_diff(v.cwnd_pkts, v.base_rtt_s, rtt);
      const auto n = step_vegas(v, rtt);
      if (diff >= v.alpha_pkts && diff <= v.beta_pkts) {
        CHECK(n.cwnd_pkts == v.cwnd_pkts);
        ++fixed;
      } else if (diff < v.alpha_pkts) {
        CHECK(n.cwnd_pkts == v.cwnd_pkts + 1.0);
      } else {
        CHECK(n.cwnd_pkts == v.cwnd_pkts - 1.0);
      }
    }
    CHECK(fixed > 20);
  }
}

TEST_CASE("bbr") {
  SUBCASE("startup plateau exits to drain") {
    const std::vector<double> mbps = {100, 110, 112, 113};
    std::vector<double> bps;
    for (double m : mbps) bps.push_back(m * 1e6);
    REQUIRE(oracle::startup_plateaued(bps));
    auto s = make_bbr_state();
    for (std::size_t i = 0; i < bps.size(); ++i) {
      CHECK(s.phase == BbrPhase::Startup);
      s = step_bbr(s, {bps[i], 1e-4, 1e-4 * static_cast<double>(i + 1), 1e6});
    }
    CHECK(s.phase == BbrPhase::Drain);
    CHECK(s.pacing_gain == doctest::Approx(1.0 / 2.885));
  }
  SUBCASE("growing bandwidth stays in startup") {
    auto s = make_bbr_state();
    double bw = 1e6;
    for (int i = 0; i < 20; ++i, bw *= 1.3) s = step_bbr(s, {bw, 1e-4, 1e-4 * (i + 1), 1});
    CHECK(s.phase == BbrPhase::Startup);
    CHECK(s.pacing_gain == 2.885);
  }
  SUBCASE("cwnd cap arithmetic") {
    BbrState s;
    s.btl_bw_bits_per_s = 1e9;
    s.rt_prop_s = 9e-5;
    s.cwnd_gain = 3.0;
    CHECK(bbr_cwnd_cap_pkts(s, 1460) == doctest::Approx(3.0 * (1e9 * 9e-5 / 8.0) / 1460.0));
    CHECK(bbr_cwnd_cap_pkts(s, 1460) == doctest::Approx(23.116).epsilon(1e-4));
  }
  SUBCASE("probe bw cycle advances once per rt_prop") {
    BbrState s = make_bbr_state();
    s.phase = BbrPhase::ProbeBW;
    s.filled_pipe = true;
    s.cycle_index = 0;
    s.pacing_gain = 1.25;
    s.rt_prop_s = 1e-3;
    s.rt_prop_stamp_s = 1.0;
    s.cycle_stamp_s = 1.0;
    s.round = 5;
    s = step_bbr(s, {5e8, 1e-3, 1.0005, 10});
    CHECK(s.cycle_index == 0);
    s = step_bbr(s, {5e8, 1e-3, 1.0015, 10});
    CHECK(s.cycle_index == 1);
    CHECK(s.pacing_gain == 0.75);
  }
  SUBCASE("probe rtt after a stale rt_prop") {
    BbrState s = make_bbr_state();
    s.phase = BbrPhase::ProbeBW;
    s.filled_pipe = true;
    s.rt_prop_s = 1e-4;
    s.rt_prop_stamp_s = 0.0;
    s.round = 10;
    s = step_bbr(s, {9e8, 2e-4, 10.5, 20});
    CHECK(s.phase == BbrPhase::ProbeRTT);
    CHECK(s.cwnd_pkts <= 4.0);
    s = step_bbr(s, {9e8, 1e-4, 10.6, 4});
    CHECK(s.phase == BbrPhase::ProbeRTT);
    s = step_bbr(s, {9e8, 1e-4, 10.71, 4});
    CHECK(s.phase == BbrPhase::ProbeBW);
  }
  SUBCASE("cap holds over random steps") {
    Rng rng(9);
    auto s = make_bbr_state();
    double now = 0.0;
    for (int i = 0; i < 100000; ++i) {
      if (rng.below(5000) == 0) s = make_bbr_state();
      now += rng.uniform(0.0, rng.bernoulli(0.001) ? 12.0 : 0.002);
      const BbrSample in{rng.uniform(0.0, 2e9), rng.uniform(5e-5, 5e-3), now, rng.uniform(0.0, 200.0)};
      s = step_bbr(s, in);
      if (s.btl_bw_bits_per_s > 0.0) {
        const double cap = s.cwnd_gain * s.btl_bw_bits_per_s * s.rt_prop_s / 8.0 / 1460.0;
        REQUIRE(s.cwnd_pkts <= cap + 1.0);
      }
      REQUIRE(s.cycle_index >= 0);
      REQUIRE(s.cycle_index < 8);
    }
  }
}

TEST_CASE("simulate_flow") {
  LinkConfig link;
  link.seed = 42;

  SUBCASE("1 MB reno completes and conserves bytes") {
    const auto t = simulate_flow(ProtocolLabel::Reno, link, 1'000'000);
    CHECK(t.completed);
    CHECK(t.total_bytes() >= 1'000'000);
    std::int64_t cum = 0;
    for (const auto& r : t.records) {
      CHECK(r.size_bytes >= 0);
      cum += r.size_bytes;
    }
    CHECK(cum == t.total_bytes());
  }
  SUBCASE("determinism") {
    for (auto p : kAllProtocols) CHECK(simulate_flow(p, link, 50'000'000) == simulate_flow(p, link, 50'000'000));
  }
  SUBCASE("bbr finishes before vegas") {
    const auto b = simulate_flow(ProtocolLabel::Bbr, link, 500'000'000);
    const auto v = simulate_flow(ProtocolLabel::Vegas, link, 500'000'000);
    CHECK(b.records.size() < v.records.size());
  }
  SUBCASE("mean interval size ordering") {
    for (std::uint64_t seed = 100; seed < 105; ++seed) {
      LinkConfig l = link;
      l.seed = seed;
      double mean[4];
      const ProtocolLabel order[4] = {ProtocolLabel::Bbr, ProtocolLabel::Cubic, ProtocolLabel::Reno,
                                      ProtocolLabel::Vegas};
      for (int k = 0; k < 4; ++k) {
        const auto t = simulate_flow(order[k], l, 1'000'000'000);
        double sum = 0.0;
        for (std::size_t i = 0; i + 1 < t.records.size(); ++i) sum += static_cast<double>(t.records[i].size_bytes);
        mean[k] = sum / static_cast<double>(t.records.size() - 1);
      }
      CHECK(mean[0] > mean[1]);
      CHECK(mean[1] > mean[2]);
      CHECK(mean[2] > mean[3]);
    }
  }
  SUBCASE("rejects bad arguments") {
    CHECK_THROWS_AS(simulate_flow(ProtocolLabel::Reno, link, 0), Error);
    CHECK_THROWS_AS(simulate_flow(ProtocolLabel::Reno, link, 100, 0.0), Error);
    LinkConfig bad = link;
    bad.buffer_pkts = 0;
    CHECK_THROWS_AS(simulate_flow(ProtocolLabel::Reno, bad, 100), Error);
  }
  SUBCASE("record invariants across protocols and seeds") {
    for (auto p : kAllProtocols) {
      for (std::uint64_t seed = 0; seed < 5; ++seed) {
        LinkConfig l = link;
        l.seed = seed;
        const auto t = simulate_flow(p, l, 200'000'000);
        CHECK(t.completed);
        CHECK(t.total_bytes() >= t.transfer_bytes);
        for (std::size_t i = 0; i < t.records.size(); ++i) {
          const auto& r = t.records[i];
          CHECK(r.time_s == doctest::Approx(0.1 * static_cast<double>(i)));  // interval start
          if (i > 0) CHECK(r.time_s > t.records[i - 1].time_s);
          CHECK(r.rtt_ms >= l.base_rtt_s * 1000.0);
          CHECK(static_cast<double>(r.size_bytes) * 8.0 / 0.1 <= l.capacity_bits_per_s);
          CHECK(std::abs(r.throughput_mbps - static_cast<double>(r.size_bytes) * 8.0 / 0.1 / 1e6) <=
                1e-6 * std::max(1.0, r.throughput_mbps));
          CHECK_FALSE(r.smoothed_mbps.has_value());
        }
      }
    }
  }
  SUBCASE("wall-clock cap stops unfinished flows") {
    SimConfig cfg;
    cfg.wall_clock_cap_s = 1.0;
    const auto t = simulate_flow(ProtocolLabel::Vegas, link, 10'000'000'000, 0.1, cfg);
    CHECK_FALSE(t.completed);
    // the last record may be the partial interval starting at the cap
    CHECK(t.records.size() <= 11);
    CHECK(t.records.back().time_s <= 1.0 + 1e-12);
  }
}
