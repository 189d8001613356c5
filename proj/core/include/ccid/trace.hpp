#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ccid/protocol.hpp"

namespace ccid {

/// Bottleneck path shared by a simulated flow.
struct LinkConfig {
  double capacity_bits_per_s = 1e9;
  double base_rtt_s = 9e-5;
  std::int64_t buffer_pkts = 8;
  std::int64_t mss_bytes = 1460;
  std::uint64_t seed = 0;

  /// Throws ccid::Error when a field is out of range.
  void validate() const;

  double buffer_bits() const { return static_cast<double>(buffer_pkts * mss_bytes) * 8.0; }
  /// Bandwidth-delay product in packets.
  double bdp_pkts() const {
    return capacity_bits_per_s * base_rtt_s / 8.0 / static_cast<double>(mss_bytes);
  }

  bool operator==(const LinkConfig&) const = default;
};

/// One fixed-interval observation of a flow. Column names on disk:
/// `time,size,Max_Winc,Mbps,Smoothed,rtt_ms`.
struct FeatureRecord {
  double time_s = 0.0;
  std::int64_t size_bytes = 0;
  std::int64_t max_win_bytes = 0;
  double throughput_mbps = 0.0;
  std::optional<double> smoothed_mbps;  // filled by the feature pipeline
  double rtt_ms = 0.0;

  bool operator==(const FeatureRecord&) const = default;
};

struct FlowTrace {
  ProtocolLabel label = ProtocolLabel::Reno;
  std::vector<FeatureRecord> records;
  LinkConfig link;
  std::int64_t transfer_bytes = 0;
  bool completed = false;
  double sample_interval_s = 0.1;
  /// Provenance: file stem or generator id.
  std::string source_id;

  std::int64_t total_bytes() const;

  bool operator==(const FlowTrace&) const = default;
};

}  // namespace ccid
