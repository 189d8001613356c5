#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

namespace ccid {

/// The four congestion-control classes the toolkit simulates and identifies.
/// The numeric value is the class index used by the classifier.
enum class ProtocolLabel : int { Vegas = 0, Reno = 1, Cubic = 2, Bbr = 3 };

inline constexpr std::size_t kNumProtocols = 4;

inline constexpr std::array<ProtocolLabel, kNumProtocols> kAllProtocols = {
    ProtocolLabel::Vegas, ProtocolLabel::Reno, ProtocolLabel::Cubic, ProtocolLabel::Bbr};

constexpr int index_of(ProtocolLabel p) { return static_cast<int>(p); }

ProtocolLabel label_from_index(int index);

/// Lower-case name used in filenames and on the command line.
std::string_view to_string(ProtocolLabel p);

/// Display name ("TCP Vegas", "BBR", ...).
std::string_view display_name(ProtocolLabel p);

/// Case-insensitive exact match against the lower-case names.
std::optional<ProtocolLabel> parse_protocol(std::string_view name);

/// Recovers the label from a trace filename: the basename must start with
/// one of `vegas|reno|cubic|bbr` (case-insensitive).
std::optional<ProtocolLabel> label_from_filename(std::string_view path);

}  // namespace ccid
