#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "ccid/trace.hpp"

namespace ccid::io {

/// First line of every trace CSV written by this toolkit. Files without it
/// (external captures) are accepted on read.
inline constexpr std::string_view kTraceMagic = "# ccid-trace v1";
inline constexpr std::string_view kTraceHeader = "time,size,Max_Winc,Mbps,Smoothed,rtt_ms";

std::string trace_to_csv(const FlowTrace& trace);

/// `name` is used for diagnostics and, when the magic line is absent, to
/// recover the label from the filename prefix.
FlowTrace trace_from_csv(std::string_view text, std::string_view name);

void write_trace_csv(const FlowTrace& trace, const std::filesystem::path& path);
FlowTrace read_trace_csv(const std::filesystem::path& path);

/// All `*.csv` files in `dir`, sorted by filename.
std::vector<std::filesystem::path> list_trace_files(const std::filesystem::path& dir);

/// `<protocol>_<seed>_<timestamp>.csv`
std::string trace_filename(ProtocolLabel label, std::uint64_t seed, std::string_view timestamp);

/// Synthetic capture timestamp for the i-th flow of a protocol: three runs a
/// day (06:00, 12:00, 18:00) starting 2025-01-01, formatted YYYYMMDDTHHMMSS.
std::string capture_timestamp(std::uint64_t flow_index);

}  // namespace ccid::io
