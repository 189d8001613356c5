#include "ccid/trace_csv.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "ccid/error.hpp"
#include "ccid/io_util.hpp"

namespace ccid::io {

namespace {

[[noreturn]] void fail_at(std::string_view name, std::size_t line, const std::string& msg) {
  throw Error(std::string(name) + ":" + std::to_string(line) + ": " + msg);
}

}  // namespace

std::string trace_to_csv(const FlowTrace& t) {
  std::string out;
  out.reserve(64 * (t.records.size() + 2));
  out += kTraceMagic;
  out += " label=" + std::string(to_string(t.label));
  out += " seed=" + std::to_string(t.link.seed);
  out += " capacity_bps=" + format_double(t.link.capacity_bits_per_s);
  out += " base_rtt_s=" + format_double(t.link.base_rtt_s);
  out += " buffer_pkts=" + std::to_string(t.link.buffer_pkts);
  out += " mss_bytes=" + std::to_string(t.link.mss_bytes);
  out += " transfer_bytes=" + std::to_string(t.transfer_bytes);
  out += " completed=" + std::string(t.completed ? "1" : "0");
  out += " interval_s=" + format_double(t.sample_interval_s);
  out += '\n';
  out += kTraceHeader;
  out += '\n';
  for (const auto& r : t.records) {
    out += format_double(r.time_s);
    out += ',';
    out += std::to_string(r.size_bytes);
    out += ',';
    out += std::to_string(r.max_win_bytes);
    out += ',';
    out += format_double(r.throughput_mbps);
    out += ',';
    if (r.smoothed_mbps) out += format_double(*r.smoothed_mbps);
    out += ',';
    out += format_double(r.rtt_ms);
    out += '\n';
  }
  return out;
}

FlowTrace trace_from_csv(std::string_view text, std::string_view name) {
  FlowTrace t;
  t.source_id = std::filesystem::path(name).stem().string();

  std::size_t line_no = 0;
  std::size_t pos = 0;
  auto next_line = [&](std::string_view& line) {
    if (pos >= text.size()) return false;
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos = end + 1;
    ++line_no;
    return true;
  };

  std::string_view line;
  if (!next_line(line)) throw Error(std::string(name) + ": empty file");

  bool have_meta = false;
  if (line.starts_with(kTraceMagic)) {
    have_meta = true;
    std::map<std::string, std::string, std::less<>> kv;
    for (auto tok : split(line.substr(kTraceMagic.size()), ' ')) {
      if (tok.empty()) continue;
      auto eq = tok.find('=');
      if (eq == std::string_view::npos) fail_at(name, line_no, "malformed metadata token '" + std::string(tok) + "'");
      kv.emplace(std::string(tok.substr(0, eq)), std::string(tok.substr(eq + 1)));
    }
    auto get = [&](std::string_view key) -> const std::string& {
      auto it = kv.find(key);
      if (it == kv.end()) fail_at(name, line_no, "metadata missing '" + std::string(key) + "'");
      return it->second;
    };
    auto label = parse_protocol(get("label"));
    if (!label) fail_at(name, line_no, "unknown protocol '" + get("label") + "'");
    t.label = *label;
    bool ok = parse_uint64(get("seed"), t.link.seed) && parse_double(get("capacity_bps"), t.link.capacity_bits_per_s) &&
              parse_double(get("base_rtt_s"), t.link.base_rtt_s) && parse_int64(get("buffer_pkts"), t.link.buffer_pkts) &&
              parse_int64(get("mss_bytes"), t.link.mss_bytes) && parse_int64(get("transfer_bytes"), t.transfer_bytes) &&
              parse_double(get("interval_s"), t.sample_interval_s);
    if (!ok) fail_at(name, line_no, "malformed metadata value");
    const auto& done = get("completed");
    if (done != "0" && done != "1") fail_at(name, line_no, "completed must be 0 or 1");
    t.completed = done == "1";
    if (!next_line(line)) fail_at(name, line_no, "missing column header");
  } else {
    auto label = label_from_filename(name);
    if (!label) throw Error(std::string(name) + ": cannot infer protocol from filename (expected vegas|reno|cubic|bbr prefix)");
    t.label = *label;
  }

  // Column header: required names, any order.
  static const char* const kCols[] = {"time", "size", "Max_Winc", "Mbps", "Smoothed", "rtt_ms"};
  auto header = split(line, ',');
  int idx[6];
  std::string missing;
  for (int c = 0; c < 6; ++c) {
    idx[c] = -1;
    for (std::size_t h = 0; h < header.size(); ++h)
      if (trim(header[h]) == kCols[c]) idx[c] = static_cast<int>(h);
    if (idx[c] < 0) missing += (missing.empty() ? "" : ", ") + std::string(kCols[c]);
  }
  if (!missing.empty()) fail_at(name, line_no, "missing columns: " + missing);

  while (next_line(line)) {
    if (trim(line).empty()) continue;
    auto f = split(line, ',');
    if (f.size() != header.size())
      fail_at(name, line_no, "expected " + std::to_string(header.size()) + " fields, got " + std::to_string(f.size()));
    FeatureRecord r;
    double size = 0, win = 0;
    auto num = [&](int c, double& out) {
      auto s = trim(f[static_cast<std::size_t>(idx[c])]);
      if (!parse_double(s, out) || !std::isfinite(out))
        fail_at(name, line_no, std::string("bad ") + kCols[c] + " value '" + std::string(s) + "'");
    };
    num(0, r.time_s);
    num(1, size);
    num(2, win);
    num(3, r.throughput_mbps);
    num(5, r.rtt_ms);
    if (size < 0 || size != std::floor(size)) fail_at(name, line_no, "size must be a nonnegative integer");
    if (win < 0 || win != std::floor(win)) fail_at(name, line_no, "Max_Winc must be a nonnegative integer");
    r.size_bytes = static_cast<std::int64_t>(size);
    r.max_win_bytes = static_cast<std::int64_t>(win);
    auto sm = trim(f[static_cast<std::size_t>(idx[4])]);
    if (!sm.empty() && sm != "nan" && sm != "NaN") {
      double v = 0;
      if (!parse_double(sm, v) || !std::isfinite(v)) fail_at(name, line_no, "bad Smoothed value '" + std::string(sm) + "'");
      r.smoothed_mbps = v;
    }
    if (!t.records.empty() && !(r.time_s > t.records.back().time_s))
      fail_at(name, line_no, "time must be strictly increasing");
    t.records.push_back(r);
  }

  if (!have_meta) {
    t.transfer_bytes = t.total_bytes();
    t.completed = true;
    if (t.records.size() >= 2) t.sample_interval_s = t.records[1].time_s - t.records[0].time_s;
  }
  return t;
}

void write_trace_csv(const FlowTrace& trace, const std::filesystem::path& path) {
  write_file_atomic(path, trace_to_csv(trace));
}

FlowTrace read_trace_csv(const std::filesystem::path& path) {
  return trace_from_csv(read_file(path), path.string());
}

std::vector<std::filesystem::path> list_trace_files(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw Error("not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".csv") out.push_back(e.path());
  std::sort(out.begin(), out.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });
  return out;
}

std::string trace_filename(ProtocolLabel label, std::uint64_t seed, std::string_view timestamp) {
  return std::string(to_string(label)) + "_" + std::to_string(seed) + "_" + std::string(timestamp) + ".csv";
}

std::string capture_timestamp(std::uint64_t flow_index) {
  using namespace std::chrono;
  static constexpr int kHours[] = {6, 12, 18};
  const sys_days start = year{2025} / January / 1;
  const sys_days day = start + days{static_cast<long>(flow_index / 3)};
  const year_month_day ymd{day};
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d%02u%02uT%02d0000", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), kHours[flow_index % 3]);
  return buf;
}

}  // namespace ccid::io
