#include "ccid/protocol.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>

#include "ccid/error.hpp"

namespace ccid {

ProtocolLabel label_from_index(int index) {
  if (index < 0 || index >= static_cast<int>(kNumProtocols))
    throw Error("class index " + std::to_string(index) + " outside 0..3");
  return static_cast<ProtocolLabel>(index);
}

std::string_view to_string(ProtocolLabel p) {
  switch (p) {
    case ProtocolLabel::Vegas: return "vegas";
    case ProtocolLabel::Reno: return "reno";
    case ProtocolLabel::Cubic: return "cubic";
    case ProtocolLabel::Bbr: return "bbr";
  }
  return "unknown";
}

std::string_view display_name(ProtocolLabel p) {
  switch (p) {
    case ProtocolLabel::Vegas: return "TCP Vegas";
    case ProtocolLabel::Reno: return "TCP Reno";
    case ProtocolLabel::Cubic: return "TCP Cubic";
    case ProtocolLabel::Bbr: return "BBR";
  }
  return "unknown";
}

namespace {
std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}
}  // namespace

std::optional<ProtocolLabel> parse_protocol(std::string_view name) {
  const std::string n = lower(name);
  for (auto p : kAllProtocols)
    if (n == to_string(p)) return p;
  return std::nullopt;
}

std::optional<ProtocolLabel> label_from_filename(std::string_view path) {
  const std::string base = lower(std::filesystem::path(path).filename().string());
  for (auto p : kAllProtocols)
    if (base.starts_with(to_string(p))) return p;
  return std::nullopt;
}

}  // namespace ccid
