#include "ccid/figures.hpp"

#include <array>

#include "ccid/error.hpp"

namespace ccid::plot {

namespace {

constexpr std::array<ProtocolLabel, 4> kFigureOrder = {ProtocolLabel::Bbr, ProtocolLabel::Cubic, ProtocolLabel::Reno,
                                                       ProtocolLabel::Vegas};

const char* color_of(ProtocolLabel p) {
  switch (p) {
    case ProtocolLabel::Bbr: return "#d62728";
    case ProtocolLabel::Cubic: return "#1f77b4";
    case ProtocolLabel::Reno: return "#2ca02c";
    case ProtocolLabel::Vegas: return "#9467bd";
  }
  return "#000000";
}

}  // namespace

Figure loss_figure(std::span<const train::EpochMetrics> history) {
  if (history.empty()) throw Error("no epochs to plot");
  Panel p;
  p.title = "Training and validation loss";
  p.x.label = "epoch";
  p.y.label = "cross-entropy loss";
  p.y.log_scale = true;
  Series tr{"train", {}, {}, "#1f77b4", false};
  Series va{"validation", {}, {}, "#ff7f0e", true};
  for (const auto& m : history) {
    tr.x.push_back(m.epoch);
    tr.y.push_back(m.train_loss);
    va.x.push_back(m.epoch);
    va.y.push_back(m.val_loss);
  }
  p.series = {std::move(tr), std::move(va)};
  Figure f;
  f.title = "Loss per epoch";
  f.panel_width = 640;
  f.panel_height = 400;
  f.panels.push_back(std::move(p));
  return f;
}

Figure trace_figure(std::span<const FlowTrace> traces) {
  Figure f;
  f.title = "Size and RTT per sample interval";
  f.columns = 2;
  for (auto proto : kFigureOrder) {
    const FlowTrace* t = nullptr;
    for (const auto& c : traces)
      if (c.label == proto) {
        t = &c;
        break;
      }
    if (!t) throw Error("no traces for " + std::string(display_name(proto)));
    if (t->records.empty()) throw Error("trace " + t->source_id + " has no records");

    Series size{std::string(display_name(proto)), {}, {}, color_of(proto), false};
    Series rtt{std::string(display_name(proto)), {}, {}, color_of(proto), false};
    for (const auto& r : t->records) {
      size.x.push_back(r.time_s);
      size.y.push_back(static_cast<double>(r.size_bytes));
      rtt.x.push_back(r.time_s);
      rtt.y.push_back(r.rtt_ms);
    }
    Panel ps{std::string(display_name(proto)) + ": size", {"time (s)", false}, {"bytes per interval", false}, {}};
    ps.series.push_back(std::move(size));
    Panel pr{std::string(display_name(proto)) + ": RTT", {"time (s)", false}, {"RTT (ms)", false}, {}};
    pr.series.push_back(std::move(rtt));
    f.panels.push_back(std::move(ps));
    f.panels.push_back(std::move(pr));
  }
  return f;
}

}  // namespace ccid::plot
