#pragma once

#include <span>

#include "ccid/checkpoint.hpp"
#include "ccid/svg_plot.hpp"
#include "ccid/trace.hpp"

namespace ccid::plot {

/// Train and validation loss against epoch on a log-scaled y axis.
Figure loss_figure(std::span<const train::EpochMetrics> history);

/// Eight panels, one row per protocol (BBR, Cubic, Reno, Vegas) with bytes
/// per interval on the left and RTT per interval on the right. The first
/// trace of each protocol in `traces` is drawn. Throws if a protocol has none.
Figure trace_figure(std::span<const FlowTrace> traces);

}  // namespace ccid::plot
