#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ccid/protocol.hpp"
#include "ccid/trace.hpp"

namespace ccid::features {

/// Model inputs per time step, in column order. Time is never a feature.
inline constexpr std::size_t kNumFeatures = 5;
inline constexpr std::array<const char*, kNumFeatures> kFeatureNames = {"size", "Max_Winc", "Mbps", "Smoothed",
                                                                          "rtt_ms"};
inline constexpr std::size_t kDefaultSeqLen = 60;
inline constexpr std::size_t kDefaultSmoothingWindow = 5;

/// Trailing moving average; the first window-1 outputs average the available
/// prefix, so the output has the input's length.
std::vector<double> smooth(std::span<const double> values, std::size_t window);

/// Recomputes every record's smoothed throughput from its Mbps column.
void fill_smoothed(FlowTrace& trace, std::size_t window);

/// Per-record feature vector (requires smoothed to be filled).
std::array<double, kNumFeatures> record_features(const FeatureRecord& r);

using LabelCounts = std::map<ProtocolLabel, std::int64_t>;

/// Rows to keep per label: every label truncated to the smallest count.
/// Throws naming the first label that is missing or empty.
LabelCounts balance(const LabelCounts& counts);

/// A fixed-length window of feature rows, stored row-major (length x 5).
struct SequenceSample {
  std::vector<double> features;
  std::size_t length = 0;
  ProtocolLabel label = ProtocolLabel::Reno;
  std::string source_id;

  double at(std::size_t step, std::size_t feature) const { return features[step * kNumFeatures + feature]; }
  double& at(std::size_t step, std::size_t feature) { return features[step * kNumFeatures + feature]; }

  bool operator==(const SequenceSample&) const = default;
};

/// Windows starting at 0, stride, 2*stride, ...; trailing partial windows are
/// dropped. A trace shorter than `length` yields no samples.
std::vector<SequenceSample> window_sequences(const FlowTrace& trace, std::size_t length, std::size_t stride);

struct FeatureStats {
  std::array<double, kNumFeatures> mean{};
  std::array<double, kNumFeatures> stddev{};

  bool operator==(const FeatureStats&) const = default;
};

/// Population mean/stddev per feature over every row of every sample.
FeatureStats fit_stats(std::span<const SequenceSample> samples);

/// (x - mean) / stddev per column; a zero-stddev column is only centered.
SequenceSample normalize(SequenceSample sample, const FeatureStats& stats);

struct SplitRatios {
  double train = 0.7;
  double validation = 0.1;
  double test = 0.2;
};

enum class SplitUnit { Sequence, Flow };

struct DatasetSplit {
  std::vector<SequenceSample> train;
  std::vector<SequenceSample> validation;
  std::vector<SequenceSample> test;
  FeatureStats normalization;
  std::uint64_t seed = 0;

  std::size_t seq_len() const;
  bool operator==(const DatasetSplit&) const = default;
};

/// Per-label counts for a ratio split of n items: round-half-up for train and
/// validation, remainder to test.
std::array<std::size_t, 3> split_counts(std::size_t n, const SplitRatios& ratios);

/// Stratified split after a seeded per-label shuffle, then z-score
/// normalization fitted on the train partition and applied to all three.
/// With SplitUnit::Flow, whole source_ids are assigned to one partition.
DatasetSplit split(std::vector<SequenceSample> samples, const SplitRatios& ratios, std::uint64_t seed,
                   SplitUnit unit = SplitUnit::Sequence);

struct PipelineConfig {
  std::size_t smoothing_window = kDefaultSmoothingWindow;
  std::size_t seq_len = kDefaultSeqLen;
  std::size_t stride = 0;  // 0 means seq_len (non-overlapping)
  SplitRatios ratios;
  SplitUnit unit = SplitUnit::Sequence;
  std::uint64_t seed = 0;
};

struct PipelineReport {
  LabelCounts records_before;
  LabelCounts records_after;
  LabelCounts sequences;
  std::array<std::array<std::size_t, 3>, kNumProtocols> split_sizes{};  // [label][train/val/test]
};

/// smooth -> balance -> window -> split -> normalize.
DatasetSplit build_dataset(std::vector<FlowTrace> traces, const PipelineConfig& config,
                           PipelineReport* report = nullptr);

/// Per-protocol counts in a Protocol/Samples/% of total layout, with the
/// balanced row counts and resulting sequence counts underneath.
std::string format_counts_table(const PipelineReport& report);

}  // namespace ccid::features
