#include "ccid/feature_pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "ccid/error.hpp"
#include "ccid/rng.hpp"

namespace ccid::features {

std::vector<double> smooth(std::span<const double> values, std::size_t window) {
  if (window == 0) throw Error("smoothing window must be at least 1");
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const std::size_t first = i + 1 >= window ? i + 1 - window : 0;
    double sum = 0.0;
    for (std::size_t k = first; k <= i; ++k) sum += values[k];
    out[i] = sum / static_cast<double>(i - first + 1);
  }
  return out;
}

void fill_smoothed(FlowTrace& trace, std::size_t window) {
  std::vector<double> mbps(trace.records.size());
  for (std::size_t i = 0; i < mbps.size(); ++i) mbps[i] = trace.records[i].throughput_mbps;
  const auto sm = smooth(mbps, window);
  for (std::size_t i = 0; i < sm.size(); ++i) trace.records[i].smoothed_mbps = sm[i];
}

std::array<double, kNumFeatures> record_features(const FeatureRecord& r) {
  if (!r.smoothed_mbps) throw Error("record at t=" + std::to_string(r.time_s) + " has no smoothed throughput");
  return {static_cast<double>(r.size_bytes), static_cast<double>(r.max_win_bytes), r.throughput_mbps,
          *r.smoothed_mbps, r.rtt_ms};
}

LabelCounts balance(const LabelCounts& counts) {
  std::int64_t target = -1;
  for (auto p : kAllProtocols) {
    auto it = counts.find(p);
    if (it == counts.end() || it->second <= 0)
      throw Error("label " + std::string(to_string(p)) + " empty");
    target = target < 0 ? it->second : std::min(target, it->second);
  }
  LabelCounts plan;
  for (auto p : kAllProtocols) plan[p] = target;
  return plan;
}

std::vector<SequenceSample> window_sequences(const FlowTrace& trace, std::size_t length, std::size_t stride) {
  if (length == 0) throw Error("sequence length must be at least 1");
  if (stride == 0) throw Error("stride must be at least 1");
  std::vector<SequenceSample> out;
  const auto& recs = trace.records;
  for (std::size_t start = 0; start + length <= recs.size(); start += stride) {
    SequenceSample s;
    s.length = length;
    s.label = trace.label;
    s.source_id = trace.source_id + "@" + std::to_string(start);
    s.features.reserve(length * kNumFeatures);
    for (std::size_t t = 0; t < length; ++t) {
      const auto f = record_features(recs[start + t]);
      s.features.insert(s.features.end(), f.begin(), f.end());
    }
    out.push_back(std::move(s));
  }
  return out;
}

FeatureStats fit_stats(std::span<const SequenceSample> samples) {
  FeatureStats st;
  std::array<double, kNumFeatures> sum{};
  std::size_t rows = 0;
  for (const auto& s : samples) {
    for (std::size_t t = 0; t < s.length; ++t)
      for (std::size_t f = 0; f < kNumFeatures; ++f) sum[f] += s.at(t, f);
    rows += s.length;
  }
  if (rows == 0) throw Error("cannot fit normalization on an empty set");
  for (std::size_t f = 0; f < kNumFeatures; ++f) st.mean[f] = sum[f] / static_cast<double>(rows);
  std::array<double, kNumFeatures> sq{};
  for (const auto& s : samples)
    for (std::size_t t = 0; t < s.length; ++t)
      for (std::size_t f = 0; f < kNumFeatures; ++f) {
        const double d = s.at(t, f) - st.mean[f];
        sq[f] += d * d;
      }
  for (std::size_t f = 0; f < kNumFeatures; ++f) st.stddev[f] = std::sqrt(sq[f] / static_cast<double>(rows));
  return st;
}

SequenceSample normalize(SequenceSample s, const FeatureStats& stats) {
  for (std::size_t t = 0; t < s.length; ++t)
    for (std::size_t f = 0; f < kNumFeatures; ++f) {
      double v = s.at(t, f) - stats.mean[f];
      if (stats.stddev[f] > 0.0) v /= stats.stddev[f];
      s.at(t, f) = v;
    }
  return s;
}

std::size_t DatasetSplit::seq_len() const {
  for (const auto* part : {&train, &validation, &test})
    if (!part->empty()) return part->front().length;
  return 0;
}

std::array<std::size_t, 3> split_counts(std::size_t n, const SplitRatios& r) {
  const auto round_half_up = [](double x) { return static_cast<std::size_t>(std::floor(x + 0.5)); };
  std::size_t n_train = std::min(n, round_half_up(static_cast<double>(n) * r.train));
  std::size_t n_val = std::min(n - n_train, round_half_up(static_cast<double>(n) * r.validation));
  return {n_train, n_val, n - n_train - n_val};
}

namespace {

constexpr std::size_t kMinPerClass = 10;

void check_ratios(const SplitRatios& r) {
  if (r.train < 0 || r.validation < 0 || r.test < 0) throw Error("split ratios must be nonnegative");
  if (std::abs(r.train + r.validation + r.test - 1.0) > 1e-9) throw Error("split ratios must sum to 1");
}

/// Partition of each source group for flow-level splitting: a group goes to
/// the partition containing the midpoint of its cumulative share.
std::vector<int> assign_groups(const std::vector<std::size_t>& sizes, const SplitRatios& r) {
  std::size_t total = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
  std::vector<int> part(sizes.size());
  std::size_t cum = 0;
  for (std::size_t g = 0; g < sizes.size(); ++g) {
    const double mid = (static_cast<double>(cum) + 0.5 * static_cast<double>(sizes[g])) / static_cast<double>(total);
    part[g] = mid < r.train ? 0 : (mid < r.train + r.validation ? 1 : 2);
    cum += sizes[g];
  }
  return part;
}

std::string flow_of(const std::string& source_id) {
  auto at = source_id.rfind('@');
  return at == std::string::npos ? source_id : source_id.substr(0, at);
}

}  // namespace

DatasetSplit split(std::vector<SequenceSample> samples, const SplitRatios& ratios, std::uint64_t seed,
                   SplitUnit unit) {
  check_ratios(ratios);
  DatasetSplit out;
  out.seed = seed;

  for (auto p : kAllProtocols) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < samples.size(); ++i)
      if (samples[i].label == p) idx.push_back(i);
    if (idx.empty()) continue;
    if (idx.size() < kMinPerClass)
      throw Error("class " + std::string(to_string(p)) + " has " + std::to_string(idx.size()) +
                  " samples; at least 10 are needed to split 0.7/0.1/0.2");

    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(index_of(p))));
    std::array<std::vector<std::size_t>, 3> parts;

    if (unit == SplitUnit::Sequence) {
      rng.shuffle(std::span(idx));
      const auto n = split_counts(idx.size(), ratios);
      parts[0].assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n[0]));
      parts[1].assign(idx.begin() + static_cast<std::ptrdiff_t>(n[0]),
                      idx.begin() + static_cast<std::ptrdiff_t>(n[0] + n[1]));
      parts[2].assign(idx.begin() + static_cast<std::ptrdiff_t>(n[0] + n[1]), idx.end());
    } else {
      std::vector<std::string> flows;
      std::map<std::string, std::vector<std::size_t>> groups;
      for (auto i : idx) {
        auto f = flow_of(samples[i].source_id);
        if (!groups.count(f)) flows.push_back(f);
        groups[f].push_back(i);
      }
      rng.shuffle(std::span(flows));
      std::vector<std::size_t> sizes;
      for (const auto& f : flows) sizes.push_back(groups[f].size());
      const auto assignment = assign_groups(sizes, ratios);
      for (std::size_t g = 0; g < flows.size(); ++g) {
        auto& dst = parts[static_cast<std::size_t>(assignment[g])];
        const auto& members = groups[flows[g]];
        dst.insert(dst.end(), members.begin(), members.end());
      }
    }

    for (auto i : parts[0]) out.train.push_back(samples[i]);
    for (auto i : parts[1]) out.validation.push_back(samples[i]);
    for (auto i : parts[2]) out.test.push_back(samples[i]);
  }

  if (out.train.empty()) throw Error("training partition is empty");
  out.normalization = fit_stats(out.train);
  for (auto* part : {&out.train, &out.validation, &out.test})
    for (auto& s : *part) s = normalize(std::move(s), out.normalization);
  return out;
}

DatasetSplit build_dataset(std::vector<FlowTrace> traces, const PipelineConfig& cfg, PipelineReport* report) {
  if (traces.empty()) throw Error("no traces to build a dataset from");
  if (cfg.seq_len == 0) throw Error("sequence length must be at least 1");
  const std::size_t stride = cfg.stride == 0 ? cfg.seq_len : cfg.stride;

  LabelCounts before;
  for (auto p : kAllProtocols) before[p] = 0;
  for (auto& t : traces) {
    fill_smoothed(t, cfg.smoothing_window);
    before[t.label] += static_cast<std::int64_t>(t.records.size());
  }
  const LabelCounts keep = balance(before);

  // Truncate each label's pool (traces in input order) from the tail.
  std::vector<FlowTrace> kept;
  for (auto p : kAllProtocols) {
    std::int64_t budget = keep.at(p);
    for (auto& t : traces) {
      if (t.label != p || budget <= 0) continue;
      if (static_cast<std::int64_t>(t.records.size()) > budget) t.records.resize(static_cast<std::size_t>(budget));
      budget -= static_cast<std::int64_t>(t.records.size());
      kept.push_back(std::move(t));
    }
  }

  std::vector<SequenceSample> samples;
  if (cfg.unit == SplitUnit::Flow) {
    for (const auto& t : kept) {
      auto w = window_sequences(t, cfg.seq_len, stride);
      samples.insert(samples.end(), std::make_move_iterator(w.begin()), std::make_move_iterator(w.end()));
    }
  } else {
    // Rows pooled per label, so windows may span consecutive flows.
    for (auto p : kAllProtocols) {
      FlowTrace pool;
      pool.label = p;
      pool.source_id = std::string(to_string(p)) + "-pool";
      for (const auto& t : kept)
        if (t.label == p) pool.records.insert(pool.records.end(), t.records.begin(), t.records.end());
      auto w = window_sequences(pool, cfg.seq_len, stride);
      samples.insert(samples.end(), std::make_move_iterator(w.begin()), std::make_move_iterator(w.end()));
    }
  }

  LabelCounts seqs;
  for (auto p : kAllProtocols) seqs[p] = 0;
  for (const auto& s : samples) ++seqs[s.label];

  DatasetSplit ds = split(std::move(samples), cfg.ratios, cfg.seed, cfg.unit);

  if (report) {
    report->records_before = before;
    report->records_after = keep;
    report->sequences = seqs;
    report->split_sizes = {};
    const std::vector<SequenceSample>* parts[3] = {&ds.train, &ds.validation, &ds.test};
    for (std::size_t k = 0; k < 3; ++k)
      for (const auto& s : *parts[k]) ++report->split_sizes[static_cast<std::size_t>(index_of(s.label))][k];
  }
  return ds;
}

std::string format_counts_table(const PipelineReport& r) {
  std::int64_t total = 0;
  for (auto p : kAllProtocols) total += r.records_before.count(p) ? r.records_before.at(p) : 0;
  auto get = [](const LabelCounts& c, ProtocolLabel p) { return c.count(p) ? c.at(p) : 0; };

  std::string out;
  char buf[160];
  auto row = [&](const char* title, auto&& cell) {
    std::snprintf(buf, sizeof(buf), "%-12s", title);
    out += buf;
    for (auto p : kAllProtocols) {
      std::snprintf(buf, sizeof(buf), " %12s", cell(p).c_str());
      out += buf;
    }
    out += '\n';
  };
  row("Protocol:", [](ProtocolLabel p) { return std::string(display_name(p)); });
  row("Samples:", [&](ProtocolLabel p) { return std::to_string(get(r.records_before, p)); });
  row("% of total", [&](ProtocolLabel p) {
    char b[32];
    std::snprintf(b, sizeof(b), "%.1f%%", total > 0 ? 100.0 * static_cast<double>(get(r.records_before, p)) / static_cast<double>(total) : 0.0);
    return std::string(b);
  });
  row("Balanced:", [&](ProtocolLabel p) { return std::to_string(get(r.records_after, p)); });
  row("Sequences:", [&](ProtocolLabel p) { return std::to_string(get(r.sequences, p)); });
  row("Train/Val/Test", [&](ProtocolLabel p) {
    const auto& s = r.split_sizes[static_cast<std::size_t>(index_of(p))];
    return std::to_string(s[0]) + "/" + std::to_string(s[1]) + "/" + std::to_string(s[2]);
  });
  return out;
}

}  // namespace ccid::features
