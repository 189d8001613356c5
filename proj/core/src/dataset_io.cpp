#include "ccid/dataset_io.hpp"

#include "ccid/error.hpp"
#include "ccid/io_util.hpp"

namespace ccid::io {

using features::DatasetSplit;
using features::kNumFeatures;
using features::SequenceSample;

std::string encode_dataset(const DatasetSplit& ds) {
  ByteWriter w;
  w.bytes(kDatasetMagic);
  w.u32(kDatasetVersion);
  w.u64(ds.seed);
  const std::size_t len = ds.seq_len();
  w.u64(len);
  w.u64(kNumFeatures);
  for (double m : ds.normalization.mean) w.f64(m);
  for (double s : ds.normalization.stddev) w.f64(s);
  w.u64(ds.train.size() + ds.validation.size() + ds.test.size());
  const std::vector<SequenceSample>* parts[3] = {&ds.train, &ds.validation, &ds.test};
  for (std::uint8_t k = 0; k < 3; ++k) {
    for (const auto& s : *parts[k]) {
      if (s.length != len || s.features.size() != len * kNumFeatures)
        throw Error("dataset samples must share one sequence length");
      w.u8(k);
      w.u8(static_cast<std::uint8_t>(index_of(s.label)));
      w.str(s.source_id);
      for (double v : s.features) w.f64(v);
    }
  }
  return w.data();
}

DatasetSplit decode_dataset(std::string_view bytes, std::string_view name) {
  ByteReader r(bytes, std::string(name));
  r.expect_magic(kDatasetMagic);
  const auto version = r.u32();
  if (version != kDatasetVersion) r.fail("unsupported dataset version " + std::to_string(version));
  DatasetSplit ds;
  ds.seed = r.u64();
  const auto len = r.u64();
  const auto nf = r.u64();
  if (nf != kNumFeatures) r.fail("expected 5 features per step, file has " + std::to_string(nf));
  for (auto& m : ds.normalization.mean) m = r.f64();
  for (auto& s : ds.normalization.stddev) s = r.f64();
  const auto n = r.u64();
  for (std::uint64_t i = 0; i < n; ++i) {
    SequenceSample s;
    const auto part = r.u8();
    const auto label = r.u8();
    if (part > 2) r.fail("bad partition id " + std::to_string(part));
    if (label >= kNumProtocols) r.fail("bad label index " + std::to_string(label));
    s.label = label_from_index(label);
    s.source_id = r.str();
    s.length = static_cast<std::size_t>(len);
    s.features.resize(s.length * kNumFeatures);
    for (auto& v : s.features) v = r.f64();
    (part == 0 ? ds.train : part == 1 ? ds.validation : ds.test).push_back(std::move(s));
  }
  r.expect_end();
  return ds;
}

void write_dataset(const DatasetSplit& ds, const std::filesystem::path& path) {
  write_file_atomic(path, encode_dataset(ds));
}

DatasetSplit read_dataset(const std::filesystem::path& path) {
  return decode_dataset(read_file(path), path.string());
}

}  // namespace ccid::io
