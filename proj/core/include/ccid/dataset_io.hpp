#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "ccid/feature_pipeline.hpp"

namespace ccid::io {

/// Binary dataset container, little-endian:
///
///   "CCIDDSET" u32 version=1
///   u64 seed, u64 seq_len, u64 n_features (=5)
///   f64[5] mean, f64[5] stddev        normalization fitted on train
///   u64 n_samples, then per sample:
///     u8 partition (0 train, 1 validation, 2 test), u8 label index,
///     u32 len + bytes source_id, f64[seq_len * 5] normalized features
inline constexpr std::string_view kDatasetMagic = "CCIDDSET";
inline constexpr std::uint32_t kDatasetVersion = 1;

std::string encode_dataset(const features::DatasetSplit& ds);
features::DatasetSplit decode_dataset(std::string_view bytes, std::string_view name = "dataset");

void write_dataset(const features::DatasetSplit& ds, const std::filesystem::path& path);
features::DatasetSplit read_dataset(const std::filesystem::path& path);

}  // namespace ccid::io
