#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ccid::io {

/// Shortest decimal form that parses back to the identical double.
std::string format_double(double value);

/// Strict full-string parse; nullopt-like failure is reported by returning
/// false so callers can attach file/line context.
bool parse_double(std::string_view text, double& out);
bool parse_int64(std::string_view text, std::int64_t& out);
bool parse_uint64(std::string_view text, std::uint64_t& out);

/// "500M", "500MB", "1.5G", "4096": decimal multipliers K=1e3, M=1e6,
/// G=1e9, optional trailing B, case-insensitive. Throws on anything else or a
/// nonpositive/non-integral result.
std::int64_t parse_byte_size(std::string_view text);

/// Splits on `sep`; always returns at least one field.
std::vector<std::string_view> split(std::string_view line, char sep);

/// Strips spaces, tabs, and a trailing carriage return.
std::string_view trim(std::string_view s);

std::string read_file(const std::filesystem::path& path);

/// Writes to a sibling temporary file and renames it into place, so a failed
/// write never leaves a partial file at `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

/// Little-endian encoder for the versioned binary containers.
class ByteWriter {
 public:
  void bytes(std::string_view raw);
  void u8(std::uint8_t v);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  void f64(double v);
  void str(std::string_view s);  // u32 length + bytes
  void f64s(std::span<const double> values);  // u64 count + values

  const std::string& data() const { return buf_; }

 private:
  std::string buf_;
};

/// Bounds-checked decoder; throws ccid::Error("<what>: truncated ...").
class ByteReader {
 public:
  ByteReader(std::string_view data, std::string what) : data_(data), what_(std::move(what)) {}

  void expect_magic(std::string_view magic);
  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  double f64();
  std::string str();
  std::vector<double> f64s();
  bool at_end() const { return pos_ == data_.size(); }
  void expect_end() const;
  [[noreturn]] void fail(const std::string& msg) const;

 private:
  std::string_view take(std::size_t n);

  std::string_view data_;
  std::string what_;
  std::size_t pos_ = 0;
};

}  // namespace ccid::io
