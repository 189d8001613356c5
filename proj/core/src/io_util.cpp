#include "ccid/io_util.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <system_error>

#include "ccid/error.hpp"

namespace ccid::io {

std::string format_double(double value) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

bool parse_double(std::string_view text, double& out) {
  if (text.empty()) return false;
  if (text.front() == '+') text.remove_prefix(1);
  auto res = std::from_chars(text.data(), text.data() + text.size(), out);
  return res.ec == std::errc() && res.ptr == text.data() + text.size();
}

bool parse_int64(std::string_view text, std::int64_t& out) {
  if (text.empty()) return false;
  auto res = std::from_chars(text.data(), text.data() + text.size(), out);
  return res.ec == std::errc() && res.ptr == text.data() + text.size();
}

bool parse_uint64(std::string_view text, std::uint64_t& out) {
  if (text.empty()) return false;
  auto res = std::from_chars(text.data(), text.data() + text.size(), out);
  return res.ec == std::errc() && res.ptr == text.data() + text.size();
}

std::int64_t parse_byte_size(std::string_view text) {
  const std::string original(text);
  auto bad = [&]() -> std::int64_t { throw Error("invalid byte size '" + original + "' (examples: 500M, 500MB, 2G, 4096)"); };
  if (!text.empty() && (text.back() == 'B' || text.back() == 'b')) text.remove_suffix(1);
  double mult = 1.0;
  if (!text.empty()) {
    switch (text.back()) {
      case 'k': case 'K': mult = 1e3; break;
      case 'm': case 'M': mult = 1e6; break;
      case 'g': case 'G': mult = 1e9; break;
      default: break;
    }
    if (mult != 1.0) text.remove_suffix(1);
  }
  double v = 0.0;
  if (!parse_double(text, v) || !std::isfinite(v)) return bad();
  const double bytes = v * mult;
  if (!(bytes >= 1.0) || bytes > 9.0e18 || bytes != std::floor(bytes)) return bad();
  return static_cast<std::int64_t>(bytes);
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) {
      out.close();
      std::error_code ec;
      fs::remove(tmp, ec);
      throw Error("write failed for " + path.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error("cannot move output into place: " + path.string());
  }
}

void ByteWriter::bytes(std::string_view raw) { buf_.append(raw); }

void ByteWriter::u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }

void ByteWriter::u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xffU));
}

void ByteWriter::u64(std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xffU));
}

void ByteWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void ByteWriter::str(std::string_view s) {
  u32(static_cast<std::uint32_t>(s.size()));
  bytes(s);
}

void ByteWriter::f64s(std::span<const double> values) {
  u64(values.size());
  for (double v : values) f64(v);
}

std::string_view ByteReader::take(std::size_t n) {
  if (data_.size() - pos_ < n) fail("truncated at byte " + std::to_string(pos_));
  auto out = data_.substr(pos_, n);
  pos_ += n;
  return out;
}

void ByteReader::fail(const std::string& msg) const { throw Error(what_ + ": " + msg); }

void ByteReader::expect_magic(std::string_view magic) {
  if (data_.size() < magic.size() || data_.substr(0, magic.size()) != magic)
    fail("bad magic header (expected " + std::string(magic) + ")");
  pos_ = magic.size();
}

std::uint8_t ByteReader::u8() { return static_cast<std::uint8_t>(take(1)[0]); }

std::uint32_t ByteReader::u32() {
  auto b = take(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(b[i])) << (8 * i);
  return v;
}

std::uint64_t ByteReader::u64() {
  auto b = take(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b[i])) << (8 * i);
  return v;
}

double ByteReader::f64() { return std::bit_cast<double>(u64()); }

std::string ByteReader::str() {
  const auto n = u32();
  return std::string(take(n));
}

std::vector<double> ByteReader::f64s() {
  const auto n = u64();
  if (n > (data_.size() - pos_) / 8) fail("array length " + std::to_string(n) + " exceeds file size");
  std::vector<double> out(n);
  for (auto& v : out) v = f64();
  return out;
}

void ByteReader::expect_end() const {
  if (!at_end()) fail("trailing bytes after offset " + std::to_string(pos_));
}

}  // namespace ccid::io
