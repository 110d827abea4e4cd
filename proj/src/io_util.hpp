#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "mvface/errors.hpp"

namespace mvface::io {

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("error reading '" + path.string() + "'");
  return ss.str();
}

/// Writes to a sibling temporary file and renames it over `path`.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + tmp.string() + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw IoError("error writing '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot move output into place at '" + path.string() + "'");
  }
}

inline void append_f64_le(std::string& out, double value) {
  auto bits = std::bit_cast<std::uint64_t>(value);
  for (int i = 0; i < 8; ++i) {
    out.push_back(static_cast<char>(bits & 0xffu));
    bits >>= 8;
  }
}

inline double read_f64_le(const char* p) {
  std::uint64_t bits = 0;
  for (int i = 7; i >= 0; --i) {
    bits = (bits << 8) | static_cast<unsigned char>(p[i]);
  }
  return std::bit_cast<double>(bits);
}

/// Sequential reader over a byte buffer with explicit end-of-data errors.
class Cursor {
 public:
  Cursor(std::string_view data, std::string source) : data_(data), source_(std::move(source)) {}

  /// Next '\n'-terminated line without the terminator.
  std::string line() {
    const auto end = data_.find('\n', pos_);
    if (end == std::string_view::npos) fail_truncated();
    std::string out(data_.substr(pos_, end - pos_));
    pos_ = end + 1;
    return out;
  }

  std::string_view bytes(std::size_t n) {
    if (remaining() < n) fail_truncated();
    auto out = data_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  std::size_t remaining() const { return data_.size() - pos_; }
  const std::string& source() const { return source_; }

  [[noreturn]] void fail_truncated() const {
    throw IoError("unexpected end of data in '" + source_ + "'");
  }

 private:
  std::string_view data_;
  std::string source_;
  std::size_t pos_ = 0;
};

/// Whitespace tokens of a line with any '#' comment removed.
inline std::vector<std::string> tokens(const std::string& line) {
  const auto hash = line.find('#');
  std::istringstream is(hash == std::string::npos ? line : line.substr(0, hash));
  std::vector<std::string> out;
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

}  // namespace mvface::io
