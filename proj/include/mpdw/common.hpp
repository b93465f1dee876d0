/*
 * Copyright 2026 The mpdw Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <zlib.h>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mpdw {

enum class ErrorCode {
  // source_ingest
  malformed_header,
  truncated_file,
  unsupported_field_type,
  short_line,
  decode_error,
  ragged_row,
  invalid_layout,
  missing_mandatory_field,
  invalid_value,
  // preprocess
  empty_key_record,
  bad_level_pair,
  missing_required_field,
  // warehouse
  empty_year_range,
  unresolved_dimension_value,
  io_error,
  corrupt_manifest,
  integrity_violation,
  // cube
  bad_level,
  unknown_member,
  empty_member_set,
  invalid_query,
  // benchmark
  answer_mismatch,
  // datagen
  unsatisfiable_size,
  field_overflow,
  // cli
  config_error,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::malformed_header: return "malformed-header";
    case ErrorCode::truncated_file: return "truncated-file";
    case ErrorCode::unsupported_field_type: return "unsupported-field-type";
    case ErrorCode::short_line: return "short-line";
    case ErrorCode::decode_error: return "decode-error";
    case ErrorCode::ragged_row: return "ragged-row";
    case ErrorCode::invalid_layout: return "invalid-layout";
    case ErrorCode::missing_mandatory_field: return "missing-mandatory-field";
    case ErrorCode::invalid_value: return "invalid-value";
    case ErrorCode::empty_key_record: return "empty-key-record";
    case ErrorCode::bad_level_pair: return "bad-level-pair";
    case ErrorCode::missing_required_field: return "missing-required-field";
    case ErrorCode::empty_year_range: return "empty-year-range";
    case ErrorCode::unresolved_dimension_value: return "unresolved-dimension-value";
    case ErrorCode::io_error: return "io-error";
    case ErrorCode::corrupt_manifest: return "corrupt-manifest";
    case ErrorCode::integrity_violation: return "integrity-violation";
    case ErrorCode::bad_level: return "bad-level";
    case ErrorCode::unknown_member: return "unknown-member";
    case ErrorCode::empty_member_set: return "empty-member-set";
    case ErrorCode::invalid_query: return "invalid-query";
    case ErrorCode::answer_mismatch: return "answer-mismatch";
    case ErrorCode::unsatisfiable_size: return "unsatisfiable-size";
    case ErrorCode::field_overflow: return "field-overflow";
    case ErrorCode::config_error: return "config-error";
  }
  return "unknown-error";
}

/// Every failure raised by the library carries one of the codes above.
/// `what()` is prefixed with the code name so CLI messages stay greppable.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code),
        message_(message) {}

  ErrorCode code() const noexcept { return code_; }
  /// The message without the code prefix.
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorCode code_;
  std::string message_;
};

// ---------------------------------------------------------------------------
// Strings

inline constexpr std::string_view kWhitespace = " \t\r\n\f\v";

inline std::string_view rtrim(std::string_view s, std::string_view chars = kWhitespace) {
  const auto end = s.find_last_not_of(chars);
  return end == std::string_view::npos ? std::string_view{} : s.substr(0, end + 1);
}

inline std::string_view ltrim(std::string_view s, std::string_view chars = kWhitespace) {
  const auto begin = s.find_first_not_of(chars);
  return begin == std::string_view::npos ? std::string_view{} : s.substr(begin);
}

inline std::string_view trim(std::string_view s) { return ltrim(rtrim(s)); }

inline bool is_blank(std::string_view s) { return trim(s).empty(); }

/// ASCII case folding. Non-ASCII bytes (UTF-8 continuation bytes included)
/// pass through untouched.
inline std::string casefold(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    parts.emplace_back(s.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

inline std::string join(std::span<const std::string> parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

/// Parses a base-10 integer occupying the whole (trimmed) string.
inline bool parse_int(std::string_view s, long long& out) {
  s = trim(s);
  if (s.empty()) return false;
  bool negative = false;
  std::size_t i = 0;
  if (s[0] == '-' || s[0] == '+') {
    negative = s[0] == '-';
    i = 1;
    if (s.size() == 1) return false;
  }
  long long value = 0;
  for (; i < s.size(); ++i) {
    if (s[i] < '0' || s[i] > '9') return false;
    value = value * 10 + (s[i] - '0');
  }
  out = negative ? -value : value;
  return true;
}

// ---------------------------------------------------------------------------
// CSV dialect: comma (or caller-chosen) separator, LF line ends, fields quoted
// only when they contain the separator, a quote, CR or LF.

inline void append_csv_field(std::string& out, std::string_view field, char sep = ',') {
  const bool needs_quotes = field.find_first_of(std::string{sep, '"', '\n', '\r'}) != std::string_view::npos;
  if (!needs_quotes) {
    out += field;
    return;
  }
  out += '"';
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
}

inline void append_csv_row(std::string& out, std::span<const std::string> fields, char sep = ',') {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += sep;
    append_csv_field(out, fields[i], sep);
  }
  out += '\n';
}

struct CsvRow {
  std::size_t line = 0;  // 1-based line where the row starts
  std::vector<std::string> fields;
};

/// Splits delimited text into rows. Accepts LF or CRLF line ends and
/// double-quoted fields. Blank lines are skipped.
inline std::vector<CsvRow> parse_csv(std::string_view text, char sep = ',') {
  std::vector<CsvRow> rows;
  std::size_t i = 0;
  std::size_t line = 1;
  const std::size_t n = text.size();
  while (i < n) {
    if (text[i] == '\n') {
      ++line;
      ++i;
      continue;
    }
    if (text[i] == '\r' && i + 1 < n && text[i + 1] == '\n') {
      ++line;
      i += 2;
      continue;
    }
    CsvRow row;
    row.line = line;
    std::string field;
    bool in_quotes = false;
    bool row_done = false;
    while (i < n && !row_done) {
      const char c = text[i];
      if (in_quotes) {
        if (c == '"') {
          if (i + 1 < n && text[i + 1] == '"') {
            field += '"';
            i += 2;
          } else {
            in_quotes = false;
            ++i;
          }
        } else {
          if (c == '\n') ++line;
          field += c;
          ++i;
        }
        continue;
      }
      if (c == '"' && field.empty()) {
        in_quotes = true;
        ++i;
      } else if (c == sep) {
        row.fields.push_back(std::move(field));
        field.clear();
        ++i;
      } else if (c == '\n' || (c == '\r' && i + 1 < n && text[i + 1] == '\n')) {
        i += c == '\r' ? 2 : 1;
        ++line;
        row_done = true;
      } else {
        field += c;
        ++i;
      }
    }
    if (in_quotes) {
      throw Error(ErrorCode::ragged_row, "unterminated quoted field starting on line " +
                                             std::to_string(row.line));
    }
    row.fields.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Files

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io_error, "cannot open " + path.string());
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorCode::io_error, "read failed: " + path.string());
  return data;
}

inline void write_file(const std::filesystem::path& path, std::string_view data) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::io_error, "cannot create " + path.string());
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw Error(ErrorCode::io_error, "write failed: " + path.string());
}

inline std::uint32_t crc32_of(std::string_view data) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks for files over 4 GiB.
  constexpr std::size_t kChunk = 1u << 30;
  for (std::size_t off = 0; off < data.size(); off += kChunk) {
    const auto len = static_cast<uInt>(std::min(kChunk, data.size() - off));
    crc = ::crc32(crc, reinterpret_cast<const Bytef*>(data.data() + off), len);
  }
  return static_cast<std::uint32_t>(crc);
}

inline std::string hex32(std::uint32_t v) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(8, '0');
  for (int i = 7; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = kDigits[v & 0xF];
    v >>= 4;
  }
  return out;
}

}  // namespace mpdw
