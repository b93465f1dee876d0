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

// Writers for the three source formats; each is the exact inverse of the
// matching parser in source_ingest.hpp for values without trailing blanks.

#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "mpdw/common.hpp"
#include "mpdw/encoding.hpp"
#include "mpdw/source_ingest.hpp"

namespace mpdw {

namespace detail {

inline const std::string& value_for(const RawRecord& r, const FieldDescriptor& f, std::size_t row) {
  const std::string* v = r.find(f.name);
  if (!v) {
    throw Error(ErrorCode::invalid_value, "record " + std::to_string(row) + " has no field '" + f.name + "'");
  }
  return *v;
}

inline void put_u16(std::string& b, std::size_t at, std::uint16_t v) {
  b[at] = static_cast<char>(v & 0xFF);
  b[at + 1] = static_cast<char>(v >> 8);
}

inline void put_u32(std::string& b, std::size_t at, std::uint32_t v) {
  put_u16(b, at, static_cast<std::uint16_t>(v & 0xFFFF));
  put_u16(b, at + 2, static_cast<std::uint16_t>(v >> 16));
}

inline std::string fit(const std::string& encoded, const FieldDescriptor& f, bool right_align, std::size_t row) {
  if (encoded.size() > f.length) {
    throw Error(ErrorCode::field_overflow, "record " + std::to_string(row) + " field '" + f.name + "': " +
                                               std::to_string(encoded.size()) + " bytes exceed length " +
                                               std::to_string(f.length));
  }
  const std::string pad(f.length - encoded.size(), ' ');
  return right_align ? pad + encoded : encoded + pad;
}

}  // namespace detail

struct DbfDate {
  int year = 1900;
  int month = 1;
  int day = 1;
};

/// Serializes records as a dBASE III table; field offsets are recomputed
/// back to back, and the file ends with the 0x1A end-of-file marker.
inline std::string encode_dbf(std::span<const RawRecord> records, std::span<const FieldDescriptor> fields,
                              std::string_view encoding = "ascii", DbfDate last_update = {}) {
  if (fields.empty()) throw Error(ErrorCode::invalid_layout, "a DBF needs at least one field");
  const auto layout = packed_layout({fields.begin(), fields.end()});
  validate_layout(layout);
  std::size_t record_length = 1;
  for (const auto& f : layout) {
    if (f.name.size() > dbf::kMaxNameLength) {
      throw Error(ErrorCode::invalid_layout, "DBF field name '" + f.name + "' is longer than 10 bytes");
    }
    if (f.length > 255) throw Error(ErrorCode::invalid_layout, "DBF field '" + f.name + "' is longer than 255");
    if (f.kind == FieldKind::date && f.length != 8) {
      throw Error(ErrorCode::invalid_layout, "DBF date field '" + f.name + "' must have length 8");
    }
    record_length += f.length;
  }
  const std::size_t header_length = dbf::kHeaderPrefix + dbf::kDescriptorSize * layout.size() + 1;
  if (header_length > 0xFFFF || record_length > 0xFFFF) {
    throw Error(ErrorCode::invalid_layout, "DBF header or record too long");
  }

  std::string out(header_length, '\0');
  out[0] = static_cast<char>(dbf::kVersion);
  out[1] = static_cast<char>(last_update.year - 1900);
  out[2] = static_cast<char>(last_update.month);
  out[3] = static_cast<char>(last_update.day);
  detail::put_u32(out, 4, static_cast<std::uint32_t>(records.size()));
  detail::put_u16(out, 8, static_cast<std::uint16_t>(header_length));
  detail::put_u16(out, 10, static_cast<std::uint16_t>(record_length));
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const std::size_t at = dbf::kHeaderPrefix + i * dbf::kDescriptorSize;
    std::copy(layout[i].name.begin(), layout[i].name.end(), out.begin() + static_cast<std::ptrdiff_t>(at));
    out[at + 11] = dbf_type_code(layout[i].kind);
    out[at + 16] = static_cast<char>(layout[i].length);
    out[at + 17] = static_cast<char>(layout[i].decimal_places);
  }
  out[header_length - 1] = static_cast<char>(dbf::kTerminator);

  const Codec codec(encoding);
  out.reserve(header_length + records.size() * record_length + 1);
  for (std::size_t r = 0; r < records.size(); ++r) {
    out += static_cast<char>(dbf::kLive);
    for (const auto& f : layout) {
      const std::string encoded = codec.encode(detail::value_for(records[r], f, r));
      if (f.kind == FieldKind::date && !encoded.empty() && encoded.size() != 8) {
        throw Error(ErrorCode::invalid_value, "record " + std::to_string(r) + " date '" + encoded + "' is not YYYYMMDD");
      }
      out += detail::fit(encoded, f, f.kind == FieldKind::numeric, r);
    }
  }
  out += static_cast<char>(dbf::kEof);
  return out;
}

inline std::string encode_fixed_width(std::span<const RawRecord> records, std::span<const FieldDescriptor> layout,
                                      std::string_view encoding = "ascii") {
  validate_layout(layout);
  const std::size_t extent = layout_extent(layout);
  const Codec codec(encoding);
  std::string out;
  out.reserve(records.size() * (extent + 1));
  for (std::size_t r = 0; r < records.size(); ++r) {
    std::string line(extent, ' ');
    for (const auto& f : layout) {
      const std::string cell = detail::fit(codec.encode(detail::value_for(records[r], f, r)), f, false, r);
      line.replace(f.offset, f.length, cell);
    }
    out += line;
    out += '\n';
  }
  return out;
}

inline std::string encode_delimited(std::span<const RawRecord> records, std::span<const std::string> names,
                                    char delimiter = ',', bool has_header = true, std::string_view encoding = "utf-8") {
  std::string text;
  if (has_header) append_csv_row(text, names, delimiter);
  std::vector<std::string> row(names.size());
  for (std::size_t r = 0; r < records.size(); ++r) {
    for (std::size_t i = 0; i < names.size(); ++i) {
      const std::string* v = records[r].find(names[i]);
      if (!v) throw Error(ErrorCode::invalid_value, "record " + std::to_string(r) + " has no field '" + names[i] + "'");
      row[i] = *v;
    }
    append_csv_row(text, row, delimiter);
  }
  return Codec(encoding).encode(text);
}

inline void write_dbf(std::span<const RawRecord> records, std::span<const FieldDescriptor> fields,
                      const std::filesystem::path& path, std::string_view encoding = "ascii", DbfDate last_update = {}) {
  write_file(path, encode_dbf(records, fields, encoding, last_update));
}

inline void write_fixed_width(std::span<const RawRecord> records, std::span<const FieldDescriptor> layout,
                              const std::filesystem::path& path, std::string_view encoding = "ascii") {
  write_file(path, encode_fixed_width(records, layout, encoding));
}

inline void write_delimited(std::span<const RawRecord> records, std::span<const std::string> names,
                            const std::filesystem::path& path, char delimiter = ',', bool has_header = true,
                            std::string_view encoding = "utf-8") {
  write_file(path, encode_delimited(records, names, delimiter, has_header, encoding));
}

}  // namespace mpdw
