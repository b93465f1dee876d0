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

// Readers for the three legacy source formats (dBASE III tables, fixed-width
// flat files, delimited exports) and the mapping of each source's native
// schema onto CanonicalApplicant.

#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "mpdw/applicant.hpp"
#include "mpdw/common.hpp"
#include "mpdw/encoding.hpp"

namespace mpdw {

enum class FieldKind : std::uint8_t { character, numeric, date };

inline char dbf_type_code(FieldKind k) {
  switch (k) {
    case FieldKind::character: return 'C';
    case FieldKind::numeric: return 'N';
    case FieldKind::date: return 'D';
  }
  return 'C';
}

inline std::string_view to_string(FieldKind k) {
  switch (k) {
    case FieldKind::character: return "character";
    case FieldKind::numeric: return "numeric";
    case FieldKind::date: return "date";
  }
  return "character";
}

inline std::optional<FieldKind> parse_field_kind(std::string_view s) {
  if (s == "character" || s == "C") return FieldKind::character;
  if (s == "numeric" || s == "N") return FieldKind::numeric;
  if (s == "date" || s == "D") return FieldKind::date;
  return std::nullopt;
}

struct FieldDescriptor {
  std::string name;
  FieldKind kind = FieldKind::character;
  std::size_t offset = 0;  // byte offset within a record (fixed-width lines, DBF bodies minus the flag byte)
  std::size_t length = 1;
  std::size_t decimal_places = 0;

  bool operator==(const FieldDescriptor&) const = default;
};

/// Checks length >= 1, unique non-empty names, ascending non-overlapping
/// offsets. Throws invalid-layout.
inline void validate_layout(std::span<const FieldDescriptor> layout) {
  std::set<std::string> names;
  std::size_t prev_end = 0;
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const auto& f = layout[i];
    if (f.name.empty()) throw Error(ErrorCode::invalid_layout, "field " + std::to_string(i) + " has no name");
    if (!names.insert(f.name).second) throw Error(ErrorCode::invalid_layout, "duplicate field name '" + f.name + "'");
    if (f.length < 1) throw Error(ErrorCode::invalid_layout, "field '" + f.name + "' has zero length");
    if (i > 0 && f.offset < prev_end) {
      throw Error(ErrorCode::invalid_layout, "field '" + f.name + "' overlaps or precedes its predecessor");
    }
    prev_end = f.offset + f.length;
  }
}

/// Lays fields out back to back starting at offset 0.
inline std::vector<FieldDescriptor> packed_layout(std::vector<FieldDescriptor> fields) {
  std::size_t offset = 0;
  for (auto& f : fields) {
    f.offset = offset;
    offset += f.length;
  }
  return fields;
}

inline std::size_t layout_extent(std::span<const FieldDescriptor> layout) {
  std::size_t extent = 0;
  for (const auto& f : layout) extent = std::max(extent, f.offset + f.length);
  return extent;
}

/// One decoded source row. Field names are shared across all rows of a file.
struct RawRecord {
  std::string source_id;
  std::shared_ptr<const std::vector<std::string>> names;
  std::vector<std::string> values;

  const std::string* find(std::string_view name) const {
    if (!names) return nullptr;
    for (std::size_t i = 0; i < names->size(); ++i) {
      if ((*names)[i] == name) return &values[i];
    }
    return nullptr;
  }

  std::size_t size() const { return values.size(); }

  bool operator==(const RawRecord& other) const {
    const bool same_names = (names && other.names) ? *names == *other.names : names == other.names;
    return source_id == other.source_id && same_names && values == other.values;
  }
};

inline RawRecord make_raw_record(std::string source_id, std::vector<std::pair<std::string, std::string>> fields) {
  auto names = std::make_shared<std::vector<std::string>>();
  RawRecord r;
  r.source_id = std::move(source_id);
  for (auto& [k, v] : fields) {
    names->push_back(std::move(k));
    r.values.push_back(std::move(v));
  }
  r.names = std::move(names);
  return r;
}

using Codebook = std::map<std::string, std::string>;

struct SchemaMapping {
  std::map<Field, std::string> field_map;  // canonical field -> source field
  std::map<Field, Codebook> value_codebooks;
  /// Source field carrying a YYYYMMDD application date. When set it supplies
  /// both year and quarter.
  std::string application_date_field;

  bool operator==(const SchemaMapping&) const = default;
};

enum class SourceFormat : std::uint8_t { dbf, fixed_width, delimited };

inline std::string_view to_string(SourceFormat f) {
  switch (f) {
    case SourceFormat::dbf: return "dbf";
    case SourceFormat::fixed_width: return "fixed_width";
    case SourceFormat::delimited: return "delimited";
  }
  return "dbf";
}

inline std::optional<SourceFormat> parse_source_format(std::string_view s) {
  if (s == "dbf") return SourceFormat::dbf;
  if (s == "fixed_width") return SourceFormat::fixed_width;
  if (s == "delimited") return SourceFormat::delimited;
  return std::nullopt;
}

struct SourceSpec {
  std::string source_id;
  std::string city;
  SourceFormat format = SourceFormat::delimited;
  std::string encoding = "utf-8";
  std::vector<FieldDescriptor> layout;  // fixed_width only
  char delimiter = ',';                 // delimited only
  bool has_header = true;               // delimited only
  SchemaMapping mapping;

  bool operator==(const SourceSpec&) const = default;
};

/// Mandatory canonical fields: national_id plus the application period
/// (year and quarter, or an application date). The city comes from the spec.
inline void validate_source_spec(const SourceSpec& spec) {
  if (spec.source_id.empty()) throw Error(ErrorCode::config_error, "source without source_id");
  if (spec.city.empty()) throw Error(ErrorCode::config_error, "source '" + spec.source_id + "' has no city");
  if (spec.format == SourceFormat::fixed_width) {
    if (spec.layout.empty()) {
      throw Error(ErrorCode::config_error, "fixed-width source '" + spec.source_id + "' needs a layout");
    }
    validate_layout(spec.layout);
  }
  if (spec.format == SourceFormat::delimited && (spec.delimiter == '\0' || spec.delimiter == '\n')) {
    throw Error(ErrorCode::config_error, "delimited source '" + spec.source_id + "' needs a delimiter");
  }
  const auto& m = spec.mapping;
  if (!m.field_map.contains(Field::national_id)) {
    throw Error(ErrorCode::config_error, "source '" + spec.source_id + "' does not map national_id");
  }
  const bool has_period = m.field_map.contains(Field::year) && m.field_map.contains(Field::quarter);
  if (!has_period && m.application_date_field.empty()) {
    throw Error(ErrorCode::config_error,
                "source '" + spec.source_id + "' maps neither year+quarter nor an application date");
  }
  for (const auto& [field, _] : m.field_map) {
    if (field == Field::status || field == Field::source_id || field == Field::city) {
      throw Error(ErrorCode::config_error, "source '" + spec.source_id + "' cannot map derived field " +
                                               std::string(to_string(field)));
    }
  }
}

// ---------------------------------------------------------------------------
// dBASE III

namespace dbf {

inline constexpr std::uint8_t kVersion = 0x03;
inline constexpr std::uint8_t kTerminator = 0x0D;
inline constexpr std::uint8_t kLive = 0x20;
inline constexpr std::uint8_t kDeleted = 0x2A;
inline constexpr std::uint8_t kEof = 0x1A;
inline constexpr std::size_t kHeaderPrefix = 32;
inline constexpr std::size_t kDescriptorSize = 32;
inline constexpr std::size_t kMaxNameLength = 10;

inline std::uint16_t read_u16(std::string_view b, std::size_t at) {
  return static_cast<std::uint16_t>(static_cast<std::uint8_t>(b[at]) |
                                    (static_cast<std::uint8_t>(b[at + 1]) << 8));
}

inline std::uint32_t read_u32(std::string_view b, std::size_t at) {
  return static_cast<std::uint32_t>(read_u16(b, at)) | (static_cast<std::uint32_t>(read_u16(b, at + 2)) << 16);
}

}  // namespace dbf

struct DbfTable {
  std::uint8_t last_update[3] = {0, 0, 0};  // YY (since 1900), MM, DD
  std::uint32_t record_count = 0;           // as declared in the header, deleted rows included
  std::uint16_t header_length = 0;
  std::uint16_t record_length = 0;
  std::vector<FieldDescriptor> fields;
  std::size_t deleted = 0;
  std::vector<RawRecord> records;
};

inline DbfTable read_dbf(std::string_view bytes, std::string_view encoding = "ascii",
                         std::string source_id = {}) {
  using namespace dbf;
  if (bytes.size() < kHeaderPrefix) {
    throw Error(ErrorCode::truncated_file, "DBF shorter than its 32-byte header (" +
                                               std::to_string(bytes.size()) + " bytes)");
  }
  if (static_cast<std::uint8_t>(bytes[0]) != kVersion) {
    throw Error(ErrorCode::malformed_header, "DBF version byte is " +
                                                 std::to_string(static_cast<std::uint8_t>(bytes[0])) +
                                                 ", expected 3 (dBASE III)");
  }
  DbfTable t;
  for (int i = 0; i < 3; ++i) t.last_update[i] = static_cast<std::uint8_t>(bytes[1 + i]);
  t.record_count = read_u32(bytes, 4);
  t.header_length = read_u16(bytes, 8);
  t.record_length = read_u16(bytes, 10);

  std::size_t pos = kHeaderPrefix;
  std::size_t offset = 0;
  while (true) {
    if (pos >= bytes.size()) throw Error(ErrorCode::truncated_file, "DBF field descriptor array is not terminated");
    if (static_cast<std::uint8_t>(bytes[pos]) == kTerminator) break;
    if (pos + kDescriptorSize > bytes.size()) {
      throw Error(ErrorCode::truncated_file, "DBF field descriptor cut off at byte " + std::to_string(pos));
    }
    const std::string_view d = bytes.substr(pos, kDescriptorSize);
    FieldDescriptor f;
    const std::string_view raw_name = d.substr(0, kMaxNameLength + 1);
    f.name = std::string(raw_name.substr(0, std::min(raw_name.find('\0'), raw_name.size())));
    const char type = d[11];
    const auto kind = parse_field_kind(std::string_view(&type, 1));
    if (!kind) {
      throw Error(ErrorCode::unsupported_field_type,
                  "field '" + f.name + "' has type '" + std::string(1, type) + "'; only C, N and D are supported");
    }
    f.kind = *kind;
    f.length = static_cast<std::uint8_t>(d[16]);
    f.decimal_places = static_cast<std::uint8_t>(d[17]);
    f.offset = offset;
    if (f.name.empty() || f.length == 0 || (f.kind == FieldKind::date && f.length != 8)) {
      throw Error(ErrorCode::malformed_header, "bad descriptor for field '" + f.name + "'");
    }
    offset += f.length;
    t.fields.push_back(std::move(f));
    pos += kDescriptorSize;
  }
  if (t.fields.empty()) throw Error(ErrorCode::malformed_header, "DBF declares no fields");
  const std::size_t expected_header = kHeaderPrefix + kDescriptorSize * t.fields.size() + 1;
  if (t.header_length != expected_header) {
    throw Error(ErrorCode::malformed_header, "header length " + std::to_string(t.header_length) +
                                                 " disagrees with " + std::to_string(t.fields.size()) +
                                                 " descriptors (expected " + std::to_string(expected_header) + ")");
  }
  if (t.record_length != offset + 1) {
    throw Error(ErrorCode::malformed_header, "record length " + std::to_string(t.record_length) +
                                                 " disagrees with field lengths (expected " +
                                                 std::to_string(offset + 1) + ")");
  }
  const std::size_t body_end =
      expected_header + static_cast<std::size_t>(t.record_count) * t.record_length;
  if (bytes.size() < body_end) {
    throw Error(ErrorCode::truncated_file, "DBF declares " + std::to_string(t.record_count) + " records (" +
                                               std::to_string(body_end) + " bytes) but file has " +
                                               std::to_string(bytes.size()) + " bytes");
  }
  const bool eof_only = bytes.size() == body_end + 1 && static_cast<std::uint8_t>(bytes[body_end]) == kEof;
  if (bytes.size() != body_end && !eof_only) {
    throw Error(ErrorCode::malformed_header, "DBF has " + std::to_string(bytes.size() - body_end) +
                                                 " unexpected trailing bytes");
  }

  const Codec codec(encoding);
  auto names = std::make_shared<std::vector<std::string>>();
  for (const auto& f : t.fields) names->push_back(f.name);
  t.records.reserve(t.record_count);
  for (std::uint32_t r = 0; r < t.record_count; ++r) {
    const std::string_view rec = bytes.substr(expected_header + static_cast<std::size_t>(r) * t.record_length,
                                              t.record_length);
    const auto flag = static_cast<std::uint8_t>(rec[0]);
    if (flag == kDeleted) {
      ++t.deleted;
      continue;
    }
    if (flag != kLive) {
      throw Error(ErrorCode::malformed_header, "record " + std::to_string(r) + " has deletion flag " +
                                                   std::to_string(flag));
    }
    RawRecord out;
    out.source_id = source_id;
    out.names = names;
    out.values.reserve(t.fields.size());
    for (const auto& f : t.fields) {
      std::string_view v = rec.substr(1 + f.offset, f.length);
      v = f.kind == FieldKind::character ? rtrim(v, " ") : trim(v);
      try {
        out.values.push_back(codec.decode(v));
      } catch (const Error& e) {
        throw Error(ErrorCode::decode_error, "record " + std::to_string(r) + " field '" + f.name + "': " + e.what());
      }
    }
    t.records.push_back(std::move(out));
  }
  return t;
}

inline std::vector<RawRecord> parse_dbf(std::string_view bytes, std::string_view encoding = "ascii",
                                        std::string source_id = {}) {
  return read_dbf(bytes, encoding, std::move(source_id)).records;
}

// ---------------------------------------------------------------------------
// Fixed-width flat files: one record per LF-terminated line (CRLF tolerated).

inline std::vector<RawRecord> parse_fixed_width(std::string_view bytes, std::span<const FieldDescriptor> layout,
                                                std::string_view encoding = "ascii", std::string source_id = {}) {
  validate_layout(layout);
  const std::size_t extent = layout_extent(layout);
  const Codec codec(encoding);
  auto names = std::make_shared<std::vector<std::string>>();
  for (const auto& f : layout) names->push_back(f.name);

  std::vector<RawRecord> out;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < bytes.size()) {
    ++line_no;
    auto nl = bytes.find('\n', pos);
    if (nl == std::string_view::npos) nl = bytes.size();
    std::string_view line = bytes.substr(pos, nl - pos);
    pos = nl + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.size() < extent) {
      throw Error(ErrorCode::short_line, "line " + std::to_string(line_no) + " has " + std::to_string(line.size()) +
                                             " bytes, layout needs " + std::to_string(extent));
    }
    RawRecord r;
    r.source_id = source_id;
    r.names = names;
    r.values.reserve(layout.size());
    for (const auto& f : layout) {
      const std::string_view slice = rtrim(line.substr(f.offset, f.length), " ");
      try {
        r.values.push_back(codec.decode(slice));
      } catch (const Error& e) {
        throw Error(ErrorCode::decode_error, "line " + std::to_string(line_no) + " field '" + f.name + "': " + e.what());
      }
    }
    out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Delimited exports.

inline std::vector<RawRecord> parse_delimited(std::string_view bytes, char delimiter, bool has_header,
                                              std::string_view encoding = "utf-8", std::string source_id = {}) {
  const Codec codec(encoding);
  const std::string text = codec.decode(bytes);
  auto rows = parse_csv(text, delimiter);
  std::vector<RawRecord> out;
  if (rows.empty()) return out;

  auto names = std::make_shared<std::vector<std::string>>();
  std::size_t first = 0;
  if (has_header) {
    *names = std::move(rows[0].fields);
    first = 1;
  } else {
    for (std::size_t i = 0; i < rows[0].fields.size(); ++i) names->push_back("f" + std::to_string(i));
  }
  out.reserve(rows.size() - first);
  for (std::size_t i = first; i < rows.size(); ++i) {
    auto& row = rows[i];
    if (row.fields.size() != names->size()) {
      throw Error(ErrorCode::ragged_row, "row " + std::to_string(i + 1) + " (line " + std::to_string(row.line) +
                                             ") has " + std::to_string(row.fields.size()) + " fields, expected " +
                                             std::to_string(names->size()));
    }
    RawRecord r;
    r.source_id = source_id;
    r.names = names;
    r.values = std::move(row.fields);
    out.push_back(std::move(r));
  }
  return out;
}

inline std::vector<RawRecord> parse_source(std::string_view bytes, const SourceSpec& spec) {
  switch (spec.format) {
    case SourceFormat::dbf: return parse_dbf(bytes, spec.encoding, spec.source_id);
    case SourceFormat::fixed_width: return parse_fixed_width(bytes, spec.layout, spec.encoding, spec.source_id);
    case SourceFormat::delimited:
      return parse_delimited(bytes, spec.delimiter, spec.has_header, spec.encoding, spec.source_id);
  }
  return {};
}

// ---------------------------------------------------------------------------
// Mapping onto the canonical record.

struct IngestReport {
  std::size_t records_mapped = 0;
  /// Non-empty coded values with no entry in the field's source codebook.
  std::map<Field, std::size_t> untranslated_codes;

  std::size_t total_untranslated() const {
    std::size_t n = 0;
    for (const auto& [_, c] : untranslated_codes) n += c;
    return n;
  }
};

namespace detail {

inline Quarter quarter_of_month(int month) { return static_cast<Quarter>((month - 1) / 3 + 1); }

}  // namespace detail

inline CanonicalApplicant map_to_canonical(const RawRecord& record, const SourceSpec& source,
                                           IngestReport* report = nullptr) {
  const SchemaMapping& mapping = source.mapping;
  CanonicalApplicant out;
  out.source_id = source.source_id;
  out.city = source.city;
  // Attributes no source field maps to stay absent rather than blank.
  out.present = field_set({Field::source_id, Field::city, Field::status});
  for (const auto& [field, name] : mapping.field_map) out.present.set(static_cast<std::size_t>(field));
  if (!mapping.application_date_field.empty()) {
    out.present.set(static_cast<std::size_t>(Field::year)).set(static_cast<std::size_t>(Field::quarter));
  }

  const auto fetch = [&](Field field, const std::string& source_field, bool mandatory) -> std::optional<std::string> {
    const std::string* v = record.find(source_field);
    if (!v) {
      if (mandatory) {
        throw Error(ErrorCode::missing_mandatory_field, "record from '" + source.source_id + "' lacks field '" +
                                                            source_field + "' (mapped to " +
                                                            std::string(to_string(field)) + ")");
      }
      return std::nullopt;
    }
    std::string value = *v;
    if (auto cb = mapping.value_codebooks.find(field); cb != mapping.value_codebooks.end() && !value.empty()) {
      if (auto hit = cb->second.find(value); hit != cb->second.end()) {
        value = hit->second;
      } else if (report) {
        ++report->untranslated_codes[field];
      }
    }
    return value;
  };

  for (const auto& [field, source_field] : mapping.field_map) {
    const bool mandatory = field == Field::national_id || field == Field::year || field == Field::quarter;
    auto value = fetch(field, source_field, mandatory);
    if (!value) continue;
    switch (field) {
      case Field::year: {
        long long y = 0;
        if (!parse_int(*value, y)) {
          throw Error(ErrorCode::invalid_value, "record from '" + source.source_id + "' has year '" + *value + "'");
        }
        out.year = static_cast<int>(y);
        break;
      }
      case Field::quarter: {
        const auto q = parse_quarter(*value);
        if (!q) {
          throw Error(ErrorCode::invalid_value, "record from '" + source.source_id + "' has quarter '" + *value + "'");
        }
        out.quarter = *q;
        break;
      }
      default:
        *out.text(field) = std::move(*value);
    }
  }

  if (!mapping.application_date_field.empty()) {
    const std::string* d = record.find(mapping.application_date_field);
    if (!d) {
      throw Error(ErrorCode::missing_mandatory_field, "record from '" + source.source_id + "' lacks date field '" +
                                                          mapping.application_date_field + "'");
    }
    long long ymd = 0;
    if (d->size() != 8 || !parse_int(*d, ymd)) {
      throw Error(ErrorCode::invalid_value, "record from '" + source.source_id + "' has date '" + *d + "'");
    }
    const int month = static_cast<int>((ymd / 100) % 100);
    if (month < 1 || month > 12) {
      throw Error(ErrorCode::invalid_value, "record from '" + source.source_id + "' has date '" + *d + "'");
    }
    out.year = static_cast<int>(ymd / 10000);
    out.quarter = detail::quarter_of_month(month);
  }

  if (report) ++report->records_mapped;
  return out;
}

}  // namespace mpdw
