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

#include <array>
#include <bitset>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include "mpdw/common.hpp"

namespace mpdw {

enum class Quarter : std::uint8_t { Q1 = 1, Q2 = 2, Q3 = 3, Q4 = 4 };

inline std::string_view to_string(Quarter q) {
  static constexpr std::array<std::string_view, 4> kNames{"Q1", "Q2", "Q3", "Q4"};
  return kNames[static_cast<std::size_t>(q) - 1];
}

/// Accepts "Q1".."Q4" (any case, surrounding blanks ignored).
inline std::optional<Quarter> parse_quarter(std::string_view s) {
  const std::string folded = casefold(trim(s));
  if (folded.size() == 2 && folded[0] == 'q' && folded[1] >= '1' && folded[1] <= '4') {
    return static_cast<Quarter>(folded[1] - '0');
  }
  return std::nullopt;
}

enum class Status : std::uint8_t { seeker, directed };

inline std::string_view to_string(Status s) { return s == Status::seeker ? "seeker" : "directed"; }

/// Attributes of the unified applicant record. `status` is derived from
/// `sector` and never stored separately.
enum class Field : std::uint8_t {
  source_id,
  national_id,
  name,
  sex,
  district,
  congress,
  city,
  specialty,
  job_group,
  sector,
  preferred_sector,
  moahel,
  education_level,
  service_status,
  year,
  quarter,
  status,
};

inline constexpr std::size_t kFieldCount = 17;

inline constexpr std::array<Field, kFieldCount> kAllFields{
    Field::source_id,       Field::national_id, Field::name,           Field::sex,
    Field::district,        Field::congress,    Field::city,           Field::specialty,
    Field::job_group,       Field::sector,      Field::preferred_sector, Field::moahel,
    Field::education_level, Field::service_status, Field::year,        Field::quarter,
    Field::status,
};

inline std::string_view to_string(Field f) {
  static constexpr std::array<std::string_view, kFieldCount> kNames{
      "source_id", "national_id", "name",     "sex",       "district",       "congress",
      "city",      "specialty",   "job_group", "sector",   "preferred_sector", "moahel",
      "education_level", "service_status", "year", "quarter", "status",
  };
  return kNames[static_cast<std::size_t>(f)];
}

inline std::optional<Field> parse_field(std::string_view name) {
  for (Field f : kAllFields) {
    if (to_string(f) == name) return f;
  }
  return std::nullopt;
}

/// Fields that may legitimately be blank at the source and receive a fill
/// constant. Keys, the fixed city, the sector (which encodes status) and the
/// application period are not in this set.
inline constexpr std::array<Field, 10> kNullableFields{
    Field::name,      Field::sex,    Field::district,        Field::congress,
    Field::specialty, Field::job_group, Field::preferred_sector, Field::moahel,
    Field::education_level, Field::service_status,
};

inline bool is_nullable(Field f) {
  for (Field n : kNullableFields) {
    if (n == f) return true;
  }
  return false;
}

using FieldSet = std::bitset<kFieldCount>;

inline FieldSet all_fields() { return FieldSet{}.set(); }

inline FieldSet field_set(std::initializer_list<Field> fields) {
  FieldSet s;
  for (Field f : fields) s.set(static_cast<std::size_t>(f));
  return s;
}

struct CanonicalApplicant {
  std::string source_id;
  std::string national_id;
  std::string name;
  std::string sex;
  std::string district;
  std::string congress;
  std::string city;
  std::string specialty;
  std::string job_group;
  std::string sector;            // empty while the applicant is still seeking
  std::string preferred_sector;  // sector requested at application time
  std::string moahel;
  std::string education_level;
  std::string service_status;
  int year = 0;
  Quarter quarter = Quarter::Q1;
  FieldSet present = all_fields();

  Status status() const { return sector.empty() ? Status::seeker : Status::directed; }

  /// Sector member this applicant is counted under: the assigned sector once
  /// directed, the requested one while seeking.
  const std::string& sector_member() const { return sector.empty() ? preferred_sector : sector; }

  bool has(Field f) const { return present.test(static_cast<std::size_t>(f)); }

  std::string* text(Field f) {
    return const_cast<std::string*>(std::as_const(*this).text(f));
  }

  const std::string* text(Field f) const {
    switch (f) {
      case Field::source_id: return &source_id;
      case Field::national_id: return &national_id;
      case Field::name: return &name;
      case Field::sex: return &sex;
      case Field::district: return &district;
      case Field::congress: return &congress;
      case Field::city: return &city;
      case Field::specialty: return &specialty;
      case Field::job_group: return &job_group;
      case Field::sector: return &sector;
      case Field::preferred_sector: return &preferred_sector;
      case Field::moahel: return &moahel;
      case Field::education_level: return &education_level;
      case Field::service_status: return &service_status;
      case Field::year:
      case Field::quarter:
      case Field::status: return nullptr;
    }
    return nullptr;
  }

  std::string value(Field f) const {
    switch (f) {
      case Field::year: return std::to_string(year);
      case Field::quarter: return std::string(to_string(quarter));
      case Field::status: return std::string(to_string(status()));
      default: return *text(f);
    }
  }

  bool operator==(const CanonicalApplicant&) const = default;
};

/// Greatest (year, quarter) first; ties go to the smaller city, then the
/// smaller source id, then to a whole-record comparison so the choice never
/// depends on input order.
inline bool precedes_for_keep_latest(const CanonicalApplicant& a, const CanonicalApplicant& b) {
  const auto period = [](const CanonicalApplicant& r) {
    return std::make_pair(r.year, static_cast<int>(r.quarter));
  };
  if (period(a) != period(b)) return period(a) > period(b);
  if (a.city != b.city) return a.city < b.city;
  if (a.source_id != b.source_id) return a.source_id < b.source_id;
  for (Field f : kAllFields) {
    if (const auto* ta = a.text(f)) {
      if (*ta != *b.text(f)) return *ta < *b.text(f);
    }
  }
  return false;
}

// ---------------------------------------------------------------------------
// CSV form used for staging files, the generator's truth file and rejects.

/// Writes only the fields present in every record (the intersection), in
/// canonical order.
inline std::string applicants_to_csv(std::span<const CanonicalApplicant> records,
                                     FieldSet columns = all_fields()) {
  for (const auto& r : records) columns &= r.present;
  std::vector<Field> fields;
  std::vector<std::string> header;
  for (Field f : kAllFields) {
    if (columns.test(static_cast<std::size_t>(f))) {
      fields.push_back(f);
      header.emplace_back(to_string(f));
    }
  }
  std::string out;
  append_csv_row(out, header);
  std::vector<std::string> row(fields.size());
  for (const auto& r : records) {
    for (std::size_t i = 0; i < fields.size(); ++i) row[i] = r.value(fields[i]);
    append_csv_row(out, row);
  }
  return out;
}

inline std::vector<CanonicalApplicant> applicants_from_csv(std::string_view text) {
  const auto rows = parse_csv(text);
  std::vector<CanonicalApplicant> out;
  if (rows.empty()) return out;
  std::vector<Field> fields;
  FieldSet present;
  for (const auto& name : rows[0].fields) {
    const auto f = parse_field(name);
    if (!f) throw Error(ErrorCode::invalid_value, "unknown applicant column '" + name + "'");
    fields.push_back(*f);
    present.set(static_cast<std::size_t>(*f));
  }
  out.reserve(rows.size() - 1);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.fields.size() != fields.size()) {
      throw Error(ErrorCode::ragged_row, "applicant row on line " + std::to_string(row.line) +
                                             " has " + std::to_string(row.fields.size()) +
                                             " fields, expected " + std::to_string(fields.size()));
    }
    CanonicalApplicant a;
    a.present = present;
    std::optional<Status> status;
    for (std::size_t i = 0; i < fields.size(); ++i) {
      const std::string& v = row.fields[i];
      switch (fields[i]) {
        case Field::year: {
          long long y = 0;
          if (!parse_int(v, y)) {
            throw Error(ErrorCode::invalid_value,
                        "bad year '" + v + "' on line " + std::to_string(row.line));
          }
          a.year = static_cast<int>(y);
          break;
        }
        case Field::quarter: {
          const auto q = parse_quarter(v);
          if (!q) {
            throw Error(ErrorCode::invalid_value,
                        "bad quarter '" + v + "' on line " + std::to_string(row.line));
          }
          a.quarter = *q;
          break;
        }
        case Field::status:
          status = v == "directed" ? Status::directed : Status::seeker;
          break;
        default:
          *a.text(fields[i]) = v;
      }
    }
    if (status && a.has(Field::sector) && *status != a.status()) {
      throw Error(ErrorCode::invalid_value,
                  "status disagrees with sector on line " + std::to_string(row.line));
    }
    out.push_back(std::move(a));
  }
  return out;
}

}  // namespace mpdw
