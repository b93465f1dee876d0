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

// Star schema: six dimension tables with dense surrogate keys around one
// fact table of additive applicant counts.

#pragma once

#include <algorithm>
#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "mpdw/applicant.hpp"
#include "mpdw/common.hpp"

namespace mpdw {

enum class Dimension : std::uint8_t { city, sector, education_level, congress, service, time };

inline constexpr std::size_t kDimensionCount = 6;

inline constexpr std::array<Dimension, kDimensionCount> kDimensions{
    Dimension::city, Dimension::sector, Dimension::education_level,
    Dimension::congress, Dimension::service, Dimension::time,
};

inline std::size_t index_of(Dimension d) { return static_cast<std::size_t>(d); }

inline std::string_view to_string(Dimension d) {
  static constexpr std::array<std::string_view, kDimensionCount> kNames{
      "city", "sector", "education_level", "congress", "service", "time"};
  return kNames[index_of(d)];
}

inline std::optional<Dimension> parse_dimension(std::string_view s) {
  for (Dimension d : kDimensions) {
    if (to_string(d) == s) return d;
  }
  if (s == "edulevel") return Dimension::education_level;
  return std::nullopt;
}

/// Table names as they appear in the warehouse's dimension model.
inline std::string_view table_name(Dimension d) {
  static constexpr std::array<std::string_view, kDimensionCount> kNames{
      "City", "Sector", "EducationLevel", "Congress", "Service", "Time"};
  return kNames[index_of(d)];
}

inline std::string_view table_file(Dimension d) {
  static constexpr std::array<std::string_view, kDimensionCount> kFiles{
      "dim_city.csv", "dim_sector.csv", "dim_edulevel.csv", "dim_congress.csv", "dim_service.csv", "dim_time.csv"};
  return kFiles[index_of(d)];
}

inline constexpr std::string_view kFactFile = "fact.csv";
inline constexpr std::string_view kManifestFile = "manifest.txt";

inline std::vector<std::string> attribute_names(Dimension d) {
  switch (d) {
    case Dimension::time: return {"year", "quarter"};
    case Dimension::congress: return {"congress", "city"};
    default: return {};
  }
}

inline std::string time_key(int year, Quarter q) { return std::to_string(year) + "-" + std::string(to_string(q)); }

inline std::string congress_key(std::string_view city, std::string_view congress) {
  return std::string(city) + "/" + std::string(congress);
}

/// Natural key of the dimension member a record falls under.
inline std::string natural_key(Dimension d, const CanonicalApplicant& r) {
  switch (d) {
    case Dimension::city: return r.city;
    case Dimension::sector: return r.sector_member();
    case Dimension::education_level: return r.education_level;
    case Dimension::congress: return congress_key(r.city, r.congress);
    case Dimension::service: return r.service_status;
    case Dimension::time: return time_key(r.year, r.quarter);
  }
  return {};
}

inline std::vector<std::string> natural_attributes(Dimension d, const CanonicalApplicant& r) {
  switch (d) {
    case Dimension::time: return {std::to_string(r.year), std::string(to_string(r.quarter))};
    case Dimension::congress: return {r.congress, r.city};
    default: return {};
  }
}

using SurrogateId = std::uint32_t;

struct DimensionRow {
  SurrogateId id = 0;
  std::string natural_key;
  std::vector<std::string> attributes;  // values for attribute_names(dimension)

  bool operator==(const DimensionRow&) const = default;
};

class DimensionTable {
 public:
  DimensionTable() = default;
  explicit DimensionTable(Dimension d) : dimension_(d) {}

  Dimension dimension() const { return dimension_; }
  const std::vector<DimensionRow>& rows() const { return rows_; }
  std::size_t size() const { return rows_.size(); }
  bool empty() const { return rows_.empty(); }

  std::optional<SurrogateId> find(const std::string& key) const {
    const auto it = index_.find(key);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  const DimensionRow& row(SurrogateId id) const { return rows_.at(id - 1); }

  /// Appends with the next dense id. Throws if the key is already present.
  SurrogateId append(std::string key, std::vector<std::string> attributes = {}) {
    const auto id = static_cast<SurrogateId>(rows_.size() + 1);
    if (!index_.emplace(key, id).second) {
      throw Error(ErrorCode::integrity_violation,
                  std::string(table_name(dimension_)) + " already contains '" + key + "'");
    }
    rows_.push_back({id, std::move(key), std::move(attributes)});
    return id;
  }

  /// Restores a persisted row; ids are validated by check_integrity.
  void restore(DimensionRow row) {
    index_.emplace(row.natural_key, row.id);
    rows_.push_back(std::move(row));
  }

  bool operator==(const DimensionTable& o) const { return dimension_ == o.dimension_ && rows_ == o.rows_; }

 private:
  Dimension dimension_ = Dimension::city;
  std::vector<DimensionRow> rows_;
  std::unordered_map<std::string, SurrogateId> index_;
};

using FactKey = std::array<SurrogateId, kDimensionCount>;

struct FactRow {
  SurrogateId city_id = 0;
  SurrogateId sector_id = 0;
  SurrogateId edulevel_id = 0;
  SurrogateId cong_id = 0;
  SurrogateId service_id = 0;
  SurrogateId time_id = 0;
  std::uint64_t total_applicants = 0;
  std::uint64_t num_seekers = 0;
  std::uint64_t num_directed = 0;

  FactKey key() const { return {city_id, sector_id, edulevel_id, cong_id, service_id, time_id}; }

  static FactRow from_key(const FactKey& k) { return FactRow{k[0], k[1], k[2], k[3], k[4], k[5]}; }

  bool operator==(const FactRow&) const = default;
};

struct YearRange {
  int from = 0;
  int to = 0;

  int years() const { return to - from + 1; }
  bool contains(int y) const { return y >= from && y <= to; }
  bool operator==(const YearRange&) const = default;
};

struct SourceEntry {
  std::string source_id;
  std::size_t records = 0;

  bool operator==(const SourceEntry&) const = default;
};

struct SchemaMeta {
  std::string load_timestamp;
  YearRange years;
  std::vector<SourceEntry> sources;

  bool operator==(const SchemaMeta&) const = default;
};

using Dimensions = std::array<DimensionTable, kDimensionCount>;

struct StarSchema {
  Dimensions dimensions{DimensionTable(Dimension::city),     DimensionTable(Dimension::sector),
                        DimensionTable(Dimension::education_level), DimensionTable(Dimension::congress),
                        DimensionTable(Dimension::service),  DimensionTable(Dimension::time)};
  std::vector<FactRow> facts;  // sorted by key, one row per key
  SchemaMeta meta;

  const DimensionTable& dim(Dimension d) const { return dimensions[index_of(d)]; }

  bool operator==(const StarSchema&) const = default;
};

// ---------------------------------------------------------------------------
// Build

namespace detail {

inline Dimensions empty_dimensions() { return StarSchema{}.dimensions; }

inline void add_time_rows(DimensionTable& time, YearRange years) {
  for (int y = years.from; y <= years.to; ++y) {
    for (int q = 1; q <= 4; ++q) {
      const auto quarter = static_cast<Quarter>(q);
      if (!time.find(time_key(y, quarter))) {
        time.append(time_key(y, quarter), {std::to_string(y), std::string(to_string(quarter))});
      }
    }
  }
}

/// Appends every key not yet in `table`, new keys in sorted order.
inline void append_observed(DimensionTable& table, std::span<const CanonicalApplicant> records) {
  std::map<std::string, std::vector<std::string>> fresh;
  for (const auto& r : records) {
    auto key = natural_key(table.dimension(), r);
    if (table.find(key) || fresh.contains(key)) continue;
    fresh.emplace(std::move(key), natural_attributes(table.dimension(), r));
  }
  for (auto& [key, attrs] : fresh) table.append(key, std::move(attrs));
}

}  // namespace detail

/// Time holds every quarter of the range whatever the data; the other five
/// tables hold the distinct observed members with ids in sorted key order.
inline Dimensions build_dimensions(std::span<const CanonicalApplicant> records, YearRange years) {
  if (years.from > years.to) {
    throw Error(ErrorCode::empty_year_range,
                "year range " + std::to_string(years.from) + ".." + std::to_string(years.to) + " is empty");
  }
  Dimensions dims = detail::empty_dimensions();
  detail::add_time_rows(dims[index_of(Dimension::time)], years);
  for (Dimension d : kDimensions) {
    if (d != Dimension::time) detail::append_observed(dims[index_of(d)], records);
  }
  return dims;
}

inline std::vector<FactRow> load_facts(std::span<const CanonicalApplicant> records, const Dimensions& dims) {
  std::map<FactKey, FactRow> cells;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    FactKey key{};
    for (Dimension d : kDimensions) {
      const auto id = dims[index_of(d)].find(natural_key(d, r));
      if (!id) {
        throw Error(ErrorCode::unresolved_dimension_value,
                    "record " + std::to_string(i) + " (national_id '" + r.national_id + "') has " +
                        std::string(to_string(d)) + " '" + natural_key(d, r) + "' missing from " +
                        std::string(table_name(d)));
      }
      key[index_of(d)] = *id;
    }
    auto [it, _] = cells.try_emplace(key, FactRow::from_key(key));
    FactRow& f = it->second;
    ++f.total_applicants;
    if (r.status() == Status::directed) {
      ++f.num_directed;
    } else {
      ++f.num_seekers;
    }
  }
  std::vector<FactRow> facts;
  facts.reserve(cells.size());
  for (auto& [_, f] : cells) facts.push_back(f);
  return facts;
}

inline StarSchema build_schema(std::span<const CanonicalApplicant> records, YearRange years,
                               std::string load_timestamp = {}, std::vector<SourceEntry> sources = {}) {
  StarSchema s;
  s.dimensions = build_dimensions(records, years);
  s.facts = load_facts(records, s.dimensions);
  s.meta = {std::move(load_timestamp), years, std::move(sources)};
  return s;
}

/// Rebuilds facts from the full, re-deduplicated record set. Existing
/// surrogate ids are kept; unseen members are appended.
inline StarSchema refresh(const StarSchema& schema, std::span<const CanonicalApplicant> records,
                          std::optional<SchemaMeta> meta = std::nullopt) {
  StarSchema s = schema;
  for (Dimension d : kDimensions) {
    if (d != Dimension::time) detail::append_observed(s.dimensions[index_of(d)], records);
  }
  s.facts = load_facts(records, s.dimensions);
  if (meta) {
    meta->years = schema.meta.years;
    s.meta = std::move(*meta);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Integrity

/// Returns one message per violated invariant; empty means the schema is sound.
inline std::vector<std::string> check_integrity(const StarSchema& s) {
  std::vector<std::string> problems;
  for (Dimension d : kDimensions) {
    const auto& t = s.dim(d);
    std::set<std::string> keys;
    for (std::size_t i = 0; i < t.rows().size(); ++i) {
      const auto& row = t.rows()[i];
      if (row.id != i + 1) {
        problems.push_back(std::string(table_name(d)) + " row " + std::to_string(i) + " has id " +
                           std::to_string(row.id) + ", expected " + std::to_string(i + 1));
      }
      if (!keys.insert(row.natural_key).second) {
        problems.push_back(std::string(table_name(d)) + " repeats natural key '" + row.natural_key + "'");
      }
      if (row.attributes.size() != attribute_names(d).size()) {
        problems.push_back(std::string(table_name(d)) + " row " + std::to_string(row.id) + " has wrong attributes");
      }
    }
  }
  const auto& time = s.dim(Dimension::time);
  if (s.meta.years.from > s.meta.years.to) {
    problems.push_back("year range is empty");
  } else {
    if (time.size() != static_cast<std::size_t>(s.meta.years.years()) * 4) {
      problems.push_back("Time has " + std::to_string(time.size()) + " rows, expected " +
                         std::to_string(s.meta.years.years() * 4));
    }
    for (int y = s.meta.years.from; y <= s.meta.years.to; ++y) {
      for (int q = 1; q <= 4; ++q) {
        if (!time.find(time_key(y, static_cast<Quarter>(q)))) {
          problems.push_back("Time lacks " + time_key(y, static_cast<Quarter>(q)));
        }
      }
    }
  }
  const auto& congress = s.dim(Dimension::congress);
  const auto& city = s.dim(Dimension::city);
  for (const auto& row : congress.rows()) {
    if (row.attributes.size() == 2 && !city.find(row.attributes[1])) {
      problems.push_back("Congress '" + row.natural_key + "' names unknown city '" + row.attributes[1] + "'");
    }
  }

  std::set<FactKey> seen;
  for (std::size_t i = 0; i < s.facts.size(); ++i) {
    const auto& f = s.facts[i];
    const auto key = f.key();
    bool keys_ok = true;
    for (Dimension d : kDimensions) {
      const auto id = key[index_of(d)];
      if (id < 1 || id > s.dim(d).size()) {
        problems.push_back("fact " + std::to_string(i) + " has dangling " + std::string(to_string(d)) + " id " +
                           std::to_string(id));
        keys_ok = false;
      }
    }
    if (!seen.insert(key).second) problems.push_back("fact " + std::to_string(i) + " repeats a key tuple");
    if (f.total_applicants != f.num_seekers + f.num_directed) {
      problems.push_back("fact " + std::to_string(i) + " total != seekers + directed");
    }
    if (keys_ok) {
      const auto& cong = congress.row(f.cong_id);
      if (cong.attributes.size() == 2 && cong.attributes[1] != city.row(f.city_id).natural_key) {
        problems.push_back("fact " + std::to_string(i) + " city disagrees with its congress");
      }
    }
  }
  return problems;
}

inline std::uint64_t total_applicants(const StarSchema& s) {
  std::uint64_t n = 0;
  for (const auto& f : s.facts) n += f.total_applicants;
  return n;
}

/// Equality up to surrogate-id assignment: same member sets per dimension
/// and the same measures per natural-key tuple.
inline bool structurally_equal(const StarSchema& a, const StarSchema& b) {
  using NaturalFact = std::array<std::string, kDimensionCount>;
  const auto members = [](const StarSchema& s, Dimension d) {
    std::map<std::string, std::vector<std::string>> m;
    for (const auto& row : s.dim(d).rows()) m.emplace(row.natural_key, row.attributes);
    return m;
  };
  const auto facts = [](const StarSchema& s) {
    std::map<NaturalFact, std::array<std::uint64_t, 3>> m;
    for (const auto& f : s.facts) {
      NaturalFact k;
      const auto key = f.key();
      for (Dimension d : kDimensions) k[index_of(d)] = s.dim(d).row(key[index_of(d)]).natural_key;
      m.emplace(std::move(k), std::array<std::uint64_t, 3>{f.total_applicants, f.num_seekers, f.num_directed});
    }
    return m;
  };
  if (a.meta.years != b.meta.years) return false;
  for (Dimension d : kDimensions) {
    if (members(a, d) != members(b, d)) return false;
  }
  return facts(a) == facts(b);
}

// ---------------------------------------------------------------------------
// Persistence: one CSV per table plus a manifest of row counts and CRC-32s.

namespace detail {

inline std::string dimension_csv(const DimensionTable& t) {
  std::vector<std::string> header{"id", "natural_key"};
  for (auto& a : attribute_names(t.dimension())) header.push_back(std::move(a));
  std::string out;
  append_csv_row(out, header);
  for (const auto& row : t.rows()) {
    std::vector<std::string> fields{std::to_string(row.id), row.natural_key};
    fields.insert(fields.end(), row.attributes.begin(), row.attributes.end());
    append_csv_row(out, fields);
  }
  return out;
}

inline std::string fact_csv(std::span<const FactRow> facts) {
  std::string out =
      "city_id,sector_id,edulevel_id,cong_id,service_id,time_id,total_applicants,num_seekers,num_directed\n";
  for (const auto& f : facts) {
    std::ostringstream line;
    line << f.city_id << ',' << f.sector_id << ',' << f.edulevel_id << ',' << f.cong_id << ',' << f.service_id
         << ',' << f.time_id << ',' << f.total_applicants << ',' << f.num_seekers << ',' << f.num_directed << '\n';
    out += line.str();
  }
  return out;
}

inline std::uint64_t parse_count(const std::string& s, std::string_view what) {
  long long v = 0;
  if (!parse_int(s, v) || v < 0) throw Error(ErrorCode::corrupt_manifest, "bad " + std::string(what) + " '" + s + "'");
  return static_cast<std::uint64_t>(v);
}

}  // namespace detail

inline void persist(const StarSchema& s, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::io_error, "cannot create " + dir.string() + ": " + ec.message());

  std::ostringstream manifest;
  manifest << "mpdw-warehouse 1\n";
  manifest << "load_timestamp " << s.meta.load_timestamp << '\n';
  manifest << "year_range " << s.meta.years.from << ' ' << s.meta.years.to << '\n';
  for (const auto& src : s.meta.sources) manifest << "source " << src.source_id << ' ' << src.records << '\n';
  const auto emit = [&](std::string_view file, const std::string& body, std::size_t rows) {
    write_file(dir / file, body);
    manifest << "table " << file << ' ' << rows << ' ' << hex32(crc32_of(body)) << '\n';
  };
  for (Dimension d : kDimensions) emit(table_file(d), detail::dimension_csv(s.dim(d)), s.dim(d).size());
  emit(kFactFile, detail::fact_csv(s.facts), s.facts.size());
  write_file(dir / kManifestFile, manifest.str());
}

inline StarSchema load_schema(const std::filesystem::path& dir) {
  const std::string manifest = read_file(dir / kManifestFile);
  StarSchema s;
  std::map<std::string, std::pair<std::uint64_t, std::string>> tables;
  std::istringstream in(manifest);
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto parts = split(line, ' ');
    if (!header_seen) {
      if (parts.size() != 2 || parts[0] != "mpdw-warehouse" || parts[1] != "1") {
        throw Error(ErrorCode::corrupt_manifest, "unrecognized manifest header in " + (dir / kManifestFile).string());
      }
      header_seen = true;
    } else if (parts[0] == "load_timestamp") {
      s.meta.load_timestamp = line.size() > 15 ? line.substr(15) : std::string{};
    } else if (parts[0] == "year_range" && parts.size() == 3) {
      s.meta.years = {static_cast<int>(detail::parse_count(parts[1], "year")),
                      static_cast<int>(detail::parse_count(parts[2], "year"))};
    } else if (parts[0] == "source" && parts.size() == 3) {
      s.meta.sources.push_back({parts[1], static_cast<std::size_t>(detail::parse_count(parts[2], "record count"))});
    } else if (parts[0] == "table" && parts.size() == 4) {
      tables[parts[1]] = {detail::parse_count(parts[2], "row count"), parts[3]};
    } else {
      throw Error(ErrorCode::corrupt_manifest, "unrecognized manifest line '" + line + "'");
    }
  }
  if (!header_seen) throw Error(ErrorCode::corrupt_manifest, "empty manifest in " + dir.string());

  const auto read_table = [&](std::string_view file) {
    const auto it = tables.find(std::string(file));
    if (it == tables.end()) throw Error(ErrorCode::corrupt_manifest, "manifest does not list " + std::string(file));
    std::string body = read_file(dir / file);
    if (hex32(crc32_of(body)) != it->second.second) {
      throw Error(ErrorCode::corrupt_manifest, std::string(file) + " checksum mismatch");
    }
    auto rows = parse_csv(body);
    if (rows.empty() || rows.size() - 1 != it->second.first) {
      throw Error(ErrorCode::corrupt_manifest, std::string(file) + " row count disagrees with manifest");
    }
    return rows;
  };

  for (Dimension d : kDimensions) {
    const auto rows = read_table(table_file(d));
    const std::size_t width = 2 + attribute_names(d).size();
    auto& table = s.dimensions[index_of(d)];
    for (std::size_t i = 1; i < rows.size(); ++i) {
      const auto& f = rows[i].fields;
      if (f.size() != width) throw Error(ErrorCode::corrupt_manifest, std::string(table_file(d)) + " has a ragged row");
      DimensionRow row;
      row.id = static_cast<SurrogateId>(detail::parse_count(f[0], "surrogate id"));
      row.natural_key = f[1];
      row.attributes.assign(f.begin() + 2, f.end());
      table.restore(std::move(row));
    }
  }
  const auto rows = read_table(kFactFile);
  s.facts.reserve(rows.size() - 1);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& f = rows[i].fields;
    if (f.size() != 9) throw Error(ErrorCode::corrupt_manifest, "fact.csv has a ragged row");
    std::array<std::uint64_t, 9> v{};
    for (std::size_t c = 0; c < 9; ++c) v[c] = detail::parse_count(f[c], "fact value");
    s.facts.push_back({static_cast<SurrogateId>(v[0]), static_cast<SurrogateId>(v[1]),
                       static_cast<SurrogateId>(v[2]), static_cast<SurrogateId>(v[3]),
                       static_cast<SurrogateId>(v[4]), static_cast<SurrogateId>(v[5]), v[6], v[7], v[8]});
  }
  return s;
}

}  // namespace mpdw
