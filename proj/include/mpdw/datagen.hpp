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

// Synthetic heterogeneous city sources with planted duplicates, blanks and
// code variants, plus the clean ground truth the pipeline must recover.
//
// Randomness comes from std::mt19937_64, whose output sequence is fixed by
// the C++ standard (seeded with the single-integer constructor). Bounded
// draws use the multiply-high reduction floor(x * n / 2^64) and fractions
// use the top 53 bits, so a seed reproduces the same files on every
// conforming platform. std::*_distribution is deliberately avoided: its
// algorithms are implementation-defined.

#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "mpdw/applicant.hpp"
#include "mpdw/common.hpp"
#include "mpdw/preprocess.hpp"
#include "mpdw/source_ingest.hpp"
#include "mpdw/source_writers.hpp"
#include "mpdw/warehouse.hpp"

namespace mpdw {

class GenRng {
 public:
  explicit GenRng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform in [0, n).
  std::size_t below(std::size_t n) {
    return static_cast<std::size_t>((static_cast<unsigned __int128>(next()) * n) >> 64);
  }

  /// Uniform in [0, 1).
  double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  bool chance(double p) { return unit() < p; }

  template <typename T>
  const T& pick(const std::vector<T>& v) { return v[below(v.size())]; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

 private:
  std::mt19937_64 engine_;
};

struct CityTarget {
  std::string city;
  std::string source_id;
  SourceFormat format = SourceFormat::delimited;
  std::string encoding = "utf-8";
  std::size_t records = 0;       // used when target_bytes == 0
  std::size_t target_bytes = 0;  // size the emitted file should hit
  std::string file_name;
};

inline constexpr std::size_t kMiB = 1024 * 1024;

struct GenConfig {
  std::uint64_t seed = 20070101;
  std::vector<CityTarget> cities;
  double duplicate_rate = 0.05;
  double blank_rate = 0.03;
  double discrepancy_rate = 0.10;
  double directed_rate = 0.4;
  YearRange years{2000, 2006};
  std::size_t sectors = 8;
  std::size_t congresses_per_city = 4;
  std::size_t districts_per_congress = 3;
  std::vector<std::string> education_levels{"primary", "preparatory", "secondary",
                                            "diploma", "bachelor",    "postgraduate"};
  std::vector<std::string> service_categories{"completed", "exempted", "postponed"};
  std::string fill_constant = std::string(kDefaultFillConstant);
  DbfDate dbf_last_update{2007, 1, 1};
  std::string load_timestamp = "2007-01-01T00:00:00Z";

  /// Tripoli flat file, Misurata delimited export, Sirte DBF.
  static GenConfig with_record_counts(std::size_t tripoli, std::size_t misurata, std::size_t sirte,
                                      std::uint64_t seed = 20070101) {
    GenConfig c;
    c.seed = seed;
    c.cities = {{"Tripoli", "tripoli", SourceFormat::fixed_width, "latin1", tripoli, 0, "tripoli.txt"},
                {"Misurata", "misurata", SourceFormat::delimited, "utf-8", misurata, 0, "misurata.csv"},
                {"Sirte", "sirte", SourceFormat::dbf, "cp1256", sirte, 0, "sirte.dbf"}};
    return c;
  }

  /// Source sizes of the three case-study systems: 28.1 MB flat file,
  /// 15.56 MB database export, 6.85 MB DBF (1 MB = 2^20 bytes).
  static GenConfig full_scale(std::uint64_t seed = 20070101) {
    GenConfig c = with_record_counts(0, 0, 0, seed);
    c.cities[0].target_bytes = static_cast<std::size_t>(std::llround(28.1 * kMiB));
    c.cities[1].target_bytes = static_cast<std::size_t>(std::llround(15.56 * kMiB));
    c.cities[2].target_bytes = static_cast<std::size_t>(std::llround(6.85 * kMiB));
    return c;
  }

  void validate() const {
    for (double r : {duplicate_rate, blank_rate, discrepancy_rate, directed_rate}) {
      if (!(r >= 0.0 && r <= 1.0)) throw Error(ErrorCode::config_error, "generator rates must lie in [0, 1]");
    }
    if (cities.empty()) throw Error(ErrorCode::config_error, "generator needs at least one city");
    if (sectors < 1 || congresses_per_city < 1 || districts_per_congress < 1 || education_levels.empty() ||
        service_categories.empty()) {
      throw Error(ErrorCode::config_error, "generator cardinalities must be >= 1");
    }
    if (years.from > years.to) throw Error(ErrorCode::empty_year_range, "generator year range is empty");
    std::set<std::string> ids;
    for (const auto& c : cities) {
      if (!ids.insert(c.source_id).second || c.city.empty()) {
        throw Error(ErrorCode::config_error, "generator cities need distinct source ids and names");
      }
    }
  }
};

struct PlantedBlank {
  std::string source_id;
  std::size_t row = 0;  // 0-based record index in the source file
  Field field = Field::name;
};

struct PlantedVariant {
  std::string source_id;
  std::size_t row = 0;
  Field field = Field::sex;
  std::string value;      // as written to the source
  std::string canonical;  // what normalization must recover
};

struct PlantedDuplicate {
  std::string national_id;
  std::vector<std::string> source_ids;  // every source holding the id
  std::string survivor;                 // source id of the record dedup keeps
};

/// Exact counters the preprocessing stages must report on the generated
/// sources, plus the list of every planted corruption.
struct TruthManifest {
  std::size_t input_records = 0;
  std::size_t duplicates_removed = 0;
  std::map<Field, std::size_t> values_filled;
  std::map<Field, std::size_t> values_normalized;
  std::size_t records_generalized = 0;
  std::size_t unknown_hierarchy_values = 0;
  std::vector<PlantedDuplicate> duplicates;
  std::vector<PlantedBlank> blanks;
  std::vector<PlantedVariant> variants;

  std::string to_text() const {
    std::ostringstream os;
    os << "input_records " << input_records << '\n';
    os << "duplicates_removed " << duplicates_removed << '\n';
    for (const auto& [f, n] : values_filled) os << "values_filled " << to_string(f) << ' ' << n << '\n';
    for (const auto& [f, n] : values_normalized) os << "values_normalized " << to_string(f) << ' ' << n << '\n';
    os << "records_generalized " << records_generalized << '\n';
    os << "unknown_hierarchy_values " << unknown_hierarchy_values << '\n';
    for (const auto& d : duplicates) {
      os << "duplicate " << d.national_id << ' ' << d.survivor;
      for (const auto& s : d.source_ids) os << ' ' << s;
      os << '\n';
    }
    for (const auto& b : blanks) os << "blank " << b.source_id << ' ' << b.row << ' ' << to_string(b.field) << '\n';
    for (const auto& v : variants) {
      os << "variant " << v.source_id << ' ' << v.row << ' ' << to_string(v.field) << " \"" << v.value << "\" "
         << v.canonical << '\n';
    }
    return os.str();
  }

  /// Reads back the counter lines; corruption lists are informational.
  static TruthManifest counters_from_text(std::string_view text) {
    TruthManifest m;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
      const auto parts = split(line, ' ');
      long long n = 0;
      if (parts.size() == 2 && parse_int(parts[1], n)) {
        if (parts[0] == "input_records") m.input_records = static_cast<std::size_t>(n);
        if (parts[0] == "duplicates_removed") m.duplicates_removed = static_cast<std::size_t>(n);
        if (parts[0] == "records_generalized") m.records_generalized = static_cast<std::size_t>(n);
        if (parts[0] == "unknown_hierarchy_values") m.unknown_hierarchy_values = static_cast<std::size_t>(n);
      } else if (parts.size() == 3 && parse_int(parts[2], n)) {
        const auto f = parse_field(parts[1]);
        if (!f) continue;
        if (parts[0] == "values_filled") m.values_filled[*f] = static_cast<std::size_t>(n);
        if (parts[0] == "values_normalized") m.values_normalized[*f] = static_cast<std::size_t>(n);
      }
    }
    return m;
  }
};

struct GeneratedSource {
  SourceSpec spec;
  std::string file_name;
  std::vector<std::string> field_names;  // column order in the file
  std::vector<RawRecord> raw;            // logical records as written
  std::string bytes;                     // file contents
};

struct GenResult {
  GenConfig config;
  std::vector<GeneratedSource> sources;
  std::vector<CanonicalApplicant> truth;  // clean, deduplicated, generalized; sorted by national_id
  TruthManifest manifest;
  ConceptHierarchy hierarchy;
  std::map<Field, Codebook> codebooks;  // entry-discrepancy normalization
};

// ---------------------------------------------------------------------------

namespace gen_detail {

inline const std::vector<std::string>& sector_pool() {
  static const std::vector<std::string> kPool{"Health",   "Education", "Oil and Gas", "Agriculture",
                                              "Industry", "Commerce",  "Transport",   "Public Works",
                                              "Tourism",  "Finance",   "Telecom",     "Security"};
  return kPool;
}

inline const std::vector<std::string>& specialty_pool() {
  static const std::vector<std::string> kPool{"Accounting",  "Nursing",       "Civil Engineering", "Teaching",
                                              "Electrician", "Mechanics",     "Computer Science",  "Law",
                                              "Pharmacy",    "Administration", "Chemistry",        "Carpentry"};
  return kPool;
}

inline const std::vector<std::string>& job_group_pool() {
  static const std::vector<std::string> kPool{"Technical", "Clerical", "Professional", "Manual",
                                              "Services",  "Managerial", "Medical",    "Teaching"};
  return kPool;
}

inline const std::vector<std::string>& moahel_pool() {
  static const std::vector<std::string> kPool{"None", "Basic Certificate", "Secondary Certificate",
                                              "Vocational Diploma", "Higher Diploma", "University Degree"};
  return kPool;
}

inline const std::vector<std::string>& first_names() {
  static const std::vector<std::string> kPool{"Ahmed",  "Mohamed", "Ali",    "Omar",  "Salem", "Khaled", "Youssef",
                                              "Ibrahim", "Fatima", "Aisha",  "Mariam", "Salma", "Huda",  "Nour",
                                              "Amal",   "Khadija", "Hassan", "Tarek", "Naima", "Rania"};
  return kPool;
}

inline const std::vector<std::string>& last_names() {
  static const std::vector<std::string> kPool{"Alasta", "Enaba",  "Benali", "Mansour",  "Ghariani", "Zawi",
                                              "Fituri", "Masrati", "Sharif", "Bashir",  "Tarhuni",  "Obeidi",
                                              "Warfalli", "Zintani", "Magarief", "Misrati", "Kikhia", "Gadi"};
  return kPool;
}

inline const std::map<std::string, std::string>& abbreviations() {
  static const std::map<std::string, std::string> kAbbrev{
      {"male", "M"},        {"female", "F"},         {"primary", "PRI"},  {"preparatory", "PREP"},
      {"secondary", "SEC"}, {"diploma", "DIP"},      {"bachelor", "BSC"}, {"postgraduate", "PG"},
      {"completed", "CMP"}, {"exempted", "EXM"},     {"postponed", "PPN"}};
  return kAbbrev;
}

inline std::string city_code(const std::string& city) {
  std::string code;
  for (char c : city) {
    if (code.size() == 3) break;
    if (std::isalpha(static_cast<unsigned char>(c))) code += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  }
  return code;
}

inline std::string upper(std::string s) {
  for (char& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

inline std::string title(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

struct CityPlan {
  const CityTarget* target = nullptr;
  std::vector<std::string> districts;
  std::size_t count = 0;
  std::size_t duplicates = 0;
};

// Native layouts of the three legacy systems.

inline std::vector<FieldDescriptor> tripoli_layout() {
  return packed_layout({{"NATID", FieldKind::character, 0, 10, 0},
                        {"NAME", FieldKind::character, 0, 28, 0},
                        {"SEX", FieldKind::character, 0, 8, 0},
                        {"DISTRICT", FieldKind::character, 0, 12, 0},
                        {"SPECIALTY", FieldKind::character, 0, 20, 0},
                        {"JOBGRP", FieldKind::character, 0, 16, 0},
                        {"SECTOR", FieldKind::character, 0, 16, 0},
                        {"PREFSECT", FieldKind::character, 0, 16, 0},
                        {"MOAHEL", FieldKind::character, 0, 22, 0},
                        {"EDULEVEL", FieldKind::character, 0, 14, 0},
                        {"SERVICE", FieldKind::character, 0, 12, 0},
                        {"YEAR", FieldKind::numeric, 0, 4, 0},
                        {"QTR", FieldKind::character, 0, 2, 0}});
}

inline std::vector<FieldDescriptor> sirte_layout() {
  return packed_layout({{"NAT_ID", FieldKind::character, 0, 10, 0},
                        {"NAME", FieldKind::character, 0, 28, 0},
                        {"SEX", FieldKind::character, 0, 1, 0},
                        {"DISTRICT", FieldKind::character, 0, 12, 0},
                        {"SPECIALTY", FieldKind::character, 0, 20, 0},
                        {"JOB_GROUP", FieldKind::character, 0, 16, 0},
                        {"SECTOR", FieldKind::character, 0, 16, 0},
                        {"PREF_SECT", FieldKind::character, 0, 16, 0},
                        {"MOAHEL", FieldKind::character, 0, 22, 0},
                        {"EDU_LEVEL", FieldKind::character, 0, 14, 0},
                        {"SERVICE", FieldKind::character, 0, 12, 0},
                        {"APP_DATE", FieldKind::date, 0, 8, 0}});
}

inline std::vector<std::string> misurata_columns() {
  return {"app_id",   "full_name", "gender", "district", "specialty",    "job_group",  "sector",
          "pref_sector", "moahel", "edu_code", "service_code", "app_year", "app_quarter"};
}

/// Source field, per format, for each canonical text attribute.
inline std::string source_field(SourceFormat fmt, Field f) {
  static const std::map<Field, std::array<const char*, 3>> kNames{
      // fixed_width, delimited, dbf
      {Field::national_id, {"NATID", "app_id", "NAT_ID"}},
      {Field::name, {"NAME", "full_name", "NAME"}},
      {Field::sex, {"SEX", "gender", "SEX"}},
      {Field::district, {"DISTRICT", "district", "DISTRICT"}},
      {Field::specialty, {"SPECIALTY", "specialty", "SPECIALTY"}},
      {Field::job_group, {"JOBGRP", "job_group", "JOB_GROUP"}},
      {Field::sector, {"SECTOR", "sector", "SECTOR"}},
      {Field::preferred_sector, {"PREFSECT", "pref_sector", "PREF_SECT"}},
      {Field::moahel, {"MOAHEL", "moahel", "MOAHEL"}},
      {Field::education_level, {"EDULEVEL", "edu_code", "EDU_LEVEL"}},
      {Field::service_status, {"SERVICE", "service_code", "SERVICE"}},
      {Field::year, {"YEAR", "app_year", ""}},
      {Field::quarter, {"QTR", "app_quarter", ""}},
  };
  const auto& names = kNames.at(f);
  switch (fmt) {
    case SourceFormat::fixed_width: return names[0];
    case SourceFormat::delimited: return names[1];
    case SourceFormat::dbf: return names[2];
  }
  return {};
}

inline constexpr std::array<Field, 11> kSourceTextFields{
    Field::national_id, Field::name,           Field::sex,           Field::district,
    Field::specialty,   Field::job_group,      Field::sector,        Field::preferred_sector,
    Field::moahel,      Field::education_level, Field::service_status,
};

inline constexpr std::array<Field, 9> kBlankable{
    Field::name,      Field::sex,    Field::district,        Field::specialty,     Field::job_group,
    Field::preferred_sector, Field::moahel, Field::education_level, Field::service_status,
};

inline constexpr std::array<Field, 3> kCoded{Field::sex, Field::education_level, Field::service_status};

/// Codes each system uses in place of canonical spellings.
inline std::map<Field, Codebook> source_codebooks(SourceFormat fmt, const GenConfig& cfg) {
  std::map<Field, Codebook> books;
  if (fmt == SourceFormat::delimited) {
    for (std::size_t i = 0; i < cfg.education_levels.size(); ++i) {
      books[Field::education_level][std::to_string(i + 1)] = cfg.education_levels[i];
    }
    for (std::size_t i = 0; i < cfg.service_categories.size(); ++i) {
      books[Field::service_status][std::to_string(i + 1)] = cfg.service_categories[i];
    }
    for (int q = 1; q <= 4; ++q) books[Field::quarter][std::to_string(q)] = "Q" + std::to_string(q);
  } else if (fmt == SourceFormat::dbf) {
    books[Field::sex] = {{"1", "male"}, {"2", "female"}};
  }
  return books;
}

inline std::string encode_code(const std::map<Field, Codebook>& books, Field f, const std::string& canonical) {
  const auto it = books.find(f);
  if (it == books.end()) return canonical;
  for (const auto& [code, value] : it->second) {
    if (value == canonical) return code;
  }
  return canonical;
}

inline SourceSpec make_spec(const CityTarget& t, const GenConfig& cfg) {
  SourceSpec s;
  s.source_id = t.source_id;
  s.city = t.city;
  s.format = t.format;
  s.encoding = t.encoding;
  s.delimiter = ',';
  s.has_header = true;
  if (t.format == SourceFormat::fixed_width) s.layout = tripoli_layout();
  for (Field f : kSourceTextFields) s.mapping.field_map[f] = source_field(t.format, f);
  if (t.format == SourceFormat::dbf) {
    s.mapping.application_date_field = "APP_DATE";
  } else {
    s.mapping.field_map[Field::year] = source_field(t.format, Field::year);
    s.mapping.field_map[Field::quarter] = source_field(t.format, Field::quarter);
  }
  s.mapping.value_codebooks = source_codebooks(t.format, cfg);
  return s;
}

inline std::vector<std::string> field_names_for(const SourceSpec& spec) {
  switch (spec.format) {
    case SourceFormat::fixed_width: {
      std::vector<std::string> n;
      for (const auto& f : spec.layout) n.push_back(f.name);
      return n;
    }
    case SourceFormat::dbf: {
      std::vector<std::string> n;
      for (const auto& f : sirte_layout()) n.push_back(f.name);
      return n;
    }
    case SourceFormat::delimited: return misurata_columns();
  }
  return {};
}

/// The generated application in canonical spelling (before corruption).
struct Application {
  CanonicalApplicant clean;
  int month = 1;
  int day = 1;
};

/// Writes a canonical application into the source's native fields.
inline RawRecord to_raw(const CanonicalApplicant& a, int month, int day, const SourceSpec& spec,
                        const std::shared_ptr<const std::vector<std::string>>& names) {
  RawRecord r;
  r.source_id = spec.source_id;
  r.names = names;
  r.values.assign(names->size(), std::string{});
  const auto set = [&](const std::string& field, std::string value) {
    for (std::size_t i = 0; i < names->size(); ++i) {
      if ((*names)[i] == field) {
        r.values[i] = std::move(value);
        return;
      }
    }
  };
  for (Field f : kSourceTextFields) {
    const std::string& v = *a.text(f);
    set(source_field(spec.format, f), encode_code(spec.mapping.value_codebooks, f, v));
  }
  if (spec.format == SourceFormat::dbf) {
    char date[16];
    std::snprintf(date, sizeof date, "%04d%02d%02d", a.year, month, day);
    set("APP_DATE", date);
  } else {
    set(source_field(spec.format, Field::year), std::to_string(a.year));
    set(source_field(spec.format, Field::quarter),
        encode_code(spec.mapping.value_codebooks, Field::quarter, std::string(to_string(a.quarter))));
  }
  return r;
}

inline std::size_t field_width(const SourceSpec& spec, const std::string& source_name) {
  const auto layout = spec.format == SourceFormat::dbf ? sirte_layout() : spec.layout;
  for (const auto& f : layout) {
    if (f.name == source_name) return f.length;
  }
  return std::string::npos;  // delimited: unbounded
}

inline std::size_t delimited_row_bytes(const RawRecord& r) {
  std::string row;
  append_csv_row(row, r.values);
  return row.size();
}

inline std::string& raw_value(RawRecord& r, const std::string& name) {
  for (std::size_t i = 0; i < r.names->size(); ++i) {
    if ((*r.names)[i] == name) return r.values[i];
  }
  throw Error(ErrorCode::invalid_value, "no field " + name);
}

/// True when record a wins the keep-latest rule over b.
inline bool wins(const CanonicalApplicant& a, const CanonicalApplicant& b) {
  if (a.year != b.year) return a.year > b.year;
  if (a.quarter != b.quarter) return a.quarter > b.quarter;
  if (a.city != b.city) return a.city < b.city;
  return a.source_id < b.source_id;
}

}  // namespace gen_detail

class Generator {
 public:
  explicit Generator(GenConfig config) : cfg_(std::move(config)), rng_(cfg_.seed) { cfg_.validate(); }

  GenResult run() {
    using namespace gen_detail;
    GenResult out;
    out.config = cfg_;
    build_reference(out);

    // Sources and per-city record counts.
    std::vector<CityPlan> plans(cfg_.cities.size());
    for (std::size_t c = 0; c < cfg_.cities.size(); ++c) {
      GeneratedSource src;
      src.spec = make_spec(cfg_.cities[c], cfg_);
      src.file_name = cfg_.cities[c].file_name.empty() ? cfg_.cities[c].source_id + ".dat" : cfg_.cities[c].file_name;
      src.field_names = field_names_for(src.spec);
      out.sources.push_back(std::move(src));
      plans[c].target = &cfg_.cities[c];
      plans[c].districts = districts_[c];
    }
    for (std::size_t c = 0; c < plans.size(); ++c) {
      plans[c].count = plan_count(c, out.sources[c]);
      plans[c].duplicates = static_cast<std::size_t>(std::llround(cfg_.duplicate_rate * static_cast<double>(plans[c].count)));
    }

    // Originals, one person each.
    std::vector<std::vector<Application>> apps(plans.size());
    std::vector<std::vector<std::size_t>> originals(plans.size());
    for (std::size_t c = 0; c < plans.size(); ++c) {
      for (std::size_t i = 0; i + plans[c].duplicates < plans[c].count; ++i) {
        apps[c].push_back(new_application(c, new_national_id(), nullptr));
        originals[c].push_back(apps[c].size() - 1);
      }
    }
    // Cross-city duplicates: the same person applying again elsewhere.
    std::set<std::pair<std::size_t, std::size_t>> used;
    std::map<std::string, std::vector<std::pair<std::size_t, std::size_t>>> dup_groups;
    for (std::size_t c = 0; c < plans.size(); ++c) {
      std::vector<std::pair<std::size_t, std::size_t>> pool;
      for (std::size_t o = 0; o < plans.size(); ++o) {
        if (o == c) continue;
        for (std::size_t i : originals[o]) {
          if (!used.contains({o, i})) pool.emplace_back(o, i);
        }
      }
      if (pool.size() < plans[c].duplicates) {
        throw Error(ErrorCode::config_error, "duplicate rate too high for the other cities' record counts");
      }
      for (std::size_t k = 0; k < plans[c].duplicates; ++k) {
        const std::size_t j = k + rng_.below(pool.size() - k);
        std::swap(pool[k], pool[j]);
        const auto [o, i] = pool[k];
        used.insert({o, i});
        const CanonicalApplicant& person = apps[o][i].clean;
        apps[c].push_back(new_application(c, person.national_id, &person));
        dup_groups[person.national_id].emplace_back(o, i);
        dup_groups[person.national_id].emplace_back(c, apps[c].size() - 1);
      }
    }
    for (auto& v : apps) rng_.shuffle(v);

    // Plant corruptions and encode the sources.
    std::vector<std::vector<CanonicalApplicant>> clean(plans.size());
    for (std::size_t c = 0; c < plans.size(); ++c) {
      encode_city(c, apps[c], out.sources[c], clean[c], out.manifest);
    }

    // Truth: keep-latest survivor per national id.
    std::map<std::string, const CanonicalApplicant*> best;
    std::map<std::string, std::vector<std::string>> holders;
    std::size_t input = 0;
    for (const auto& city : clean) {
      for (const auto& r : city) {
        ++input;
        holders[r.national_id].push_back(r.source_id);
        auto [it, inserted] = best.emplace(r.national_id, &r);
        if (!inserted && wins(r, *it->second)) it->second = &r;
      }
    }
    out.manifest.input_records = input;
    out.manifest.duplicates_removed = input - best.size();
    for (const auto& [id, rec] : best) {
      out.truth.push_back(*rec);
      if (rec->congress == cfg_.fill_constant && rec->district == cfg_.fill_constant) {
        ++out.manifest.unknown_hierarchy_values;
      } else {
        ++out.manifest.records_generalized;
      }
      if (holders[id].size() > 1) {
        auto sources = holders[id];
        std::sort(sources.begin(), sources.end());
        out.manifest.duplicates.push_back({id, sources, rec->source_id});
      }
    }
    for (auto& s : out.sources) {
      switch (s.spec.format) {
        case SourceFormat::fixed_width: s.bytes = encode_fixed_width(s.raw, s.spec.layout, s.spec.encoding); break;
        case SourceFormat::delimited:
          s.bytes = encode_delimited(s.raw, s.field_names, s.spec.delimiter, s.spec.has_header, s.spec.encoding);
          break;
        case SourceFormat::dbf: s.bytes = encode_dbf(s.raw, sirte_layout(), s.spec.encoding, cfg_.dbf_last_update); break;
      }
    }
    return out;
  }

 private:
  void build_reference(GenResult& out) {
    using namespace gen_detail;
    for (std::size_t i = 0; i < cfg_.sectors; ++i) {
      sectors_.push_back(i < sector_pool().size() ? sector_pool()[i] : "Sector " + std::to_string(i + 1));
    }
    out.hierarchy = ConceptHierarchy({"district", "congress", "city"});
    districts_.resize(cfg_.cities.size());
    for (std::size_t c = 0; c < cfg_.cities.size(); ++c) {
      const std::string code = city_code(cfg_.cities[c].city) + std::to_string(c);
      for (std::size_t g = 1; g <= cfg_.congresses_per_city; ++g) {
        const std::string congress = code + "-C" + std::to_string(g);
        out.hierarchy.add("congress", congress, cfg_.cities[c].city);
        for (std::size_t d = 1; d <= cfg_.districts_per_congress; ++d) {
          const std::string district = congress + "-D" + std::to_string(d);
          out.hierarchy.add("district", district, congress);
          districts_[c].push_back(district);
          congress_of_[district] = congress;
        }
      }
    }
    for (Field f : kCoded) {
      auto& book = out.codebooks[f];
      const auto& values = f == Field::sex ? std::vector<std::string>{"male", "female"}
                           : f == Field::education_level ? cfg_.education_levels
                                                         : cfg_.service_categories;
      for (const auto& v : values) {
        book[v] = v;
        if (auto a = abbreviations().find(v); a != abbreviations().end()) book[a->second] = v;
      }
    }
    codebooks_ = out.codebooks;
  }

  std::string new_national_id() {
    while (true) {
      const std::string id = std::to_string(1000000000ull + rng_.below(9000000000ull));
      if (ids_.insert(id).second) return id;
    }
  }

  gen_detail::Application new_application(std::size_t city, std::string national_id, const CanonicalApplicant* person) {
    using namespace gen_detail;
    Application a;
    CanonicalApplicant& r = a.clean;
    r.source_id = cfg_.cities[city].source_id;
    r.city = cfg_.cities[city].city;
    r.national_id = std::move(national_id);
    if (person) {
      r.name = person->name;
      r.sex = person->sex;
      r.education_level = person->education_level;
      r.moahel = person->moahel;
      r.specialty = person->specialty;
    } else {
      r.name = rng_.pick(first_names()) + " " + rng_.pick(last_names());
      r.sex = rng_.chance(0.5) ? "male" : "female";
      r.education_level = rng_.pick(cfg_.education_levels);
      r.moahel = rng_.pick(moahel_pool());
      r.specialty = rng_.pick(specialty_pool());
    }
    r.district = rng_.pick(districts_[city]);
    r.congress = congress_of_.at(r.district);
    r.job_group = rng_.pick(job_group_pool());
    r.preferred_sector = rng_.pick(sectors_);
    r.service_status = rng_.pick(cfg_.service_categories);
    if (rng_.chance(cfg_.directed_rate)) r.sector = rng_.chance(0.7) ? r.preferred_sector : rng_.pick(sectors_);
    r.year = cfg_.years.from + static_cast<int>(rng_.below(static_cast<std::size_t>(cfg_.years.years())));
    a.month = 1 + static_cast<int>(rng_.below(12));
    a.day = 1 + static_cast<int>(rng_.below(28));
    r.quarter = static_cast<Quarter>((a.month - 1) / 3 + 1);
    return a;
  }

  /// Record count for a city, from an explicit count or a byte target.
  std::size_t plan_count(std::size_t c, const GeneratedSource& src) {
    using namespace gen_detail;
    const CityTarget& t = cfg_.cities[c];
    if (t.target_bytes == 0) return t.records;
    std::size_t per_record = 0;
    std::size_t overhead = 0;
    switch (t.format) {
      case SourceFormat::fixed_width: per_record = layout_extent(src.spec.layout) + 1; break;
      case SourceFormat::dbf: {
        per_record = 1;
        for (const auto& f : sirte_layout()) per_record += f.length;
        overhead = dbf::kHeaderPrefix + dbf::kDescriptorSize * sirte_layout().size() + 2;
        break;
      }
      case SourceFormat::delimited: {
        // Average row size from a sample drawn on a side stream, so the main
        // stream is unaffected by the sample size.
        GenRng side(cfg_.seed ^ (0x9E3779B97F4A7C15ull * (c + 1)));
        std::swap(rng_, side);
        auto names = std::make_shared<const std::vector<std::string>>(src.field_names);
        std::size_t bytes = 0;
        constexpr std::size_t kSample = 2000;
        const auto saved_ids = ids_;
        for (std::size_t i = 0; i < kSample; ++i) {
          const auto a = new_application(c, new_national_id(), nullptr);
          bytes += delimited_row_bytes(to_raw(a.clean, a.month, a.day, src.spec, names));
        }
        ids_ = saved_ids;
        std::swap(rng_, side);
        per_record = (bytes + kSample / 2) / kSample;
        std::string header;
        append_csv_row(header, src.field_names);
        overhead = header.size();
        break;
      }
    }
    if (t.target_bytes < overhead + per_record) {
      throw Error(ErrorCode::unsatisfiable_size, "target of " + std::to_string(t.target_bytes) + " bytes for '" +
                                                     t.source_id + "' cannot hold one record");
    }
    return (t.target_bytes - overhead + per_record / 2) / per_record;
  }

  std::string variant_of(const std::string& canonical, std::size_t width, const std::string& written) {
    using namespace gen_detail;
    std::vector<std::string> options;
    if (auto a = abbreviations().find(canonical); a != abbreviations().end()) {
      options.push_back(a->second);
      options.push_back(casefold(a->second));
    }
    options.push_back(upper(canonical));
    options.push_back(title(canonical));
    options.push_back(" " + canonical);
    std::vector<std::string> fitting;
    for (auto& o : options) {
      if (o.size() <= width && o != written && o != canonical) fitting.push_back(std::move(o));
    }
    if (fitting.empty()) return {};
    return rng_.pick(fitting);
  }

  void encode_city(std::size_t c, std::vector<gen_detail::Application>& apps, GeneratedSource& src,
                   std::vector<CanonicalApplicant>& clean, TruthManifest& manifest) {
    using namespace gen_detail;
    const std::size_t n = apps.size();
    auto names = std::make_shared<const std::vector<std::string>>(src.field_names);
    const auto take = [&](double rate) {
      const auto k = static_cast<std::size_t>(std::llround(rate * static_cast<double>(n)));
      std::vector<std::size_t> rows(n);
      for (std::size_t i = 0; i < n; ++i) rows[i] = i;
      for (std::size_t i = 0; i < k; ++i) std::swap(rows[i], rows[i + rng_.below(n - i)]);
      rows.resize(k);
      std::sort(rows.begin(), rows.end());
      return rows;
    };
    const auto variant_rows = take(cfg_.discrepancy_rate);
    const auto blank_rows = take(cfg_.blank_rate);
    std::map<std::size_t, Field> variant_field;

    src.raw.reserve(n);
    clean.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& a = apps[i];
      src.raw.push_back(to_raw(a.clean, a.month, a.day, src.spec, names));
      clean.push_back(a.clean);
    }
    for (std::size_t row : variant_rows) {
      // Try the coded fields in a random rotation until one admits a variant.
      const std::size_t start = rng_.below(kCoded.size());
      for (std::size_t k = 0; k < kCoded.size(); ++k) {
        const Field f = kCoded[(start + k) % kCoded.size()];
        const std::string sname = source_field(src.spec.format, f);
        std::string& written = raw_value(src.raw[row], sname);
        const std::string& canonical = *clean[row].text(f);
        std::string v = variant_of(canonical, field_width(src.spec, sname), written);
        if (v.empty()) continue;
        written = v;
        variant_field[row] = f;
        manifest.variants.push_back({src.spec.source_id, row, f, v, canonical});
        ++manifest.values_normalized[f];
        break;
      }
    }
    for (std::size_t row : blank_rows) {
      std::vector<Field> choices;
      for (Field f : kBlankable) {
        const auto it = variant_field.find(row);
        if (it == variant_field.end() || it->second != f) choices.push_back(f);
      }
      const Field f = rng_.pick(choices);
      raw_value(src.raw[row], source_field(src.spec.format, f)).clear();
      *clean[row].text(f) = cfg_.fill_constant;
      if (f == Field::district) clean[row].congress = cfg_.fill_constant;
      manifest.blanks.push_back({src.spec.source_id, row, f});
      ++manifest.values_filled[f];
    }
    (void)c;
  }

  GenConfig cfg_;
  GenRng rng_;
  std::vector<std::string> sectors_;
  std::vector<std::vector<std::string>> districts_;
  std::map<std::string, std::string> congress_of_;
  std::unordered_set<std::string> ids_;
  std::map<Field, Codebook> codebooks_;
};

inline GenResult generate(const GenConfig& config) { return Generator(config).run(); }

/// Writes the sources, truth.csv, truth_manifest.txt and hierarchy.csv.
inline void write_generated(const GenResult& g, const std::filesystem::path& dir) {
  for (const auto& s : g.sources) write_file(dir / s.file_name, s.bytes);
  write_file(dir / "truth.csv", applicants_to_csv(g.truth));
  write_file(dir / "truth_manifest.txt", g.manifest.to_text());
  write_file(dir / "hierarchy.csv", g.hierarchy.to_csv());
}

}  // namespace mpdw
