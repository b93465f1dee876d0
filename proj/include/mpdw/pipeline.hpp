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

// Batch stages driven by one JSON config. Each stage reads the previous
// stage's files and writes its own, so any stage can be rerun alone.

#pragma once

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <chrono>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mpdw/applicant.hpp"
#include "mpdw/benchmark.hpp"
#include "mpdw/common.hpp"
#include "mpdw/cube.hpp"
#include "mpdw/datagen.hpp"
#include "mpdw/preprocess.hpp"
#include "mpdw/reporting.hpp"
#include "mpdw/source_ingest.hpp"
#include "mpdw/warehouse.hpp"

namespace mpdw {

using Json = nlohmann::json;

/// 1 usage or config, 2 data (quarantines written), 3 invariant violation.
inline int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::config_error:
    case ErrorCode::invalid_layout:
    case ErrorCode::bad_level_pair:
    case ErrorCode::missing_required_field:
    case ErrorCode::empty_year_range:
    case ErrorCode::bad_level:
    case ErrorCode::unknown_member:
    case ErrorCode::empty_member_set:
    case ErrorCode::invalid_query:
    case ErrorCode::unsatisfiable_size: return 1;
    case ErrorCode::integrity_violation:
    case ErrorCode::answer_mismatch: return 3;
    default: return 2;
  }
}

// ---------------------------------------------------------------------------
// Query text forms shared by the config file and the command line.

/// "sector", "time:year", "congress:city".
inline GroupBy parse_group_by(std::string_view text) {
  const auto colon = text.find(':');
  const std::string_view dim = text.substr(0, colon);
  const auto d = parse_dimension(dim);
  if (!d) throw Error(ErrorCode::invalid_query, "unknown dimension '" + std::string(dim) + "'");
  GroupBy g{*d, colon == std::string_view::npos ? std::string{} : std::string(text.substr(colon + 1))};
  if (!g.level.empty()) {
    const auto names = level_names(*d);
    if (std::find(names.begin(), names.end(), g.level) == names.end()) {
      throw Error(ErrorCode::bad_level, "dimension " + std::string(dim) + " has no level '" + g.level + "'");
    }
  }
  return g;
}

/// "city=Tripoli,Sirte" or "time:year=2001,2002".
inline DiceFilter parse_filter(std::string_view text) {
  const auto eq = text.find('=');
  if (eq == std::string_view::npos || eq + 1 >= text.size()) {
    throw Error(ErrorCode::invalid_query, "filter '" + std::string(text) + "' is not dim[:level]=member[,member]");
  }
  const GroupBy g = parse_group_by(text.substr(0, eq));
  return {g.dimension, g.level, split(text.substr(eq + 1), ',')};
}

/// "2000:2006" or a single year.
inline YearRange parse_year_span(std::string_view text) {
  const auto colon = text.find(':');
  long long a = 0;
  long long b = 0;
  const bool ok = colon == std::string_view::npos
                      ? parse_int(text, a) && (b = a, true)
                      : parse_int(text.substr(0, colon), a) && parse_int(text.substr(colon + 1), b);
  if (!ok) throw Error(ErrorCode::invalid_query, "year span '" + std::string(text) + "' is not FROM:TO");
  if (a > b) throw Error(ErrorCode::invalid_query, "year span '" + std::string(text) + "' is empty");
  return {static_cast<int>(a), static_cast<int>(b)};
}

inline DiceFilter year_filter(YearRange years) {
  DiceFilter f{Dimension::time, "year", {}};
  for (int y = years.from; y <= years.to; ++y) f.members.push_back(std::to_string(y));
  return f;
}

// ---------------------------------------------------------------------------
// Config

struct SourceInput {
  SourceSpec spec;
  std::filesystem::path file;
};

struct ReportJob {
  std::string name;  // output file stem under reports_dir
  ReportSpec spec;
};

struct PipelineConfig {
  std::filesystem::path config_path;
  YearRange years;
  std::string load_timestamp;
  std::vector<SourceInput> sources;
  std::filesystem::path hierarchy_file;
  PreprocessConfig preprocess;
  std::filesystem::path staging_dir;
  std::filesystem::path warehouse_dir;
  std::filesystem::path reports_dir;
  std::vector<ReportJob> reports;
  BenchConfig bench;

  std::filesystem::path ingested_file() const { return staging_dir / "ingested.csv"; }
  std::filesystem::path clean_file() const { return staging_dir / "clean.csv"; }
  std::filesystem::path rejects_file() const { return staging_dir / "rejects.csv"; }
  std::filesystem::path etl_report_file() const { return staging_dir / "etl_report.txt"; }
  std::filesystem::path bench_file() const { return reports_dir / "bench_report.csv"; }
};

namespace detail {

[[noreturn]] inline void config_fail(const std::filesystem::path& file, const std::string& what) {
  throw Error(ErrorCode::config_error, file.string() + ": " + what);
}

inline Field config_field(const std::filesystem::path& file, const std::string& name) {
  const auto f = parse_field(name);
  if (!f) config_fail(file, "unknown canonical field '" + name + "'");
  return *f;
}

inline std::map<Field, Codebook> read_codebooks(const std::filesystem::path& file, const Json& j) {
  std::map<Field, Codebook> books;
  if (j.is_null()) return books;
  for (const auto& [field, entries] : j.items()) {
    auto& book = books[config_field(file, field)];
    for (const auto& [code, value] : entries.items()) book[code] = value.get<std::string>();
  }
  return books;
}

inline Json write_codebooks(const std::map<Field, Codebook>& books) {
  Json j = Json::object();
  for (const auto& [f, book] : books) {
    Json entries = Json::object();
    for (const auto& [code, value] : book) entries[code] = value;
    j[std::string(to_string(f))] = entries;
  }
  return j;
}

inline YearRange read_years(const std::filesystem::path& file, const Json& j) {
  if (!j.is_array() || j.size() != 2) config_fail(file, "year ranges are [from, to]");
  YearRange y{j[0].get<int>(), j[1].get<int>()};
  if (y.from > y.to) throw Error(ErrorCode::empty_year_range, file.string() + ": year range is empty");
  return y;
}

inline AggregateQuery read_query(const Json& j) {
  AggregateQuery q;
  const auto m = parse_measure(j.value("measure", "total"));
  if (!m) throw Error(ErrorCode::invalid_query, "unknown measure '" + j.value("measure", "") + "'");
  q.measure = *m;
  for (const auto& g : j.value("group_by", Json::array())) q.group_by.push_back(parse_group_by(g.get<std::string>()));
  for (const auto& f : j.value("filters", Json::array())) q.filters.push_back(parse_filter(f.get<std::string>()));
  if (j.contains("years")) {
    const auto& y = j["years"];
    q.filters.push_back(year_filter({y.at(0).get<int>(), y.at(1).get<int>()}));
  }
  return q;
}

inline SourceInput read_source(const std::filesystem::path& file, const std::filesystem::path& base, const Json& j) {
  SourceInput in;
  SourceSpec& s = in.spec;
  s.source_id = j.at("id").get<std::string>();
  s.city = j.at("city").get<std::string>();
  const auto fmt = parse_source_format(j.at("format").get<std::string>());
  if (!fmt) config_fail(file, "source '" + s.source_id + "' has unknown format");
  s.format = *fmt;
  s.encoding = j.value("encoding", "utf-8");
  const std::string delim = j.value("delimiter", ",");
  if (delim.size() != 1) config_fail(file, "source '" + s.source_id + "' delimiter must be one byte");
  s.delimiter = delim[0];
  s.has_header = j.value("has_header", true);
  std::size_t offset = 0;
  for (const auto& f : j.value("layout", Json::array())) {
    FieldDescriptor d;
    d.name = f.at("name").get<std::string>();
    const auto kind = parse_field_kind(f.value("type", "C"));
    if (!kind) config_fail(file, "field '" + d.name + "' has unknown type");
    d.kind = *kind;
    d.length = f.at("length").get<std::size_t>();
    d.decimal_places = f.value("decimals", 0);
    d.offset = f.value("offset", offset);
    offset = d.offset + d.length;
    s.layout.push_back(std::move(d));
  }
  for (const auto& [field, name] : j.at("fields").items()) {
    s.mapping.field_map[config_field(file, field)] = name.get<std::string>();
  }
  s.mapping.application_date_field = j.value("date_field", "");
  s.mapping.value_codebooks = read_codebooks(file, j.value("codebooks", Json()));
  in.file = base / j.at("file").get<std::string>();
  return in;
}

}  // namespace detail

/// Checks everything a run depends on before any stage touches data.
inline void validate_config(const PipelineConfig& c) {
  const auto& file = c.config_path;
  if (c.years.from > c.years.to) throw Error(ErrorCode::empty_year_range, file.string() + ": year range is empty");
  if (c.sources.empty()) detail::config_fail(file, "no sources configured");
  std::set<std::string> ids;
  for (const auto& s : c.sources) {
    validate_source_spec(s.spec);
    if (!s.spec.layout.empty() && s.spec.format == SourceFormat::fixed_width) validate_layout(s.spec.layout);
    (void)Codec(s.spec.encoding);
    if (!ids.insert(s.spec.source_id).second) detail::config_fail(file, "duplicate source id '" + s.spec.source_id + "'");
    if (!std::filesystem::exists(s.file)) detail::config_fail(file, "source file " + s.file.string() + " does not exist");
  }
  if (!std::filesystem::exists(c.hierarchy_file)) {
    detail::config_fail(file, "hierarchy file " + c.hierarchy_file.string() + " does not exist");
  }
  c.preprocess.policy.validate();
  const auto& levels = c.preprocess.hierarchy.levels();
  for (const auto& l : {c.preprocess.generalize_from, c.preprocess.generalize_to}) {
    if (std::find(levels.begin(), levels.end(), l) == levels.end()) {
      throw Error(ErrorCode::bad_level_pair, file.string() + ": generalization level '" + l + "' is not a hierarchy level");
    }
  }
  for (const auto& [f, _] : c.preprocess.codebooks) {
    if (!is_nullable(f) && f != Field::sector) {
      detail::config_fail(file, "normalization codebook for non-coded field " + std::string(to_string(f)));
    }
  }
  const FieldSet missing = warehouse_required_fields() & ~c.preprocess.keep_fields;
  if (missing.any()) {
    throw Error(ErrorCode::missing_required_field, file.string() + ": keep_fields drops a warehouse field");
  }
  std::set<std::string> names;
  for (const auto& r : c.reports) {
    if (r.spec.year_from > r.spec.year_to) detail::config_fail(file, "report '" + r.name + "' has an empty year range");
    if (!names.insert(r.name).second) detail::config_fail(file, "duplicate report name '" + r.name + "'");
  }
  if (c.bench.repetitions < 1) detail::config_fail(file, "bench repetitions must be >= 1");
}

inline PipelineConfig parse_pipeline_config(const Json& j, const std::filesystem::path& config_path) {
  PipelineConfig c;
  c.config_path = config_path;
  const auto base = config_path.parent_path();
  try {
    c.years = detail::read_years(config_path, j.at("year_range"));
    c.load_timestamp = j.value("load_timestamp", "");
    for (const auto& s : j.at("sources")) c.sources.push_back(detail::read_source(config_path, base, s));

    const auto& h = j.at("hierarchy");
    c.hierarchy_file = base / h.at("file").get<std::string>();
    const auto levels = h.value("levels", std::vector<std::string>{"district", "congress", "city"});
    c.preprocess.hierarchy = ConceptHierarchy(levels);
    c.preprocess.generalize_from = h.value("generalize_from", "district");
    c.preprocess.generalize_to = h.value("generalize_to", "congress");

    c.preprocess.codebooks = detail::read_codebooks(config_path, j.value("normalize", Json()));
    const auto cleaning = j.value("cleaning", Json::object());
    c.preprocess.policy = CleaningPolicy::with_constant(cleaning.value("fill_constant", std::string(kDefaultFillConstant)));
    for (const auto& [field, value] : cleaning.value("fill_constants", Json::object()).items()) {
      c.preprocess.policy.fill_constants[detail::config_field(config_path, field)] = value.get<std::string>();
    }
    c.preprocess.policy.dedup_key = detail::config_field(config_path, cleaning.value("dedup_key", "national_id"));
    const std::string keep = cleaning.value("keep", "latest_application");
    if (keep == "latest_application") {
      c.preprocess.policy.keep_rule = KeepRule::latest_application;
    } else if (keep == "first_seen") {
      c.preprocess.policy.keep_rule = KeepRule::first_seen;
    } else {
      detail::config_fail(config_path, "unknown keep rule '" + keep + "'");
    }
    if (j.contains("keep_fields")) {
      FieldSet keep_fields;
      for (const auto& f : j["keep_fields"]) {
        keep_fields.set(static_cast<std::size_t>(detail::config_field(config_path, f.get<std::string>())));
      }
      c.preprocess.keep_fields = keep_fields;
    }

    c.staging_dir = base / j.value("staging_dir", "staging");
    c.warehouse_dir = base / j.value("warehouse_dir", "warehouse");
    c.reports_dir = base / j.value("reports_dir", "reports");

    for (const auto& r : j.value("reports", Json::array())) {
      ReportJob job;
      job.name = r.at("name").get<std::string>();
      const auto kind = parse_report_kind(r.at("kind").get<std::string>());
      if (!kind) detail::config_fail(config_path, "report '" + job.name + "' has unknown kind");
      job.spec.kind = *kind;
      const YearRange y = r.contains("years") ? detail::read_years(config_path, r["years"]) : c.years;
      job.spec.year_from = y.from;
      job.spec.year_to = y.to;
      if (r.contains("cities")) job.spec.city_filter = r["cities"].get<std::vector<std::string>>();
      job.spec.format = r.value("format", "csv") == "table" ? ReportFormat::table : ReportFormat::csv;
      if (r.contains("query")) job.spec.custom = detail::read_query(r["query"]);
      const std::string ext = job.spec.format == ReportFormat::csv ? ".csv" : ".txt";
      job.spec.output = c.reports_dir / (job.name + ext);
      c.reports.push_back(std::move(job));
    }

    const auto bench = j.value("bench", Json::object());
    c.bench.repetitions = bench.value("repetitions", std::size_t{100});
    c.bench.warmup = bench.value("warmup", std::size_t{3});
    c.bench.reader_threads = bench.value("reader_threads", std::size_t{1});
    for (const auto& q : bench.value("queries", Json::array())) {
      c.bench.queries.push_back({q.at("id").get<std::string>(), detail::read_query(q)});
    }
    if (c.bench.queries.empty()) c.bench.queries.push_back({"seekers_by_sector", seekers_by_sector_query(c.years)});
    c.bench.warehouse = c.warehouse_dir;
    c.bench.records = c.staging_dir / "clean.csv";
  } catch (const Json::exception& e) {
    detail::config_fail(config_path, e.what());
  }
  return c;
}

inline PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
  Json j;
  try {
    j = Json::parse(read_file(path));
  } catch (const Json::exception& e) {
    detail::config_fail(path, e.what());
  } catch (const Error& e) {
    throw Error(ErrorCode::config_error, e.message());
  }
  PipelineConfig c = parse_pipeline_config(j, path);
  if (std::filesystem::exists(c.hierarchy_file)) {
    c.preprocess.hierarchy = ConceptHierarchy::from_csv(read_file(c.hierarchy_file), c.preprocess.hierarchy.levels());
  }
  validate_config(c);
  return c;
}

/// Config that drives the whole pipeline over a generated data set.
inline Json generated_config(const GenResult& g) {
  Json j;
  j["year_range"] = {g.config.years.from, g.config.years.to};
  j["load_timestamp"] = g.config.load_timestamp;
  j["staging_dir"] = "staging";
  j["warehouse_dir"] = "warehouse";
  j["reports_dir"] = "reports";
  j["hierarchy"] = {{"file", "hierarchy.csv"},
                    {"levels", g.hierarchy.levels()},
                    {"generalize_from", "district"},
                    {"generalize_to", "congress"}};
  j["normalize"] = detail::write_codebooks(g.codebooks);
  j["cleaning"] = {{"fill_constant", g.config.fill_constant}, {"dedup_key", "national_id"}, {"keep", "latest_application"}};
  Json sources = Json::array();
  for (const auto& s : g.sources) {
    Json src;
    src["id"] = s.spec.source_id;
    src["city"] = s.spec.city;
    src["file"] = s.file_name;
    src["format"] = to_string(s.spec.format);
    src["encoding"] = s.spec.encoding;
    if (s.spec.format == SourceFormat::delimited) {
      src["delimiter"] = std::string(1, s.spec.delimiter);
      src["has_header"] = s.spec.has_header;
    }
    Json layout = Json::array();
    for (const auto& f : s.spec.layout) {
      layout.push_back({{"name", f.name}, {"type", std::string(1, dbf_type_code(f.kind))}, {"length", f.length}});
    }
    if (!layout.empty()) src["layout"] = layout;
    Json fields = Json::object();
    for (const auto& [f, name] : s.spec.mapping.field_map) fields[std::string(to_string(f))] = name;
    src["fields"] = fields;
    if (!s.spec.mapping.application_date_field.empty()) src["date_field"] = s.spec.mapping.application_date_field;
    if (!s.spec.mapping.value_codebooks.empty()) src["codebooks"] = detail::write_codebooks(s.spec.mapping.value_codebooks);
    sources.push_back(src);
  }
  j["sources"] = sources;
  const Json years = {g.config.years.from, g.config.years.to};
  j["reports"] = Json::array({
      {{"name", "seekers_by_sector"}, {"kind", "seekers_by_sector"}, {"years", years}},
      {{"name", "seekers_vs_directed"}, {"kind", "seekers_vs_directed"}, {"years", years}},
      {{"name", "edu_level_counts"}, {"kind", "edu_level_counts"}, {"years", years}},
      {{"name", "service_counts"}, {"kind", "service_counts"}, {"years", years}},
      {{"name", "city_by_year"},
       {"kind", "custom"},
       {"years", years},
       {"query", {{"measure", "total"}, {"group_by", {"city", "time:year"}}}}},
  });
  j["bench"] = {{"repetitions", 100},
                {"warmup", 3},
                {"queries",
                 Json::array({{{"id", "seekers_by_sector"}, {"measure", "seekers"}, {"group_by", {"sector"}}, {"years", years}},
                              {{"id", "directed_by_city_year"},
                               {"measure", "directed"},
                               {"group_by", {"congress:city", "time:year"}}},
                              {{"id", "edu_level_totals"}, {"measure", "total"}, {"group_by", {"education_level"}}}})}};
  return j;
}

// ---------------------------------------------------------------------------
// Locking and logging

/// Advisory exclusive lock on a sibling file of the warehouse directory, so
/// the directory contents stay limited to the persisted tables.
class WarehouseLock {
 public:
  explicit WarehouseLock(const std::filesystem::path& warehouse_dir) {
    std::filesystem::path p = warehouse_dir;
    if (!p.has_filename()) p = p.parent_path();
    path_ = p.parent_path() / (p.filename().string() + ".lock");
    if (!path_.parent_path().empty()) std::filesystem::create_directories(path_.parent_path());
    fd_ = ::open(path_.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
    if (fd_ < 0) throw Error(ErrorCode::io_error, "cannot open lock file " + path_.string());
    if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
      ::close(fd_);
      fd_ = -1;
      throw Error(ErrorCode::io_error, "warehouse " + warehouse_dir.string() + " is locked by another process (" +
                                           path_.string() + ")");
    }
  }
  WarehouseLock(const WarehouseLock&) = delete;
  WarehouseLock& operator=(const WarehouseLock&) = delete;
  ~WarehouseLock() {
    if (fd_ >= 0) {
      ::flock(fd_, LOCK_UN);
      ::close(fd_);
    }
  }

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  int fd_ = -1;
};

struct StageLog {
  std::string stage;
  std::vector<std::pair<std::string, std::string>> counters;
  double duration_ms = 0;

  void add(std::string key, std::size_t v) { counters.emplace_back(std::move(key), std::to_string(v)); }
  void add(std::string key, std::string v) { counters.emplace_back(std::move(key), std::move(v)); }

  std::string line() const {
    std::string s = "[" + stage + "]";
    for (const auto& [k, v] : counters) s += " " + k + "=" + v;
    s += " duration_ms=" + format_fixed(duration_ms, 1);
    return s;
  }
};

struct StageOutcome {
  std::vector<StageLog> logs;
  std::size_t quarantined = 0;  // nonzero maps to exit code 2
  std::string output;           // text for standard output
};

// ---------------------------------------------------------------------------
// Rejects file: staging/rejects.csv, absent when nothing was quarantined.

struct RejectRow {
  std::string stage;
  std::string source_id;
  std::string row;  // record index within the stage input
  std::string national_id;
  std::string reason;
};

inline std::vector<RejectRow> read_rejects(const std::filesystem::path& file) {
  std::vector<RejectRow> out;
  if (!std::filesystem::exists(file)) return out;
  const auto rows = parse_csv(read_file(file));
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& f = rows[i].fields;
    if (f.size() != 5) throw Error(ErrorCode::ragged_row, file.string() + " line " + std::to_string(rows[i].line) + " is ragged");
    out.push_back({f[0], f[1], f[2], f[3], f[4]});
  }
  return out;
}

inline void write_rejects(const std::filesystem::path& file, std::span<const RejectRow> rows) {
  if (rows.empty()) {
    std::filesystem::remove(file);
    return;
  }
  std::string text;
  append_csv_row(text, std::vector<std::string>{"stage", "source_id", "row", "national_id", "reason"});
  for (const auto& r : rows) append_csv_row(text, std::vector<std::string>{r.stage, r.source_id, r.row, r.national_id, r.reason});
  write_file(file, text);
}

/// Replaces one stage's rows, keeping the other stage's.
inline void update_rejects(const std::filesystem::path& file, const std::string& stage, std::vector<RejectRow> rows) {
  std::vector<RejectRow> merged;
  for (auto& r : read_rejects(file)) {
    if (r.stage != stage) merged.push_back(std::move(r));
  }
  merged.insert(merged.end(), std::make_move_iterator(rows.begin()), std::make_move_iterator(rows.end()));
  std::stable_sort(merged.begin(), merged.end(), [](const RejectRow& a, const RejectRow& b) { return a.stage < b.stage; });
  write_rejects(file, merged);
}

namespace detail {

template <typename F>
double elapsed_ms(F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  f();
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

inline std::vector<CanonicalApplicant> read_staged(const std::filesystem::path& file, const std::string& producer) {
  if (!std::filesystem::exists(file)) {
    throw Error(ErrorCode::io_error, file.string() + " is missing; run '" + producer + "' first");
  }
  try {
    return applicants_from_csv(read_file(file));
  } catch (const Error& e) {
    throw Error(e.code(), file.string() + ": " + e.message());
  }
}

inline std::vector<SourceEntry> source_entries(const PipelineConfig& c, std::span<const CanonicalApplicant> records) {
  std::map<std::string, std::size_t> counts;
  for (const auto& s : c.sources) counts[s.spec.source_id] = 0;
  for (const auto& r : records) ++counts[r.source_id];
  std::vector<SourceEntry> out;
  for (const auto& [id, n] : counts) out.push_back({id, n});
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Stages

struct IngestResult {
  std::vector<CanonicalApplicant> records;
  std::vector<RejectRow> rejects;
  std::vector<StageLog> logs;
};

/// Parses and maps every source. File-level format errors abort; record-level
/// mapping errors and out-of-range years quarantine the record.
inline IngestResult ingest_sources(const PipelineConfig& c) {
  IngestResult out;
  for (const auto& src : c.sources) {
    StageLog log{"ingest", {{"source", src.spec.source_id}}, 0};
    IngestReport report;
    std::size_t read = 0;
    std::size_t rejected = 0;
    log.duration_ms = detail::elapsed_ms([&] {
      std::vector<RawRecord> raw;
      try {
        raw = parse_source(read_file(src.file), src.spec);
      } catch (const Error& e) {
        throw Error(e.code(), src.file.string() + ": " + e.message());
      }
      read = raw.size();
      for (std::size_t i = 0; i < raw.size(); ++i) {
        const std::string* id = nullptr;
        if (auto m = src.spec.mapping.field_map.find(Field::national_id); m != src.spec.mapping.field_map.end()) {
          id = raw[i].find(m->second);
        }
        const auto reject = [&](std::string reason) {
          out.rejects.push_back({"ingest", src.spec.source_id, std::to_string(i), id ? *id : std::string{},
                                 src.file.filename().string() + ": " + std::move(reason)});
          ++rejected;
        };
        try {
          CanonicalApplicant r = map_to_canonical(raw[i], src.spec, &report);
          if (!c.years.contains(r.year)) {
            reject(std::string(to_string(ErrorCode::invalid_value)) + ": year " + std::to_string(r.year) +
                   " outside " + std::to_string(c.years.from) + ".." + std::to_string(c.years.to));
            continue;
          }
          out.records.push_back(std::move(r));
        } catch (const Error& e) {
          reject(e.what());
        }
      }
    });
    log.add("records_in", read);
    log.add("records_out", report.records_mapped - std::min(report.records_mapped, rejected));
    log.add("rejected", rejected);
    std::size_t untranslated = 0;
    for (const auto& [_, n] : report.untranslated_codes) untranslated += n;
    log.add("untranslated_codes", untranslated);
    out.logs.push_back(std::move(log));
  }
  return out;
}

inline StageOutcome stage_ingest(const PipelineConfig& c) {
  StageOutcome o;
  IngestResult r = ingest_sources(c);
  write_file(c.ingested_file(), applicants_to_csv(r.records));
  o.quarantined = r.rejects.size();
  update_rejects(c.rejects_file(), "ingest", std::move(r.rejects));
  o.logs = std::move(r.logs);
  return o;
}

inline std::string etl_report_text(const PreprocessReport& r) {
  std::ostringstream os;
  os << "duplicates_removed " << r.duplicates_removed << '\n';
  os << "quarantined " << r.quarantined << '\n';
  for (const auto& [f, n] : r.values_filled) os << "values_filled " << to_string(f) << ' ' << n << '\n';
  for (const auto& [f, n] : r.values_normalized) os << "values_normalized " << to_string(f) << ' ' << n << '\n';
  for (const auto& [f, n] : r.values_unmatched) os << "values_unmatched " << to_string(f) << ' ' << n << '\n';
  os << "records_generalized " << r.records_generalized << '\n';
  os << "unknown_hierarchy_values " << r.unknown_hierarchy_values << '\n';
  for (Field f : r.fields_dropped) os << "field_dropped " << to_string(f) << '\n';
  return os.str();
}

inline StageOutcome stage_etl(const PipelineConfig& c) {
  StageOutcome o;
  StageLog log{"etl", {}, 0};
  PreprocessOutput p;
  std::size_t in = 0;
  log.duration_ms = detail::elapsed_ms([&] {
    auto records = detail::read_staged(c.ingested_file(), "ingest");
    in = records.size();
    p = run_preprocess(std::move(records), c.preprocess);
  });
  write_file(c.clean_file(), applicants_to_csv(p.records));
  write_file(c.etl_report_file(), etl_report_text(p.report));
  std::vector<RejectRow> rejects;
  for (const auto& q : p.quarantined) rejects.push_back({"etl", q.record.source_id, "", q.record.national_id, q.reason});
  o.quarantined = rejects.size();
  update_rejects(c.rejects_file(), "etl", std::move(rejects));
  log.add("records_in", in);
  log.add("records_out", p.records.size());
  log.add("duplicates_removed", p.report.duplicates_removed);
  log.add("quarantined", p.report.quarantined);
  log.add("values_filled", PreprocessReport::sum(p.report.values_filled));
  log.add("values_normalized", PreprocessReport::sum(p.report.values_normalized));
  log.add("records_generalized", p.report.records_generalized);
  log.add("unknown_hierarchy_values", p.report.unknown_hierarchy_values);
  o.logs.push_back(std::move(log));
  return o;
}

inline void require_sound(const StarSchema& s, const std::string& what) {
  const auto problems = check_integrity(s);
  if (!problems.empty()) {
    throw Error(ErrorCode::integrity_violation, what + ": " + problems.front() + " (" + std::to_string(problems.size()) +
                                                     " problem(s))");
  }
}

inline StageOutcome stage_load(const PipelineConfig& c) {
  StageOutcome o;
  StageLog log{"load", {}, 0};
  StarSchema s;
  log.duration_ms = detail::elapsed_ms([&] {
    const auto records = detail::read_staged(c.clean_file(), "etl");
    s = build_schema(records, c.years, c.load_timestamp, detail::source_entries(c, records));
    require_sound(s, "new warehouse");
    persist(s, c.warehouse_dir);
    log.add("records_in", records.size());
  });
  log.add("fact_rows", s.facts.size());
  for (Dimension d : kDimensions) log.add(std::string(table_file(d)), s.dim(d).size());
  o.logs.push_back(std::move(log));
  return o;
}

/// Re-ingests the configured sources, re-cleans the full set and rebuilds the
/// facts against the existing dimensions, keeping their surrogate ids.
inline StageOutcome stage_refresh(const PipelineConfig& c) {
  StageOutcome o;
  if (!std::filesystem::exists(c.warehouse_dir / kManifestFile)) {
    throw Error(ErrorCode::io_error, (c.warehouse_dir / kManifestFile).string() + " is missing; run 'load' first");
  }
  const StarSchema before = load_schema(c.warehouse_dir);
  auto ing = stage_ingest(c);
  auto etl = stage_etl(c);
  o.logs = std::move(ing.logs);
  o.logs.insert(o.logs.end(), etl.logs.begin(), etl.logs.end());
  o.quarantined = ing.quarantined + etl.quarantined;
  StageLog log{"refresh", {}, 0};
  StarSchema after;
  log.duration_ms = detail::elapsed_ms([&] {
    const auto records = detail::read_staged(c.clean_file(), "etl");
    after = refresh(before, records, SchemaMeta{c.load_timestamp, c.years, detail::source_entries(c, records)});
    require_sound(after, "refreshed warehouse");
    persist(after, c.warehouse_dir);
  });
  std::size_t added = 0;
  for (Dimension d : kDimensions) added += after.dim(d).size() - before.dim(d).size();
  log.add("fact_rows_before", before.facts.size());
  log.add("fact_rows_after", after.facts.size());
  log.add("members_added", added);
  o.logs.push_back(std::move(log));
  return o;
}

inline Cube load_cube(const PipelineConfig& c) {
  const StarSchema s = load_schema(c.warehouse_dir);
  return build_cube(s);
}

inline StageOutcome stage_query(const PipelineConfig& c, const AggregateQuery& q, ReportFormat format) {
  StageOutcome o;
  StageLog log{"query", {}, 0};
  ResultTable t;
  log.duration_ms = detail::elapsed_ms([&] { t = aggregate(load_cube(c), q); });
  o.output = format == ReportFormat::csv ? to_csv(t) : render_text(t);
  log.add("rows", t.rows.size());
  o.logs.push_back(std::move(log));
  return o;
}

inline StageOutcome stage_report(const PipelineConfig& c) {
  StageOutcome o;
  const Cube cube = load_cube(c);
  for (const auto& job : c.reports) {
    StageLog log{"report", {{"name", job.name}}, 0};
    ReportOutput r;
    log.duration_ms = detail::elapsed_ms([&] { r = run_report(cube, job.spec); });
    log.add("rows", r.table.rows.size());
    log.add("file", job.spec.output.string());
    o.logs.push_back(std::move(log));
  }
  return o;
}

inline StageOutcome stage_bench(const PipelineConfig& c) {
  StageOutcome o;
  StageLog log{"bench", {}, 0};
  BenchResult r;
  log.duration_ms = detail::elapsed_ms([&] {
    const StarSchema s = load_schema(c.warehouse_dir);
    const Cube cube = build_cube(s);
    const auto records = detail::read_staged(c.clean_file(), "etl");
    if (records.size() != total_applicants(s)) {
      throw Error(ErrorCode::answer_mismatch, c.clean_file().string() + " holds " + std::to_string(records.size()) +
                                                  " records but the warehouse counts " +
                                                  std::to_string(total_applicants(s)));
    }
    r = run_benchmark(c.bench, records, cube);
  });
  write_file(c.bench_file(), bench_report_csv(r));
  o.output = render_text(bench_table(r));
  log.add("queries", r.queries.size());
  log.add("repetitions", c.bench.repetitions);
  log.add("file", c.bench_file().string());
  o.logs.push_back(std::move(log));
  return o;
}

/// Warehouse and cube invariants: referential integrity, dense ids, the
/// Time calendar, per-row measure conservation, and conservation of each
/// measure under every roll-up.
inline std::vector<std::string> validate_warehouse(const StarSchema& s) {
  std::vector<std::string> problems = check_integrity(s);
  if (!problems.empty()) return problems;
  const Cube base = build_cube(s);
  Measures expected;
  for (const auto& f : s.facts) expected += Measures{f.total_applicants, f.num_seekers, f.num_directed};
  const auto check = [&](const Cube& c, const std::string& what) {
    Measures m = c.mass();
    if (!(m == expected)) problems.push_back("measure totals change under " + what);
    for (const auto& cell : c.cells()) {
      if (cell.measures.total != cell.measures.seekers + cell.measures.directed) {
        problems.push_back("cell total differs from seekers + directed after " + what);
        break;
      }
    }
  };
  check(base, "cube build");
  check(rollup(base, Dimension::time, "year"), "time roll-up to year");
  check(rollup(base, Dimension::congress, "city"), "congress roll-up to city");
  return problems;
}

inline StageOutcome stage_validate(const PipelineConfig& c) {
  StageOutcome o;
  StageLog log{"validate", {}, 0};
  std::vector<std::string> problems;
  log.duration_ms = detail::elapsed_ms([&] { problems = validate_warehouse(load_schema(c.warehouse_dir)); });
  log.add("problems", problems.size());
  o.logs.push_back(std::move(log));
  for (const auto& p : problems) o.output += "violation: " + p + "\n";
  if (!problems.empty()) {
    throw Error(ErrorCode::integrity_violation, c.warehouse_dir.string() + ": " + problems.front() +
                                                    (problems.size() > 1 ? " (and " + std::to_string(problems.size() - 1) + " more)" : ""));
  }
  o.output = "ok\n";
  return o;
}

/// Writes generated sources, truth files and a config that drives them.
inline void write_generated_dataset(const GenResult& g, const std::filesystem::path& dir) {
  write_generated(g, dir);
  write_file(dir / "pipeline.json", generated_config(g).dump(2) + "\n");
}

}  // namespace mpdw
