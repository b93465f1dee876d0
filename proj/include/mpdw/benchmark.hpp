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

// Row-scan reporting (the operational-system baseline) versus cube-backed
// reporting over the same applicants.

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <thread>
#include <unordered_set>
#include <vector>

#include "mpdw/applicant.hpp"
#include "mpdw/cube.hpp"
#include "mpdw/reporting.hpp"
#include "mpdw/warehouse.hpp"

namespace mpdw {

/// Label of the member a record belongs to at a named dimension level,
/// matching the cube catalog's labels.
inline std::string record_label(const CanonicalApplicant& r, Dimension d, std::size_t level) {
  switch (d) {
    case Dimension::time: return level == 0 ? time_key(r.year, r.quarter) : std::to_string(r.year);
    case Dimension::congress: return level == 0 ? congress_key(r.city, r.congress) : r.city;
    default: return natural_key(d, r);
  }
}

namespace detail {

inline std::size_t scan_level(Dimension d, std::string_view level) {
  if (level.empty()) return 0;
  const auto names = level_names(d);
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == level) return i;
  }
  throw Error(ErrorCode::bad_level, "dimension " + std::string(to_string(d)) + " has no level '" +
                                        std::string(level) + "'");
}

}  // namespace detail

/// Full pass over the records per query, the way the operational system
/// answers a report: filter each row, build its group key, count.
inline ResultTable run_scan_query(std::span<const CanonicalApplicant> records, const AggregateQuery& query) {
  struct Filter {
    Dimension dim;
    std::size_t level;
    std::unordered_set<std::string> members;
  };
  std::vector<Filter> filters;
  for (const auto& f : query.filters) {
    filters.push_back({f.dimension, detail::scan_level(f.dimension, f.level), {f.members.begin(), f.members.end()}});
  }
  std::vector<std::pair<Dimension, std::size_t>> groups;
  ResultTable table;
  for (const auto& g : query.group_by) {
    const std::size_t level = detail::scan_level(g.dimension, g.level);
    groups.emplace_back(g.dimension, level);
    table.columns.push_back(group_column_name({g.dimension, level_names(g.dimension)[level]}));
  }
  table.columns.emplace_back(to_string(query.measure));

  std::map<std::vector<std::string>, std::uint64_t> counts;
  std::vector<std::string> key(groups.size());
  for (const auto& r : records) {
    bool pass = true;
    for (const auto& f : filters) {
      if (!f.members.contains(record_label(r, f.dim, f.level))) {
        pass = false;
        break;
      }
    }
    if (!pass) continue;
    for (std::size_t i = 0; i < groups.size(); ++i) key[i] = record_label(r, groups[i].first, groups[i].second);
    std::uint64_t& slot = counts[key];
    switch (query.measure) {
      case Measure::total: ++slot; break;
      case Measure::seekers: slot += r.status() == Status::seeker; break;
      case Measure::directed: slot += r.status() == Status::directed; break;
    }
  }
  for (auto& [labels, value] : counts) table.rows.push_back({labels, {value}});
  return table;
}

/// Fig-8 shaped question: seekers per sector over a year range, all cities.
inline AggregateQuery seekers_by_sector_query(YearRange years) {
  DiceFilter f{Dimension::time, "year", {}};
  for (int y = years.from; y <= years.to; ++y) f.members.push_back(std::to_string(y));
  return {Measure::seekers, {{Dimension::sector, ""}}, {f}};
}

struct BenchQuery {
  std::string id;
  AggregateQuery query;
};

struct BenchConfig {
  std::vector<BenchQuery> queries;
  std::size_t repetitions = 100;
  std::size_t warmup = 3;
  std::filesystem::path warehouse;
  std::filesystem::path records;
  std::size_t reader_threads = 1;  // > 1 adds a concurrent cube-read pass
};

struct TimingStats {
  double mean_us = 0;
  double median_us = 0;
  double stddev_us = 0;
};

inline TimingStats summarize(std::vector<double> samples_us) {
  TimingStats s;
  if (samples_us.empty()) return s;
  s.mean_us = std::accumulate(samples_us.begin(), samples_us.end(), 0.0) / static_cast<double>(samples_us.size());
  double var = 0;
  for (double v : samples_us) var += (v - s.mean_us) * (v - s.mean_us);
  s.stddev_us = std::sqrt(var / static_cast<double>(samples_us.size()));
  std::sort(samples_us.begin(), samples_us.end());
  const std::size_t n = samples_us.size();
  s.median_us = n % 2 ? samples_us[n / 2] : (samples_us[n / 2 - 1] + samples_us[n / 2]) / 2;
  return s;
}

struct QueryTiming {
  std::string id;
  TimingStats scan;
  TimingStats cube;
  double speedup = 0;  // scan median / cube median
  bool answers_equal = false;
  double parallel_cube_qps = 0;  // only with reader_threads > 1
};

struct BenchResult {
  std::vector<QueryTiming> queries;
};

namespace detail {

template <typename F>
double time_us(F&& f) {
  const auto start = std::chrono::steady_clock::now();
  f();
  const auto stop = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::micro>(stop - start).count();
}

}  // namespace detail

inline BenchResult run_benchmark(const BenchConfig& config, std::span<const CanonicalApplicant> records,
                                 const Cube& cube) {
  if (config.repetitions < 1) throw Error(ErrorCode::config_error, "benchmark needs at least one repetition");
  BenchResult result;
  for (const auto& bq : config.queries) {
    const ResultTable scan_answer = run_scan_query(records, bq.query);
    const ResultTable cube_answer = aggregate(cube, bq.query);
    if (!(scan_answer == cube_answer)) {
      throw Error(ErrorCode::answer_mismatch, "query '" + bq.id + "': row scan and cube disagree (" +
                                                  std::to_string(scan_answer.rows.size()) + " vs " +
                                                  std::to_string(cube_answer.rows.size()) + " rows)");
    }
    for (std::size_t i = 0; i < config.warmup; ++i) {
      (void)run_scan_query(records, bq.query);
      (void)aggregate(cube, bq.query);
    }
    std::vector<double> scan_us;
    std::vector<double> cube_us;
    bool equal = true;
    for (std::size_t i = 0; i < config.repetitions; ++i) {
      ResultTable s;
      ResultTable c;
      scan_us.push_back(detail::time_us([&] { s = run_scan_query(records, bq.query); }));
      cube_us.push_back(detail::time_us([&] { c = aggregate(cube, bq.query); }));
      equal = equal && s == scan_answer && c == scan_answer;
    }
    if (!equal) throw Error(ErrorCode::answer_mismatch, "query '" + bq.id + "' answers changed between repetitions");

    QueryTiming t;
    t.id = bq.id;
    t.scan = summarize(std::move(scan_us));
    t.cube = summarize(std::move(cube_us));
    t.speedup = t.cube.median_us > 0 ? t.scan.median_us / t.cube.median_us : INFINITY;
    t.answers_equal = true;

    if (config.reader_threads > 1) {
      std::vector<std::thread> readers;
      std::vector<char> ok(config.reader_threads, 1);
      const double elapsed = detail::time_us([&] {
        for (std::size_t r = 0; r < config.reader_threads; ++r) {
          readers.emplace_back([&, r] {
            for (std::size_t i = 0; i < config.repetitions; ++i) {
              if (!(aggregate(cube, bq.query) == cube_answer)) ok[r] = 0;
            }
          });
        }
        for (auto& th : readers) th.join();
      });
      if (std::find(ok.begin(), ok.end(), 0) != ok.end()) {
        throw Error(ErrorCode::answer_mismatch, "query '" + bq.id + "' differs under concurrent reads");
      }
      t.parallel_cube_qps = static_cast<double>(config.reader_threads * config.repetitions) / (elapsed / 1e6);
    }
    result.queries.push_back(std::move(t));
  }
  return result;
}

/// Loads the warehouse and the record file named in the config, then runs.
inline BenchResult run_benchmark(const BenchConfig& config) {
  const StarSchema schema = load_schema(config.warehouse);
  const Cube cube = build_cube(schema);
  const auto records = applicants_from_csv(read_file(config.records));
  return run_benchmark(config, records, cube);
}

inline std::string format_fixed(double v, int digits) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(digits);
  os << v;
  return os.str();
}

inline ResultTable bench_table(const BenchResult& r) {
  ResultTable t;
  t.columns = {"query_id", "scan_median_us", "cube_median_us", "speedup", "answers_equal"};
  for (const auto& q : r.queries) {
    t.rows.push_back({{q.id, format_fixed(q.scan.median_us, 1), format_fixed(q.cube.median_us, 1),
                       format_fixed(q.speedup, 2), q.answers_equal ? "true" : "false"},
                      {}});
  }
  return t;
}

inline std::string bench_report_csv(const BenchResult& r) { return to_csv(bench_table(r)); }

}  // namespace mpdw
