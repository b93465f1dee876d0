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

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mpdw/common.hpp"
#include "mpdw/cube.hpp"

namespace mpdw {

enum class ReportKind : std::uint8_t { seekers_by_sector, seekers_vs_directed, edu_level_counts, service_counts, custom };

inline std::string_view to_string(ReportKind k) {
  switch (k) {
    case ReportKind::seekers_by_sector: return "seekers_by_sector";
    case ReportKind::seekers_vs_directed: return "seekers_vs_directed";
    case ReportKind::edu_level_counts: return "edu_level_counts";
    case ReportKind::service_counts: return "service_counts";
    case ReportKind::custom: return "custom";
  }
  return "custom";
}

inline std::optional<ReportKind> parse_report_kind(std::string_view s) {
  for (auto k : {ReportKind::seekers_by_sector, ReportKind::seekers_vs_directed, ReportKind::edu_level_counts,
                 ReportKind::service_counts, ReportKind::custom}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

enum class ReportFormat : std::uint8_t { table, csv };

struct ReportSpec {
  ReportKind kind = ReportKind::seekers_by_sector;
  int year_from = 0;
  int year_to = 0;
  std::optional<std::vector<std::string>> city_filter;
  std::filesystem::path output;  // empty: do not write a file
  ReportFormat format = ReportFormat::csv;
  AggregateQuery custom;  // kind == custom only; year and city filters are added
};

// ---------------------------------------------------------------------------
// Serialization

inline std::string to_csv(const ResultTable& t) {
  std::string out;
  append_csv_row(out, t.columns);
  std::vector<std::string> fields;
  for (const auto& row : t.rows) {
    fields = row.labels;
    for (auto v : row.values) fields.push_back(std::to_string(v));
    append_csv_row(out, fields);
  }
  return out;
}

/// Left-aligned labels, right-aligned numbers, two-space gutters.
inline std::string render_text(const ResultTable& t) {
  std::vector<std::vector<std::string>> cells;
  cells.push_back(t.columns);
  for (const auto& row : t.rows) {
    auto line = row.labels;
    for (auto v : row.values) line.push_back(std::to_string(v));
    cells.push_back(std::move(line));
  }
  std::vector<std::size_t> width(t.columns.size(), 0);
  for (const auto& line : cells) {
    for (std::size_t c = 0; c < line.size() && c < width.size(); ++c) width[c] = std::max(width[c], line[c].size());
  }
  const std::size_t label_cols = t.rows.empty() ? t.columns.size() - 1 : t.rows.front().labels.size();
  std::string out;
  const auto emit = [&](const std::vector<std::string>& line) {
    std::string text;
    for (std::size_t c = 0; c < line.size(); ++c) {
      if (c) text += "  ";
      const std::string pad(width[c] - line[c].size(), ' ');
      text += c < label_cols ? line[c] + pad : pad + line[c];
    }
    out += rtrim(text, " ");
    out += '\n';
  };
  emit(cells[0]);
  std::size_t rule = 0;
  for (std::size_t c = 0; c < width.size(); ++c) rule += width[c] + (c ? 2 : 0);
  out += std::string(rule, '-') + '\n';
  for (std::size_t i = 1; i < cells.size(); ++i) emit(cells[i]);
  return out;
}

/// Joins single-measure tables with identical group columns into one table
/// of aligned series. Missing groups count as zero.
inline ResultTable align_series(std::span<const ResultTable> tables) {
  ResultTable out;
  if (tables.empty()) return out;
  const std::size_t label_cols = tables.front().columns.size() - 1;
  out.columns.assign(tables.front().columns.begin(), tables.front().columns.begin() + static_cast<std::ptrdiff_t>(label_cols));
  std::map<std::vector<std::string>, std::vector<std::uint64_t>> merged;
  for (std::size_t i = 0; i < tables.size(); ++i) {
    out.columns.push_back(tables[i].columns.back());
    for (const auto& row : tables[i].rows) {
      auto& values = merged[row.labels];
      values.resize(tables.size(), 0);
      values[i] = row.values.at(0);
    }
  }
  for (auto& [labels, values] : merged) {
    values.resize(tables.size(), 0);
    out.rows.push_back({labels, values});
  }
  return out;
}

// ---------------------------------------------------------------------------

inline std::vector<DiceFilter> report_filters(const ReportSpec& spec) {
  if (spec.year_from > spec.year_to) {
    throw Error(ErrorCode::invalid_query, "report year range " + std::to_string(spec.year_from) + ".." +
                                              std::to_string(spec.year_to) + " is empty");
  }
  std::vector<DiceFilter> filters;
  DiceFilter years{Dimension::time, "year", {}};
  for (int y = spec.year_from; y <= spec.year_to; ++y) years.members.push_back(std::to_string(y));
  filters.push_back(std::move(years));
  if (spec.city_filter) filters.push_back({Dimension::city, "", *spec.city_filter});
  return filters;
}

/// The fixed query templates behind each report kind.
inline std::vector<AggregateQuery> report_queries(const ReportSpec& spec) {
  const auto filters = report_filters(spec);
  const auto grouped = [&](Measure m, Dimension d) {
    return AggregateQuery{m, {{d, ""}}, filters};
  };
  switch (spec.kind) {
    case ReportKind::seekers_by_sector: return {grouped(Measure::seekers, Dimension::sector)};
    case ReportKind::seekers_vs_directed:
      return {grouped(Measure::seekers, Dimension::sector), grouped(Measure::directed, Dimension::sector)};
    case ReportKind::edu_level_counts: return {grouped(Measure::total, Dimension::education_level)};
    case ReportKind::service_counts: return {grouped(Measure::total, Dimension::service)};
    case ReportKind::custom: {
      AggregateQuery q = spec.custom;
      q.filters.insert(q.filters.end(), filters.begin(), filters.end());
      return {q};
    }
  }
  return {};
}

struct ReportOutput {
  ResultTable table;
  std::string rendered;  // bytes written to spec.output
};

inline ReportOutput run_report(const Cube& cube, const ReportSpec& spec) {
  std::vector<ResultTable> tables;
  for (const auto& q : report_queries(spec)) tables.push_back(aggregate(cube, q));
  ReportOutput out;
  out.table = tables.size() == 1 ? std::move(tables.front()) : align_series(tables);
  out.rendered = spec.format == ReportFormat::csv ? to_csv(out.table) : render_text(out.table);
  if (!spec.output.empty()) write_file(spec.output, out.rendered);
  return out;
}

}  // namespace mpdw
