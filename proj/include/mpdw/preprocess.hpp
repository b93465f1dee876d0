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

// Cleaning, transformation and reduction over canonical applicant records.
// The pipeline order is fixed: normalize_codes -> fill_missing ->
// deduplicate -> generalize -> dimension_reduce.

#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "mpdw/applicant.hpp"
#include "mpdw/common.hpp"
#include "mpdw/source_ingest.hpp"

namespace mpdw {

/// Child -> parent tree over ordered levels (lowest first). A value at
/// level i has exactly one parent at level i + 1.
class ConceptHierarchy {
 public:
  ConceptHierarchy() = default;

  explicit ConceptHierarchy(std::vector<std::string> levels) : levels_(std::move(levels)) {
    if (levels_.size() < 2) throw Error(ErrorCode::config_error, "a concept hierarchy needs at least two levels");
    for (std::size_t i = 0; i < levels_.size(); ++i) {
      for (std::size_t j = i + 1; j < levels_.size(); ++j) {
        if (levels_[i] == levels_[j]) throw Error(ErrorCode::config_error, "repeated hierarchy level " + levels_[i]);
      }
    }
    parents_.resize(levels_.size() - 1);
  }

  const std::vector<std::string>& levels() const { return levels_; }

  std::optional<std::size_t> level_index(std::string_view level) const {
    for (std::size_t i = 0; i < levels_.size(); ++i) {
      if (levels_[i] == level) return i;
    }
    return std::nullopt;
  }

  void add(std::string_view level, std::string value, std::string parent) {
    const auto idx = level_index(level);
    if (!idx) throw Error(ErrorCode::config_error, "unknown hierarchy level '" + std::string(level) + "'");
    if (*idx + 1 == levels_.size()) {
      throw Error(ErrorCode::config_error, "values at top level '" + std::string(level) + "' have no parent");
    }
    auto [it, inserted] = parents_[*idx].emplace(value, parent);
    if (!inserted && it->second != parent) {
      throw Error(ErrorCode::config_error, std::string(level) + " '" + value + "' has two parents: '" +
                                               it->second + "' and '" + parent + "'");
    }
  }

  std::optional<std::string> parent_of(std::string_view level, const std::string& value) const {
    const auto idx = level_index(level);
    if (!idx || *idx + 1 == levels_.size()) return std::nullopt;
    const auto it = parents_[*idx].find(value);
    if (it == parents_[*idx].end()) return std::nullopt;
    return it->second;
  }

  /// Walks parent links from `from` up to `to`. nullopt when any link is
  /// missing or the levels are not ordered from < to.
  std::optional<std::string> ancestor(const std::string& value, std::size_t from, std::size_t to) const {
    if (from >= to || to >= levels_.size()) return std::nullopt;
    const std::string* current = &value;
    for (std::size_t i = from; i < to; ++i) {
      const auto it = parents_[i].find(*current);
      if (it == parents_[i].end()) return std::nullopt;
      current = &it->second;
    }
    return *current;
  }

  std::size_t size(std::size_t level) const { return level < parents_.size() ? parents_[level].size() : 0; }

  /// Every parent chain must reach the top level.
  void validate() const {
    for (std::size_t i = 0; i + 1 < parents_.size(); ++i) {
      for (const auto& [child, parent] : parents_[i]) {
        if (!parents_[i + 1].contains(parent)) {
          throw Error(ErrorCode::config_error, levels_[i] + " '" + child + "' -> " + levels_[i + 1] + " '" + parent +
                                                   "' which has no " + levels_[i + 2]);
        }
      }
    }
  }

  /// Rows of "level,value,parent" sorted by level then value.
  std::string to_csv() const {
    std::string out = "level,value,parent\n";
    for (std::size_t i = 0; i < parents_.size(); ++i) {
      std::vector<std::pair<std::string, std::string>> rows(parents_[i].begin(), parents_[i].end());
      std::sort(rows.begin(), rows.end());
      for (const auto& [child, parent] : rows) {
        const std::vector<std::string> row{levels_[i], child, parent};
        append_csv_row(out, row);
      }
    }
    return out;
  }

  static ConceptHierarchy from_csv(std::string_view text, std::vector<std::string> levels) {
    ConceptHierarchy h(std::move(levels));
    const auto rows = parse_csv(text);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto& f = rows[i].fields;
      if (i == 0 && f.size() == 3 && f[0] == "level") continue;
      if (f.size() != 3) {
        throw Error(ErrorCode::config_error, "hierarchy line " + std::to_string(rows[i].line) + " needs 3 fields");
      }
      h.add(f[0], f[1], f[2]);
    }
    h.validate();
    return h;
  }

  bool operator==(const ConceptHierarchy&) const = default;

 private:
  std::vector<std::string> levels_;
  std::vector<std::unordered_map<std::string, std::string>> parents_;
};

enum class KeepRule : std::uint8_t { latest_application, first_seen };

inline constexpr std::string_view kDefaultFillConstant = "UNKNOWN";

struct CleaningPolicy {
  std::map<Field, std::string> fill_constants;
  Field dedup_key = Field::national_id;
  KeepRule keep_rule = KeepRule::latest_application;

  static CleaningPolicy with_constant(std::string_view constant = kDefaultFillConstant) {
    CleaningPolicy p;
    for (Field f : kNullableFields) p.fill_constants[f] = std::string(constant);
    return p;
  }

  const std::string& fill_for(Field f) const {
    const auto it = fill_constants.find(f);
    if (it == fill_constants.end()) {
      throw Error(ErrorCode::config_error, "no fill constant for " + std::string(to_string(f)));
    }
    return it->second;
  }

  void validate() const {
    for (Field f : kNullableFields) fill_for(f);
    for (const auto& [f, _] : fill_constants) {
      if (!is_nullable(f)) {
        throw Error(ErrorCode::config_error, std::string(to_string(f)) + " is not a nullable field");
      }
    }
    if (dedup_key == Field::year || dedup_key == Field::quarter || dedup_key == Field::status) {
      throw Error(ErrorCode::config_error, "dedup key must be a text field");
    }
  }
};

struct PreprocessReport {
  std::size_t duplicates_removed = 0;
  std::size_t quarantined = 0;
  std::map<Field, std::size_t> values_filled;
  std::map<Field, std::size_t> values_normalized;  // rewritten to a different spelling
  std::map<Field, std::size_t> values_unmatched;   // non-blank, no codebook entry
  std::size_t records_generalized = 0;
  std::size_t unknown_hierarchy_values = 0;
  std::vector<Field> fields_dropped;

  static std::size_t sum(const std::map<Field, std::size_t>& m) {
    std::size_t n = 0;
    for (const auto& [_, c] : m) n += c;
    return n;
  }

  void merge(const PreprocessReport& o) {
    duplicates_removed += o.duplicates_removed;
    quarantined += o.quarantined;
    for (const auto& [f, c] : o.values_filled) values_filled[f] += c;
    for (const auto& [f, c] : o.values_normalized) values_normalized[f] += c;
    for (const auto& [f, c] : o.values_unmatched) values_unmatched[f] += c;
    records_generalized += o.records_generalized;
    unknown_hierarchy_values += o.unknown_hierarchy_values;
    fields_dropped.insert(fields_dropped.end(), o.fields_dropped.begin(), o.fields_dropped.end());
  }
};

struct RejectedRecord {
  CanonicalApplicant record;
  std::string reason;

  bool operator==(const RejectedRecord&) const = default;
};

struct StageResult {
  std::vector<CanonicalApplicant> records;
  PreprocessReport report;
};

struct DedupResult {
  std::vector<CanonicalApplicant> records;  // sorted by dedup key
  std::vector<RejectedRecord> quarantined;
  PreprocessReport report;
};

// ---------------------------------------------------------------------------

/// Rewrites codebook variants to their canonical spelling. Matching is exact
/// after trimming and ASCII case folding; canonical spellings match
/// themselves, which makes the operation idempotent.
inline StageResult normalize_codes(std::vector<CanonicalApplicant> records,
                                   const std::map<Field, Codebook>& codebooks) {
  StageResult out;
  for (const auto& [field, book] : codebooks) {
    if (!is_nullable(field) && field != Field::sector) {
      throw Error(ErrorCode::config_error, "cannot normalize field " + std::string(to_string(field)));
    }
    std::unordered_map<std::string, std::string> folded;
    for (const auto& [variant, canonical] : book) folded.emplace(casefold(trim(variant)), canonical);
    for (const auto& [variant, canonical] : book) folded.emplace(casefold(trim(canonical)), canonical);

    std::size_t normalized = 0;
    std::size_t unmatched = 0;
    for (auto& r : records) {
      if (!r.has(field)) continue;
      std::string& v = *r.text(field);
      if (is_blank(v)) continue;
      const auto it = folded.find(casefold(trim(v)));
      if (it == folded.end()) {
        ++unmatched;
      } else if (it->second != v) {
        v = it->second;
        ++normalized;
      }
    }
    if (normalized) out.report.values_normalized[field] = normalized;
    if (unmatched) out.report.values_unmatched[field] = unmatched;
  }
  out.records = std::move(records);
  return out;
}

/// Replaces blank nullable fields with the policy's global constant.
inline StageResult fill_missing(std::vector<CanonicalApplicant> records, const CleaningPolicy& policy) {
  StageResult out;
  for (Field f : kNullableFields) {
    const std::string& constant = policy.fill_for(f);
    std::size_t filled = 0;
    for (auto& r : records) {
      if (!r.has(f)) continue;
      std::string& v = *r.text(f);
      if (is_blank(v)) {
        v = constant;
        ++filled;
      }
    }
    if (filled) out.report.values_filled[f] = filled;
  }
  out.records = std::move(records);
  return out;
}

/// Keeps one record per dedup key. Records with a blank key are quarantined.
/// Under latest_application the result does not depend on input order.
inline DedupResult deduplicate(std::vector<CanonicalApplicant> records, const CleaningPolicy& policy) {
  DedupResult out;
  const Field key = policy.dedup_key;
  const std::size_t input_size = records.size();

  std::vector<CanonicalApplicant> keyed;
  keyed.reserve(records.size());
  for (auto& r : records) {
    if (is_blank(*r.text(key))) {
      out.quarantined.push_back({std::move(r), std::string(to_string(ErrorCode::empty_key_record)) + ": blank " +
                                                   std::string(to_string(key))});
    } else {
      keyed.push_back(std::move(r));
    }
  }

  // Stable sort keeps input order within a key, which first_seen relies on.
  std::vector<std::size_t> order(keyed.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return *keyed[a].text(key) < *keyed[b].text(key);
  });

  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    std::size_t best = order[i];
    while (j < order.size() && *keyed[order[j]].text(key) == *keyed[order[i]].text(key)) {
      if (policy.keep_rule == KeepRule::latest_application &&
          precedes_for_keep_latest(keyed[order[j]], keyed[best])) {
        best = order[j];
      }
      ++j;
    }
    out.records.push_back(std::move(keyed[best]));
    i = j;
  }

  out.report.quarantined = out.quarantined.size();
  out.report.duplicates_removed = input_size - out.quarantined.size() - out.records.size();
  return out;
}

/// Writes the to_level ancestor of each record's from_level value into the
/// to_level field. Values missing from the hierarchy get the to_level field's
/// fill constant and are counted in unknown_hierarchy_values.
inline StageResult generalize(std::vector<CanonicalApplicant> records, const ConceptHierarchy& hierarchy,
                              std::string_view from_level, std::string_view to_level,
                              const CleaningPolicy& policy = CleaningPolicy::with_constant()) {
  const auto from = hierarchy.level_index(from_level);
  const auto to = hierarchy.level_index(to_level);
  if (!from || !to || *from >= *to) {
    throw Error(ErrorCode::bad_level_pair, "cannot generalize from '" + std::string(from_level) + "' to '" +
                                               std::string(to_level) + "'");
  }
  const auto from_field = parse_field(from_level);
  const auto to_field = parse_field(to_level);
  const auto attribute = [](std::optional<Field> f) { return f && (is_nullable(*f) || *f == Field::city); };
  if (!attribute(from_field) || !attribute(to_field)) {
    throw Error(ErrorCode::bad_level_pair, "hierarchy levels '" + std::string(from_level) + "' and '" +
                                               std::string(to_level) + "' are not applicant attributes");
  }
  const std::string unknown =
      is_nullable(*to_field) ? policy.fill_for(*to_field) : std::string(kDefaultFillConstant);

  StageResult out;
  for (auto& r : records) {
    if (!r.has(*from_field)) continue;
    if (auto a = hierarchy.ancestor(*r.text(*from_field), *from, *to)) {
      *r.text(*to_field) = std::move(*a);
      ++out.report.records_generalized;
    } else {
      *r.text(*to_field) = unknown;
      ++out.report.unknown_hierarchy_values;
    }
    r.present.set(static_cast<std::size_t>(*to_field));
  }
  out.records = std::move(records);
  return out;
}

/// Attributes the warehouse load needs: the six dimension keys (sector
/// membership uses preferred_sector for seekers), status, and the national id
/// that refresh re-deduplicates on.
inline FieldSet warehouse_required_fields() {
  return field_set({Field::national_id, Field::city, Field::congress, Field::sector, Field::preferred_sector,
                    Field::education_level, Field::service_status, Field::year, Field::quarter, Field::status});
}

inline StageResult dimension_reduce(std::vector<CanonicalApplicant> records, FieldSet keep_fields) {
  const FieldSet required = warehouse_required_fields();
  const FieldSet missing = required & ~keep_fields;
  if (missing.any()) {
    std::vector<std::string> names;
    for (Field f : kAllFields) {
      if (missing.test(static_cast<std::size_t>(f))) names.emplace_back(to_string(f));
    }
    throw Error(ErrorCode::missing_required_field, "keep set omits required fields: " + join(names, ","));
  }
  StageResult out;
  for (Field f : kAllFields) {
    if (!keep_fields.test(static_cast<std::size_t>(f))) out.report.fields_dropped.push_back(f);
  }
  for (auto& r : records) {
    for (Field f : out.report.fields_dropped) {
      if (auto* t = r.text(f)) t->clear();
    }
    r.present &= keep_fields;
  }
  out.records = std::move(records);
  return out;
}

// ---------------------------------------------------------------------------

struct PreprocessConfig {
  std::map<Field, Codebook> codebooks;
  CleaningPolicy policy = CleaningPolicy::with_constant();
  ConceptHierarchy hierarchy;
  std::string generalize_from = "district";
  std::string generalize_to = "congress";
  FieldSet keep_fields = all_fields();
};

struct PreprocessOutput {
  std::vector<CanonicalApplicant> records;
  std::vector<RejectedRecord> quarantined;
  PreprocessReport report;
};

inline PreprocessOutput run_preprocess(std::vector<CanonicalApplicant> records, const PreprocessConfig& config) {
  PreprocessOutput out;
  auto normalized = normalize_codes(std::move(records), config.codebooks);
  out.report.merge(normalized.report);
  auto filled = fill_missing(std::move(normalized.records), config.policy);
  out.report.merge(filled.report);
  auto deduped = deduplicate(std::move(filled.records), config.policy);
  out.report.merge(deduped.report);
  out.quarantined = std::move(deduped.quarantined);
  auto general = generalize(std::move(deduped.records), config.hierarchy, config.generalize_from,
                            config.generalize_to, config.policy);
  out.report.merge(general.report);
  auto reduced = dimension_reduce(std::move(general.records), config.keep_fields);
  out.report.merge(reduced.report);
  out.records = std::move(reduced.records);
  return out;
}

}  // namespace mpdw
