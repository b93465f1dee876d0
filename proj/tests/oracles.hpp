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

// Brute-force reference answers computed straight from applicant records.
// Nothing here calls into the cube, warehouse or benchmark code; labels are
// rebuilt from the record fields by hand.

#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "mpdw/applicant.hpp"

namespace oracle {

// Dimension and level are plain strings so the oracle does not share the
// library's enums: dims "city", "sector", "education_level", "congress",
// "service", "time"; levels "quarter"/"year" for time, "congress"/"city" for
// congress, otherwise the dimension name.
struct Group {
  std::string dim;
  std::string level;
};

struct Filter {
  std::string dim;
  std::string level;
  std::set<std::string> members;
};

inline std::string base_level(const std::string& dim) {
  if (dim == "time") return "quarter";
  return dim;
}

inline std::string label(const mpdw::CanonicalApplicant& r, const std::string& dim, const std::string& level_in) {
  const std::string level = level_in.empty() ? base_level(dim) : level_in;
  if (dim == "city") return r.city;
  if (dim == "sector") return r.sector.empty() ? r.preferred_sector : r.sector;
  if (dim == "education_level") return r.education_level;
  if (dim == "service") return r.service_status;
  if (dim == "congress") return level == "city" ? r.city : r.city + "/" + r.congress;
  if (dim == "time") {
    const std::string year = std::to_string(r.year);
    if (level == "year") return year;
    return year + "-Q" + std::to_string(static_cast<int>(r.quarter));
  }
  return "?";
}

inline std::uint64_t measure(const mpdw::CanonicalApplicant& r, const std::string& m) {
  if (m == "total") return 1;
  if (m == "seekers") return r.sector.empty() ? 1 : 0;
  if (m == "directed") return r.sector.empty() ? 0 : 1;
  return 0;
}

inline bool passes(const mpdw::CanonicalApplicant& r, const std::vector<Filter>& filters) {
  for (const auto& f : filters) {
    if (!f.members.count(label(r, f.dim, f.level))) return false;
  }
  return true;
}

using Answer = std::map<std::vector<std::string>, std::uint64_t>;

/// Nested-loop group-by: one entry per group holding at least one passing
/// record (a zero-valued group still appears).
inline Answer group_by(const std::vector<mpdw::CanonicalApplicant>& records, const std::string& m,
                       const std::vector<Group>& groups, const std::vector<Filter>& filters) {
  Answer out;
  for (const auto& r : records) {
    if (!passes(r, filters)) continue;
    std::vector<std::string> key;
    for (const auto& g : groups) key.push_back(label(r, g.dim, g.level));
    out[key] += measure(r, m);
  }
  return out;
}

/// Sum of a measure over all passing records.
inline std::uint64_t total(const std::vector<mpdw::CanonicalApplicant>& records, const std::string& m,
                           const std::vector<Filter>& filters = {}) {
  std::uint64_t n = 0;
  for (const auto& r : records) {
    if (passes(r, filters)) n += measure(r, m);
  }
  return n;
}

/// Walks parent links upward from `value` until `steps` links are followed.
inline std::string ancestor_walk(const std::map<std::string, std::string>& parent, std::string value, int steps) {
  for (int i = 0; i < steps; ++i) {
    const auto it = parent.find(value);
    if (it == parent.end()) return {};
    value = it->second;
  }
  return value;
}

/// Keeps the record with the greatest (year, quarter); ties go to the
/// lexicographically smaller city, then source id. Written as a linear
/// scan per key, unlike the library's sort.
inline std::map<std::string, mpdw::CanonicalApplicant> keep_latest(
    const std::vector<mpdw::CanonicalApplicant>& records) {
  std::map<std::string, mpdw::CanonicalApplicant> best;
  for (const auto& r : records) {
    auto it = best.find(r.national_id);
    if (it == best.end()) {
      best.emplace(r.national_id, r);
      continue;
    }
    const auto& b = it->second;
    const int ra = r.year * 4 + static_cast<int>(r.quarter);
    const int rb = b.year * 4 + static_cast<int>(b.quarter);
    bool take = false;
    if (ra != rb) {
      take = ra > rb;
    } else if (r.city != b.city) {
      take = r.city < b.city;
    } else if (r.source_id != b.source_id) {
      take = r.source_id < b.source_id;
    }
    if (take) it->second = r;
  }
  return best;
}

}  // namespace oracle
