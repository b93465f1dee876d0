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
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mpdw/applicant.hpp"
#include "mpdw/cube.hpp"
#include "mpdw/warehouse.hpp"
#include "oracles.hpp"

namespace fixture {

/// Warehouse-ready records, small domains so groups collide often.
inline std::vector<mpdw::CanonicalApplicant> random_records(std::size_t n, std::uint64_t seed, int year_from = 2000,
                                                            int year_to = 2006) {
  std::mt19937_64 rng(seed);
  const auto pick = [&](std::size_t k) { return static_cast<std::size_t>(rng() % k); };
  static const std::vector<std::string> cities{"Misurata", "Sirte", "Tripoli"};
  static const std::vector<std::string> sectors{"Health", "Education", "Oil and Gas", "Industry", "Commerce"};
  static const std::vector<std::string> edu{"primary", "preparatory", "secondary", "diploma", "bachelor", "postgraduate"};
  static const std::vector<std::string> service{"completed", "exempted", "postponed"};
  std::vector<mpdw::CanonicalApplicant> out;
  for (std::size_t i = 0; i < n; ++i) {
    mpdw::CanonicalApplicant r;
    r.city = cities[pick(cities.size())];
    r.source_id = r.city.substr(0, 3);
    r.national_id = std::to_string(100000 + i);
    r.name = "Person " + std::to_string(i);
    r.sex = pick(2) ? "male" : "female";
    r.congress = "C" + std::to_string(1 + pick(3));
    r.district = r.congress + "-D" + std::to_string(1 + pick(2));
    r.specialty = "Nursing";
    r.job_group = "Medical";
    r.preferred_sector = sectors[pick(sectors.size())];
    if (pick(5) < 2) r.sector = sectors[pick(sectors.size())];
    r.moahel = "None";
    r.education_level = edu[pick(edu.size())];
    r.service_status = service[pick(service.size())];
    r.year = year_from + static_cast<int>(pick(static_cast<std::size_t>(year_to - year_from + 1)));
    r.quarter = static_cast<mpdw::Quarter>(1 + pick(4));
    out.push_back(std::move(r));
  }
  return out;
}

/// Code of the mpdw::Error the callable throws, or nullopt.
template <typename F>
std::optional<mpdw::ErrorCode> code_of(F&& f) {
  try {
    f();
  } catch (const mpdw::Error& e) {
    return e.code();
  }
  return std::nullopt;
}

inline std::string dim_name(mpdw::Dimension d) { return std::string(mpdw::to_string(d)); }

/// Converts a library result table to the oracle's answer shape.
inline oracle::Answer as_answer(const mpdw::ResultTable& t) {
  oracle::Answer a;
  for (const auto& row : t.rows) a[row.labels] = row.values.at(0);
  return a;
}

/// Every stored cell of a cube keyed by its axis labels.
inline oracle::Answer cube_cells(const mpdw::Cube& c, mpdw::Measure m) {
  oracle::Answer a;
  for (const auto& cell : c.cells()) {
    std::vector<std::string> key;
    for (std::size_t i = 0; i < c.axes().size(); ++i) {
      key.push_back(c.catalog().label(c.axes()[i].dimension, c.axes()[i].level, cell.coord[i]));
    }
    a[key] += mpdw::pick(cell.measures, m);
  }
  return a;
}

inline std::vector<oracle::Group> axis_groups(const mpdw::Cube& c) {
  std::vector<oracle::Group> g;
  for (const auto& ax : c.axes()) g.push_back({dim_name(ax.dimension), c.catalog().level_name(ax.dimension, ax.level)});
  return g;
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("mpdw-" + tag + "-" + std::to_string(rd()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& p) const { return path_ / p; }

 private:
  std::filesystem::path path_;
};

}  // namespace fixture
