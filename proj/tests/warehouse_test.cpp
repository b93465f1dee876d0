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

#include <gtest/gtest.h>

#include <set>

#include "fixtures.hpp"
#include "mpdw/warehouse.hpp"

using namespace mpdw;
using fixture::code_of;

namespace {

constexpr YearRange kYears{2000, 2006};

}  // namespace

TEST(BuildTest, TimeCoversEveryQuarter) {
  const auto s = build_schema(fixture::random_records(50, 1, 2003, 2003), kYears);
  const auto& time = s.dim(Dimension::time);
  ASSERT_EQ(time.size(), 28u);
  EXPECT_EQ(time.row(1).natural_key, "2000-Q1");
  EXPECT_EQ(time.row(28).natural_key, "2006-Q4");
  EXPECT_EQ(time.row(6).attributes, (std::vector<std::string>{"2001", "Q2"}));
  std::set<std::string> quarters;
  for (const auto& r : time.rows()) quarters.insert(r.attributes[1]);
  EXPECT_EQ(quarters.size(), 4u);
}

TEST(BuildTest, EmptyInputStillHasTime) {
  const auto s = build_schema({}, kYears);
  EXPECT_EQ(s.dim(Dimension::time).size(), 28u);
  EXPECT_TRUE(s.facts.empty());
  EXPECT_TRUE(s.dim(Dimension::city).empty());
  EXPECT_TRUE(check_integrity(s).empty());
}

TEST(BuildTest, EmptyYearRangeRejected) {
  EXPECT_EQ(code_of([] { build_schema({}, {2006, 2000}); }), ErrorCode::empty_year_range);
}

TEST(BuildTest, DenseSortedIdsAndDistinctMembers) {
  const auto records = fixture::random_records(800, 2);
  const auto s = build_schema(records, kYears);
  for (Dimension d : kDimensions) {
    const auto& t = s.dim(d);
    for (std::size_t i = 0; i < t.size(); ++i) EXPECT_EQ(t.rows()[i].id, i + 1);
    if (d == Dimension::time) continue;
    std::set<std::string> members;
    for (const auto& r : records) members.insert(natural_key(d, r));
    ASSERT_EQ(t.size(), members.size());
    std::size_t i = 0;
    for (const auto& m : members) EXPECT_EQ(t.rows()[i++].natural_key, m);
  }
  EXPECT_EQ(s.dim(Dimension::education_level).size(), 6u);
}

TEST(BuildTest, FactsAggregateRecords) {
  const auto records = fixture::random_records(2000, 3);
  const auto s = build_schema(records, kYears);
  EXPECT_EQ(total_applicants(s), records.size());
  std::uint64_t seekers = 0;
  std::uint64_t directed = 0;
  std::set<FactKey> keys;
  for (const auto& f : s.facts) {
    EXPECT_EQ(f.total_applicants, f.num_seekers + f.num_directed);
    EXPECT_GT(f.total_applicants, 0u);
    seekers += f.num_seekers;
    directed += f.num_directed;
    keys.insert(f.key());
  }
  EXPECT_EQ(keys.size(), s.facts.size());
  EXPECT_EQ(seekers, oracle::total(records, "seekers"));
  EXPECT_EQ(directed, oracle::total(records, "directed"));
  EXPECT_TRUE(std::is_sorted(s.facts.begin(), s.facts.end(),
                             [](const FactRow& a, const FactRow& b) { return a.key() < b.key(); }));
}

TEST(BuildTest, CongressCarriesCity) {
  const auto s = build_schema(fixture::random_records(300, 4), kYears);
  for (const auto& row : s.dim(Dimension::congress).rows()) {
    ASSERT_EQ(row.attributes.size(), 2u);
    EXPECT_EQ(row.natural_key, row.attributes[1] + "/" + row.attributes[0]);
  }
  EXPECT_TRUE(check_integrity(s).empty());
}

TEST(BuildTest, OutOfRangeYearUnresolved) {
  auto records = fixture::random_records(10, 5);
  records[3].year = 2009;
  EXPECT_EQ(code_of([&] { build_schema(records, kYears); }), ErrorCode::unresolved_dimension_value);
}

TEST(IntegrityTest, DetectsViolations) {
  const auto good = build_schema(fixture::random_records(200, 6), kYears);
  ASSERT_TRUE(good.facts.size() > 2);

  auto dangling = good;
  dangling.facts[0].sector_id = 999;
  EXPECT_FALSE(check_integrity(dangling).empty());

  auto unbalanced = good;
  unbalanced.facts[1].num_seekers += 1;
  EXPECT_FALSE(check_integrity(unbalanced).empty());

  auto repeated = good;
  repeated.facts.push_back(repeated.facts[0]);
  EXPECT_FALSE(check_integrity(repeated).empty());

  auto short_time = good;
  short_time.meta.years.to = 2007;
  EXPECT_FALSE(check_integrity(short_time).empty());
}

TEST(RefreshTest, KeepsIdsAndAppendsNewMembers) {
  const auto first = fixture::random_records(400, 7);
  auto all = first;
  auto extra = fixture::random_records(100, 8);
  for (auto& r : extra) {
    r.national_id = "x" + r.national_id;
    r.preferred_sector = "Tourism";
    r.sector.clear();
  }
  all.insert(all.end(), extra.begin(), extra.end());

  const auto base = build_schema(first, kYears);
  const auto refreshed = refresh(base, all);
  for (Dimension d : kDimensions) {
    const auto& before = base.dim(d);
    const auto& after = refreshed.dim(d);
    ASSERT_GE(after.size(), before.size());
    for (std::size_t i = 0; i < before.size(); ++i) EXPECT_EQ(after.rows()[i], before.rows()[i]);
  }
  EXPECT_EQ(refreshed.dim(Dimension::sector).rows().back().natural_key, "Tourism");
  EXPECT_TRUE(check_integrity(refreshed).empty());
  EXPECT_TRUE(structurally_equal(refreshed, build_schema(all, kYears)));
}

TEST(RefreshTest, NoNewDataIsIdentity) {
  const auto records = fixture::random_records(300, 9);
  const auto s = build_schema(records, kYears);
  EXPECT_EQ(refresh(s, records), s);
}

TEST(PersistTest, RoundTripIsExact) {
  fixture::TempDir dir("persist");
  auto s = build_schema(fixture::random_records(500, 10), kYears, "2007-01-01T00:00:00Z", {{"tripoli", 500}});
  persist(s, dir.path());
  for (Dimension d : kDimensions) EXPECT_TRUE(std::filesystem::exists(dir / std::string(table_file(d))));
  EXPECT_TRUE(std::filesystem::exists(dir / std::string(kFactFile)));
  const auto back = load_schema(dir.path());
  EXPECT_EQ(back, s);
  EXPECT_TRUE(check_integrity(back).empty());
}

TEST(PersistTest, SevenTablesWithExpectedHeaders) {
  fixture::TempDir dir("headers");
  persist(build_schema(fixture::random_records(20, 11), kYears), dir.path());
  std::size_t csv = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir.path())) csv += e.path().extension() == ".csv";
  EXPECT_EQ(csv, 7u);
  const auto fact = read_file(dir / "fact.csv");
  EXPECT_EQ(fact.substr(0, fact.find('\n')),
            "city_id,sector_id,edulevel_id,cong_id,service_id,time_id,total_applicants,num_seekers,num_directed");
}

TEST(PersistTest, TruncatedFactIsCorrupt) {
  fixture::TempDir dir("truncated");
  persist(build_schema(fixture::random_records(100, 12), kYears), dir.path());
  const auto fact = read_file(dir / "fact.csv");
  write_file(dir / "fact.csv", fact.substr(0, fact.size() / 2));
  EXPECT_EQ(code_of([&] { load_schema(dir.path()); }), ErrorCode::corrupt_manifest);
}

TEST(PersistTest, MissingFileIsIoError) {
  fixture::TempDir dir("missing");
  persist(build_schema(fixture::random_records(10, 13), kYears), dir.path());
  std::filesystem::remove(dir / "dim_time.csv");
  const auto code = code_of([&] { load_schema(dir.path()); });
  ASSERT_TRUE(code);
  EXPECT_EQ(*code, ErrorCode::io_error);
  EXPECT_EQ(code_of([&] { load_schema(dir / "nowhere"); }), ErrorCode::io_error);
}

TEST(PersistTest, GarbledManifestIsCorrupt) {
  fixture::TempDir dir("garbled");
  persist(build_schema({}, kYears), dir.path());
  write_file(dir / "manifest.txt", "not a manifest\n");
  EXPECT_EQ(code_of([&] { load_schema(dir.path()); }), ErrorCode::corrupt_manifest);
}
