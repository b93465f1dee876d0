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

#include "fixtures.hpp"
#include "mpdw/cube.hpp"

using namespace mpdw;
using fixture::code_of;

namespace {

class CubeTest : public ::testing::Test {
 protected:
  void SetUp() override {
    records = fixture::random_records(3000, 42);
    schema = build_schema(records, {2000, 2006});
    base = build_cube(schema);
  }

  std::vector<CanonicalApplicant> records;
  StarSchema schema;
  Cube base;
};

std::vector<oracle::Group> all_base_groups() {
  std::vector<oracle::Group> g;
  for (Dimension d : kDimensions) g.push_back({fixture::dim_name(d), ""});
  return g;
}

}  // namespace

TEST_F(CubeTest, BaseCellsMatchFactTable) {
  EXPECT_EQ(base.cells().size(), schema.facts.size());
  EXPECT_EQ(base.axes().size(), 6u);
  EXPECT_EQ(base.mass().total, records.size());
  for (auto m : {Measure::total, Measure::seekers, Measure::directed}) {
    EXPECT_EQ(fixture::cube_cells(base, m), oracle::group_by(records, std::string(to_string(m)), all_base_groups(), {}));
  }
}

TEST_F(CubeTest, CorruptSchemaRejected) {
  auto bad = schema;
  bad.facts[0].num_directed += 1;
  EXPECT_EQ(code_of([&] { build_cube(bad); }), ErrorCode::integrity_violation);
}

TEST_F(CubeTest, RollupTimeToYearConservesAndMatchesOracle) {
  const Cube yearly = rollup(base, Dimension::time, "year");
  EXPECT_EQ(yearly.mass(), base.mass());
  auto groups = all_base_groups();
  groups.back().level = "year";
  EXPECT_EQ(fixture::cube_cells(yearly, Measure::total), oracle::group_by(records, "total", groups, {}));
  EXPECT_EQ(yearly.axes()[index_of(Dimension::time)].members.size(), 7u);
}

TEST_F(CubeTest, RollupCongressToCity) {
  const Cube by_city = rollup(base, Dimension::congress, "city");
  EXPECT_EQ(by_city.mass(), base.mass());
  auto groups = all_base_groups();
  groups[index_of(Dimension::congress)].level = "city";
  EXPECT_EQ(fixture::cube_cells(by_city, Measure::seekers), oracle::group_by(records, "seekers", groups, {}));
}

TEST_F(CubeTest, RollupsCommute) {
  const Cube a = rollup(rollup(base, Dimension::time, "year"), Dimension::congress, "city");
  const Cube b = rollup(rollup(base, Dimension::congress, "city"), Dimension::time, "year");
  EXPECT_EQ(a, b);
}

TEST_F(CubeTest, RollupErrors) {
  EXPECT_EQ(code_of([&] { rollup(base, Dimension::time, "decade"); }), ErrorCode::bad_level);
  EXPECT_EQ(code_of([&] { rollup(base, Dimension::time, "quarter"); }), ErrorCode::bad_level);
  const Cube yearly = rollup(base, Dimension::time, "year");
  EXPECT_EQ(code_of([&] { rollup(yearly, Dimension::time, "year"); }), ErrorCode::bad_level);
  EXPECT_EQ(code_of([&] { rollup(base, Dimension::sector, "year"); }), ErrorCode::bad_level);
}

TEST_F(CubeTest, DrilldownInvertsRollup) {
  const Cube yearly = rollup(base, Dimension::time, "year");
  EXPECT_EQ(drilldown(yearly, base, Dimension::time, "quarter"), base);
  const Cube both = rollup(yearly, Dimension::congress, "city");
  EXPECT_EQ(drilldown(both, base, Dimension::time, "quarter"), rollup(base, Dimension::congress, "city"));
}

TEST_F(CubeTest, DrilldownKeepsDiceRestrictions) {
  const std::vector<DiceFilter> f{{Dimension::city, "", {"Sirte"}}};
  const Cube diced_yearly = rollup(dice(base, f), Dimension::time, "year");
  EXPECT_EQ(drilldown(diced_yearly, base, Dimension::time, "quarter"), dice(base, f));
}

TEST_F(CubeTest, DrilldownErrors) {
  EXPECT_EQ(code_of([&] { drilldown(base, base, Dimension::time, "quarter"); }), ErrorCode::bad_level);
  const Cube sliced = slice(base, Dimension::city, "Tripoli");
  EXPECT_EQ(code_of([&] { drilldown(sliced, base, Dimension::time, "quarter"); }), ErrorCode::invalid_query);
}

TEST_F(CubeTest, SliceMatchesOracle) {
  for (const std::string city : {"Misurata", "Sirte", "Tripoli"}) {
    const Cube s = slice(base, Dimension::city, city);
    EXPECT_EQ(s.axes().size(), 5u);
    EXPECT_FALSE(s.axis_of(Dimension::city));
    auto groups = all_base_groups();
    groups.erase(groups.begin());
    EXPECT_EQ(fixture::cube_cells(s, Measure::total),
              oracle::group_by(records, "total", groups, {{"city", "city", {city}}}));
  }
}

TEST_F(CubeTest, SliceEqualsSingletonDiceSummedOut) {
  const Cube s = slice(base, Dimension::education_level, "diploma");
  const std::vector<DiceFilter> f{{Dimension::education_level, "", {"diploma"}}};
  const Cube d = dice(base, f);
  EXPECT_EQ(s.mass(), d.mass());
  EXPECT_EQ(s.cells().size(), d.cells().size());
}

TEST_F(CubeTest, SliceErrors) {
  EXPECT_EQ(code_of([&] { slice(base, Dimension::city, "Benghazi"); }), ErrorCode::unknown_member);
  const Cube s = slice(base, Dimension::city, "Sirte");
  EXPECT_EQ(code_of([&] { slice(s, Dimension::city, "Sirte"); }), ErrorCode::invalid_query);
}

TEST_F(CubeTest, DiceMatchesOracleIncludingHigherLevels) {
  const std::vector<DiceFilter> f{{Dimension::time, "year", {"2001", "2004"}},
                                  {Dimension::sector, "", {"Health", "Industry"}},
                                  {Dimension::service, "", {"completed"}}};
  const Cube d = dice(base, f);
  EXPECT_EQ(d.axes().size(), 6u);
  EXPECT_EQ(fixture::cube_cells(d, Measure::directed),
            oracle::group_by(records, "directed", all_base_groups(),
                             {{"time", "year", {"2001", "2004"}},
                              {"sector", "sector", {"Health", "Industry"}},
                              {"service", "service", {"completed"}}}));
}

TEST_F(CubeTest, DiceErrors) {
  const std::vector<DiceFilter> empty{{Dimension::city, "", {}}};
  EXPECT_EQ(code_of([&] { dice(base, empty); }), ErrorCode::empty_member_set);
  const std::vector<DiceFilter> unknown{{Dimension::city, "", {"Tripoli", "Derna"}}};
  EXPECT_EQ(code_of([&] { dice(base, unknown); }), ErrorCode::unknown_member);
  const Cube yearly = rollup(base, Dimension::time, "year");
  const std::vector<DiceFilter> below{{Dimension::time, "quarter", {"2001-Q1"}}};
  EXPECT_EQ(code_of([&] { dice(yearly, below); }), ErrorCode::bad_level);
}

TEST_F(CubeTest, AggregateMatchesOracle) {
  AggregateQuery q;
  q.measure = Measure::seekers;
  q.group_by = {{Dimension::sector, ""}, {Dimension::time, "year"}};
  q.filters = {{Dimension::congress, "city", {"Tripoli", "Sirte"}}};
  const auto t = aggregate(base, q);
  EXPECT_EQ(t.columns, (std::vector<std::string>{"sector", "time:year", "seekers"}));
  EXPECT_EQ(fixture::as_answer(t), oracle::group_by(records, "seekers", {{"sector", ""}, {"time", "year"}},
                                                    {{"congress", "city", {"Tripoli", "Sirte"}}}));
  EXPECT_TRUE(std::is_sorted(t.rows.begin(), t.rows.end(),
                             [](const ResultRow& a, const ResultRow& b) { return a.labels < b.labels; }));
}

TEST_F(CubeTest, AggregateNoGroupsIsGrandTotal) {
  const auto t = aggregate(base, AggregateQuery{});
  ASSERT_EQ(t.rows.size(), 1u);
  EXPECT_EQ(t.rows[0].values[0], records.size());
}

TEST_F(CubeTest, AggregateKeepsZeroGroups) {
  AggregateQuery q;
  q.measure = Measure::directed;
  q.group_by = {{Dimension::city, ""}, {Dimension::time, ""}};
  const auto answer = oracle::group_by(records, "directed", {{"city", ""}, {"time", ""}}, {});
  EXPECT_EQ(fixture::as_answer(aggregate(base, q)), answer);
}

TEST_F(CubeTest, AggregateOnRolledCubeEqualsOnBase) {
  AggregateQuery q;
  q.group_by = {{Dimension::time, "year"}, {Dimension::education_level, ""}};
  EXPECT_EQ(aggregate(rollup(base, Dimension::time, "year"), q), aggregate(base, q));
}

TEST_F(CubeTest, AggregateErrors) {
  AggregateQuery twice;
  twice.group_by = {{Dimension::city, ""}, {Dimension::city, ""}};
  EXPECT_EQ(code_of([&] { aggregate(base, twice); }), ErrorCode::invalid_query);
  AggregateQuery below;
  below.group_by = {{Dimension::time, "quarter"}};
  const Cube yearly = rollup(base, Dimension::time, "year");
  EXPECT_EQ(code_of([&] { aggregate(yearly, below); }), ErrorCode::bad_level);
  AggregateQuery unknown;
  unknown.filters = {{Dimension::sector, "", {"Fishing"}}};
  EXPECT_EQ(code_of([&] { aggregate(base, unknown); }), ErrorCode::unknown_member);
}

TEST(CubeEmptyTest, EmptyWarehouseGivesEmptyTables) {
  const auto schema = build_schema({}, {2000, 2006});
  const Cube c = build_cube(schema);
  EXPECT_TRUE(c.cells().empty());
  AggregateQuery q;
  q.group_by = {{Dimension::time, "year"}};
  const auto t = aggregate(c, q);
  EXPECT_TRUE(t.rows.empty());
  EXPECT_EQ(t.columns.size(), 2u);
}

TEST(CubeMeasureTest, ParseAndPick) {
  EXPECT_EQ(parse_measure("directed"), Measure::directed);
  EXPECT_FALSE(parse_measure("mean"));
  const Measures m{5, 3, 2};
  EXPECT_EQ(pick(m, Measure::total), 5u);
  EXPECT_EQ(pick(m, Measure::seekers), 3u);
  EXPECT_EQ(pick(m, Measure::directed), 2u);
}
