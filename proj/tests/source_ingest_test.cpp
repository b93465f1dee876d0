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
#include "mpdw/source_ingest.hpp"

using namespace mpdw;
using fixture::code_of;

namespace {

void put16(std::string& b, std::size_t at, unsigned v) {
  b[at] = static_cast<char>(v & 0xFF);
  b[at + 1] = static_cast<char>((v >> 8) & 0xFF);
}

struct DbfField {
  std::string name;
  char type;
  unsigned length;
};

// Hand-assembled dBASE III bytes, independent of the library writer.
std::string hand_dbf(const std::vector<DbfField>& fields, const std::vector<std::pair<char, std::string>>& rows,
                     bool eof_marker = true) {
  const unsigned header = 32 + 32 * static_cast<unsigned>(fields.size()) + 1;
  unsigned rec = 1;
  for (const auto& f : fields) rec += f.length;
  std::string b(32, '\0');
  b[0] = 0x03;
  b[1] = 106;  // 2006
  b[2] = 12;
  b[3] = 31;
  const auto n = static_cast<unsigned>(rows.size());
  b[4] = static_cast<char>(n & 0xFF);
  b[5] = static_cast<char>((n >> 8) & 0xFF);
  b[6] = static_cast<char>((n >> 16) & 0xFF);
  b[7] = static_cast<char>((n >> 24) & 0xFF);
  put16(b, 8, header);
  put16(b, 10, rec);
  for (const auto& f : fields) {
    std::string d(32, '\0');
    std::copy(f.name.begin(), f.name.end(), d.begin());
    d[11] = f.type;
    d[16] = static_cast<char>(f.length);
    b += d;
  }
  b += '\x0D';
  for (const auto& [flag, body] : rows) {
    b += flag;
    b += body;
  }
  if (eof_marker) b += '\x1A';
  return b;
}

std::string pad(const std::string& s, std::size_t n) { return s + std::string(n - s.size(), ' '); }

const std::vector<DbfField> kFields{{"ID", 'C', 4}, {"AGE", 'N', 3}, {"SEEN", 'D', 8}};

}  // namespace

TEST(DbfTest, ZeroRecordsParsesEmpty) {
  const std::string b = hand_dbf(kFields, {});
  const auto t = read_dbf(b);
  EXPECT_EQ(t.record_count, 0u);
  EXPECT_EQ(t.header_length, 32u + 32u * 3u + 1u);
  EXPECT_EQ(t.record_length, 16u);
  EXPECT_TRUE(t.records.empty());
  EXPECT_EQ(t.fields.size(), 3u);
  EXPECT_EQ(t.fields[1].kind, FieldKind::numeric);
  EXPECT_EQ(t.fields[2].offset, 7u);
}

TEST(DbfTest, ReadsValuesAndSkipsDeleted) {
  const std::string b = hand_dbf(kFields, {{' ', pad("A1", 4) + " 42" + "20040315"},
                                           {'*', pad("GONE", 4) + "  1" + "20010101"},
                                           {' ', pad("B 2", 4) + "  7" + "        "}});
  const auto t = read_dbf(b, "ascii", "sirte");
  ASSERT_EQ(t.records.size(), 2u);
  EXPECT_EQ(t.deleted, 1u);
  EXPECT_EQ(t.records.size() + t.deleted, t.record_count);
  EXPECT_EQ(t.records[0].source_id, "sirte");
  EXPECT_EQ(t.records[0].values, (std::vector<std::string>{"A1", "42", "20040315"}));
  EXPECT_EQ(t.records[1].values, (std::vector<std::string>{"B 2", "7", ""}));
  EXPECT_EQ(*t.records[1].find("ID"), "B 2");
  EXPECT_EQ(t.last_update[0], 106);
}

TEST(DbfTest, EofMarkerIsOptional) {
  const std::string b = hand_dbf(kFields, {{' ', pad("A", 4) + "  1" + "20000101"}}, false);
  EXPECT_EQ(parse_dbf(b).size(), 1u);
}

TEST(DbfTest, ShortHeaderIsTruncated) {
  EXPECT_EQ(code_of([] { read_dbf(std::string(10, '\x03')); }), ErrorCode::truncated_file);
}

TEST(DbfTest, WrongVersionIsMalformed) {
  std::string b = hand_dbf(kFields, {});
  b[0] = 0x30;  // Visual FoxPro
  EXPECT_EQ(code_of([&] { read_dbf(b); }), ErrorCode::malformed_header);
}

TEST(DbfTest, HeaderLengthMismatchIsMalformed) {
  std::string b = hand_dbf(kFields, {});
  put16(b, 8, 200);
  EXPECT_EQ(code_of([&] { read_dbf(b); }), ErrorCode::malformed_header);
}

TEST(DbfTest, RecordLengthMismatchIsMalformed) {
  std::string b = hand_dbf(kFields, {});
  put16(b, 10, 99);
  EXPECT_EQ(code_of([&] { read_dbf(b); }), ErrorCode::malformed_header);
}

TEST(DbfTest, MissingBodyIsTruncated) {
  std::string b = hand_dbf(kFields, {{' ', pad("A", 4) + "  1" + "20000101"}}, false);
  b.resize(b.size() - 5);
  EXPECT_EQ(code_of([&] { read_dbf(b); }), ErrorCode::truncated_file);
}

TEST(DbfTest, MemoFieldIsUnsupported) {
  const std::string b = hand_dbf({{"NOTE", 'M', 10}}, {});
  EXPECT_EQ(code_of([&] { read_dbf(b); }), ErrorCode::unsupported_field_type);
}

TEST(DbfTest, TrailingGarbageIsMalformed) {
  std::string b = hand_dbf(kFields, {});
  b += "junk";
  EXPECT_EQ(code_of([&] { read_dbf(b); }), ErrorCode::malformed_header);
}

TEST(DbfTest, DecodesCodepage) {
  const std::string b = hand_dbf({{"NAME", 'C', 4}}, {{' ', "\xD8\xC7  "}});
  const auto r = parse_dbf(b, "cp1256");
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(r[0].values[0], "\xD8\xB7\xD8\xA7");
}

TEST(FixedWidthTest, SlicesAndTrims) {
  const auto layout = packed_layout({{"ID", FieldKind::character, 0, 4, 0}, {"YR", FieldKind::numeric, 0, 4, 0}});
  const auto r = parse_fixed_width("A1  2004\nB   2005\r\n", layout, "ascii", "tripoli");
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r[0].values, (std::vector<std::string>{"A1", "2004"}));
  EXPECT_EQ(r[1].values, (std::vector<std::string>{"B", "2005"}));
  EXPECT_EQ(r[1].source_id, "tripoli");
}

TEST(FixedWidthTest, ShortLineNamesLine) {
  const auto layout = packed_layout({{"ID", FieldKind::character, 0, 4, 0}, {"YR", FieldKind::numeric, 0, 4, 0}});
  try {
    parse_fixed_width("A1  2004\nB  20\n", layout);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::short_line);
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}

TEST(FixedWidthTest, EmptyFileNoRecords) {
  const auto layout = packed_layout({{"ID", FieldKind::character, 0, 4, 0}});
  EXPECT_TRUE(parse_fixed_width("", layout).empty());
}

TEST(FixedWidthTest, OverlappingLayoutIsInvalid) {
  const std::vector<FieldDescriptor> layout{{"A", FieldKind::character, 0, 4, 0}, {"B", FieldKind::character, 2, 4, 0}};
  EXPECT_EQ(code_of([&] { parse_fixed_width("abcdef\n", layout); }), ErrorCode::invalid_layout);
  const std::vector<FieldDescriptor> dup{{"A", FieldKind::character, 0, 1, 0}, {"A", FieldKind::character, 1, 1, 0}};
  EXPECT_EQ(code_of([&] { validate_layout(dup); }), ErrorCode::invalid_layout);
}

TEST(FixedWidthTest, GapsBetweenFieldsAreIgnored) {
  const std::vector<FieldDescriptor> layout{{"A", FieldKind::character, 0, 2, 0}, {"B", FieldKind::character, 4, 2, 0}};
  const auto r = parse_fixed_width("ab--cd\n", layout);
  EXPECT_EQ(r[0].values, (std::vector<std::string>{"ab", "cd"}));
}

TEST(DelimitedTest, HeaderNamesAndQuotes) {
  const auto r = parse_delimited("id,name\n1,\"Ali, Omar\"\n2,Huda\n", ',', true, "utf-8", "misurata");
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(*r[0].find("name"), "Ali, Omar");
  EXPECT_EQ(r[1].source_id, "misurata");
}

TEST(DelimitedTest, HeaderlessGetsPositionalNames) {
  const auto r = parse_delimited("1;a\n2;b\n", ';', false);
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(*r[1].find("f1"), "b");
}

TEST(DelimitedTest, RaggedRowNamesRow) {
  try {
    parse_delimited("a,b\n1,2\n3\n", ',', true);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ragged_row);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
}

TEST(DelimitedTest, HeaderOnlyIsEmpty) { EXPECT_TRUE(parse_delimited("a,b\n", ',', true).empty()); }

namespace {

SourceSpec basic_spec() {
  SourceSpec s;
  s.source_id = "misurata";
  s.city = "Misurata";
  s.format = SourceFormat::delimited;
  s.mapping.field_map = {{Field::national_id, "id"},
                         {Field::sex, "g"},
                         {Field::sector, "sec"},
                         {Field::education_level, "edu"},
                         {Field::year, "y"},
                         {Field::quarter, "q"}};
  s.mapping.value_codebooks[Field::education_level] = {{"1", "primary"}, {"2", "secondary"}};
  s.mapping.value_codebooks[Field::quarter] = {{"1", "Q1"}, {"2", "Q2"}, {"3", "Q3"}, {"4", "Q4"}};
  return s;
}

}  // namespace

TEST(MappingTest, AppliesFieldMapAndCodebooks) {
  const auto spec = basic_spec();
  const auto raw = make_raw_record("misurata", {{"id", "77"}, {"g", "male"}, {"sec", ""}, {"edu", "2"}, {"y", "2003"}, {"q", "4"}});
  IngestReport report;
  const auto a = map_to_canonical(raw, spec, &report);
  EXPECT_EQ(a.national_id, "77");
  EXPECT_EQ(a.city, "Misurata");
  EXPECT_EQ(a.source_id, "misurata");
  EXPECT_EQ(a.education_level, "secondary");
  EXPECT_EQ(a.year, 2003);
  EXPECT_EQ(a.quarter, Quarter::Q4);
  EXPECT_EQ(a.status(), Status::seeker);
  EXPECT_TRUE(a.has(Field::sex));
  EXPECT_FALSE(a.has(Field::congress));
  EXPECT_EQ(report.records_mapped, 1u);
  EXPECT_EQ(report.total_untranslated(), 0u);
}

TEST(MappingTest, DirectedWhenSectorPresent) {
  const auto raw = make_raw_record("m", {{"id", "1"}, {"g", ""}, {"sec", "Health"}, {"edu", "1"}, {"y", "2000"}, {"q", "1"}});
  const auto a = map_to_canonical(raw, basic_spec());
  EXPECT_EQ(a.status(), Status::directed);
}

TEST(MappingTest, UnknownCodePassesThroughAndIsCounted) {
  const auto raw = make_raw_record("m", {{"id", "1"}, {"g", ""}, {"sec", ""}, {"edu", "PRI"}, {"y", "2000"}, {"q", "1"}});
  IngestReport report;
  const auto a = map_to_canonical(raw, basic_spec(), &report);
  EXPECT_EQ(a.education_level, "PRI");
  EXPECT_EQ(report.untranslated_codes[Field::education_level], 1u);
}

TEST(MappingTest, MissingMandatoryField) {
  const auto raw = make_raw_record("m", {{"g", ""}, {"sec", ""}, {"edu", "1"}, {"y", "2000"}, {"q", "1"}});
  EXPECT_EQ(code_of([&] { map_to_canonical(raw, basic_spec()); }), ErrorCode::missing_mandatory_field);
}

TEST(MappingTest, MissingOptionalFieldLeftEmpty) {
  const auto raw = make_raw_record("m", {{"id", "1"}, {"sec", ""}, {"edu", "1"}, {"y", "2000"}, {"q", "1"}});
  const auto a = map_to_canonical(raw, basic_spec());
  EXPECT_EQ(a.sex, "");
}

TEST(MappingTest, BadYearOrQuarter) {
  const auto bad_year = make_raw_record("m", {{"id", "1"}, {"g", ""}, {"sec", ""}, {"edu", "1"}, {"y", "20x0"}, {"q", "1"}});
  EXPECT_EQ(code_of([&] { map_to_canonical(bad_year, basic_spec()); }), ErrorCode::invalid_value);
  const auto bad_q = make_raw_record("m", {{"id", "1"}, {"g", ""}, {"sec", ""}, {"edu", "1"}, {"y", "2000"}, {"q", "9"}});
  EXPECT_EQ(code_of([&] { map_to_canonical(bad_q, basic_spec()); }), ErrorCode::invalid_value);
}

TEST(MappingTest, DateFieldGivesYearAndQuarter) {
  SourceSpec s = basic_spec();
  s.mapping.field_map.erase(Field::year);
  s.mapping.field_map.erase(Field::quarter);
  s.mapping.application_date_field = "D";
  validate_source_spec(s);
  for (const auto& [date, q] : std::vector<std::pair<std::string, Quarter>>{
           {"20050101", Quarter::Q1}, {"20050331", Quarter::Q1}, {"20050401", Quarter::Q2},
           {"20050930", Quarter::Q3}, {"20051231", Quarter::Q4}}) {
    const auto raw = make_raw_record("s", {{"id", "1"}, {"g", ""}, {"sec", ""}, {"edu", "1"}, {"D", date}});
    const auto a = map_to_canonical(raw, s);
    EXPECT_EQ(a.year, 2005);
    EXPECT_EQ(a.quarter, q) << date;
  }
  const auto bad = make_raw_record("s", {{"id", "1"}, {"g", ""}, {"sec", ""}, {"edu", "1"}, {"D", "20051301"}});
  EXPECT_EQ(code_of([&] { map_to_canonical(bad, s); }), ErrorCode::invalid_value);
}

TEST(MappingTest, DeterministicOnRepeat) {
  const auto raw = make_raw_record("m", {{"id", "9"}, {"g", "f"}, {"sec", "X"}, {"edu", "1"}, {"y", "2001"}, {"q", "2"}});
  EXPECT_EQ(map_to_canonical(raw, basic_spec()), map_to_canonical(raw, basic_spec()));
}

TEST(SpecTest, RejectsIncompleteSpecs) {
  SourceSpec s = basic_spec();
  s.mapping.field_map.erase(Field::national_id);
  EXPECT_EQ(code_of([&] { validate_source_spec(s); }), ErrorCode::config_error);
  s = basic_spec();
  s.mapping.field_map.erase(Field::quarter);
  EXPECT_EQ(code_of([&] { validate_source_spec(s); }), ErrorCode::config_error);
  s = basic_spec();
  s.mapping.field_map[Field::city] = "c";
  EXPECT_EQ(code_of([&] { validate_source_spec(s); }), ErrorCode::config_error);
  s = basic_spec();
  s.format = SourceFormat::fixed_width;
  EXPECT_EQ(code_of([&] { validate_source_spec(s); }), ErrorCode::config_error);
}

TEST(SpecTest, ParseSourceDispatches) {
  SourceSpec s = basic_spec();
  const auto r = parse_source("id,g,sec,edu,y,q\n5,m,,1,2002,3\n", s);
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(map_to_canonical(r[0], s).national_id, "5");
}
