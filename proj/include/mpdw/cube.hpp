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

// Sparse multidimensional cube over the six warehouse dimensions, with
// roll-up, drill-down, slice, dice and grouped aggregation.
//
// Hierarchies: time is quarter < year, congress is congress < city; the other
// four dimensions have a single level. A cube keeps a shared, immutable
// catalog of member labels and parent links, so every operation returns a
// new cube without copying label data.

#pragma once

#include <algorithm>
#include <array>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "mpdw/common.hpp"
#include "mpdw/warehouse.hpp"

namespace mpdw {

using MemberId = std::uint32_t;

inline std::vector<std::string> level_names(Dimension d) {
  switch (d) {
    case Dimension::time: return {"quarter", "year"};
    case Dimension::congress: return {"congress", "city"};
    default: return {std::string(to_string(d))};
  }
}

struct Measures {
  std::uint64_t total = 0;
  std::uint64_t seekers = 0;
  std::uint64_t directed = 0;

  Measures& operator+=(const Measures& o) {
    total += o.total;
    seekers += o.seekers;
    directed += o.directed;
    return *this;
  }

  bool operator==(const Measures&) const = default;
};

enum class Measure : std::uint8_t { total, seekers, directed };

inline std::string_view to_string(Measure m) {
  switch (m) {
    case Measure::total: return "total";
    case Measure::seekers: return "seekers";
    case Measure::directed: return "directed";
  }
  return "total";
}

inline std::optional<Measure> parse_measure(std::string_view s) {
  if (s == "total") return Measure::total;
  if (s == "seekers") return Measure::seekers;
  if (s == "directed") return Measure::directed;
  return std::nullopt;
}

inline std::uint64_t pick(const Measures& m, Measure which) {
  switch (which) {
    case Measure::total: return m.total;
    case Measure::seekers: return m.seekers;
    case Measure::directed: return m.directed;
  }
  return 0;
}

/// Labels and parent links for every member of every dimension level.
class CubeCatalog {
 public:
  struct Level {
    std::string name;
    std::unordered_map<MemberId, std::string> labels;
    std::unordered_map<std::string, MemberId> ids;
  };

  struct DimensionLevels {
    std::vector<Level> levels;                      // base first
    std::unordered_map<MemberId, MemberId> parent;  // base id -> id at levels[1]
  };

  static std::shared_ptr<const CubeCatalog> from_schema(const StarSchema& schema) {
    auto cat = std::make_shared<CubeCatalog>();
    for (Dimension d : kDimensions) {
      auto& dl = cat->dims_[index_of(d)];
      const auto names = level_names(d);
      dl.levels.resize(names.size());
      for (std::size_t l = 0; l < names.size(); ++l) dl.levels[l].name = names[l];
      for (const auto& row : schema.dim(d).rows()) {
        dl.levels[0].labels.emplace(row.id, row.natural_key);
        dl.levels[0].ids.emplace(row.natural_key, row.id);
      }
    }
    auto& time = cat->dims_[index_of(Dimension::time)];
    for (const auto& row : schema.dim(Dimension::time).rows()) {
      long long year = 0;
      parse_int(row.attributes.at(0), year);
      const auto id = static_cast<MemberId>(year);
      time.levels[1].labels.emplace(id, row.attributes.at(0));
      time.levels[1].ids.emplace(row.attributes.at(0), id);
      time.parent.emplace(row.id, id);
    }
    auto& congress = cat->dims_[index_of(Dimension::congress)];
    const auto& cities = schema.dim(Dimension::city);
    for (const auto& row : schema.dim(Dimension::congress).rows()) {
      const std::string& city = row.attributes.at(1);
      const auto city_id = cities.find(city);
      if (!city_id) throw Error(ErrorCode::integrity_violation, "congress '" + row.natural_key + "' has unknown city");
      congress.levels[1].labels.emplace(*city_id, city);
      congress.levels[1].ids.emplace(city, *city_id);
      congress.parent.emplace(row.id, *city_id);
    }
    return cat;
  }

  std::size_t level_count(Dimension d) const { return dims_[index_of(d)].levels.size(); }

  std::optional<std::size_t> level_index(Dimension d, std::string_view name) const {
    const auto& levels = dims_[index_of(d)].levels;
    for (std::size_t i = 0; i < levels.size(); ++i) {
      if (levels[i].name == name) return i;
    }
    return std::nullopt;
  }

  const std::string& level_name(Dimension d, std::size_t level) const { return dims_[index_of(d)].levels.at(level).name; }

  const std::string& label(Dimension d, std::size_t level, MemberId id) const {
    return dims_[index_of(d)].levels.at(level).labels.at(id);
  }

  std::optional<MemberId> find(Dimension d, std::size_t level, const std::string& label) const {
    const auto& ids = dims_[index_of(d)].levels.at(level).ids;
    const auto it = ids.find(label);
    if (it == ids.end()) return std::nullopt;
    return it->second;
  }

  /// Id of `id`'s ancestor at `to`, where `id` lives at `from` <= `to`.
  MemberId ancestor(Dimension d, std::size_t from, std::size_t to, MemberId id) const {
    if (from == to) return id;
    return dims_[index_of(d)].parent.at(id);
  }

  /// All members of a level, ordered by label.
  std::vector<MemberId> members(Dimension d, std::size_t level) const {
    std::vector<MemberId> out;
    for (const auto& [id, _] : dims_[index_of(d)].levels.at(level).labels) out.push_back(id);
    sort_by_label(d, level, out);
    return out;
  }

  void sort_by_label(Dimension d, std::size_t level, std::vector<MemberId>& ids) const {
    const auto& labels = dims_[index_of(d)].levels.at(level).labels;
    std::sort(ids.begin(), ids.end(), [&](MemberId a, MemberId b) { return labels.at(a) < labels.at(b); });
  }

 private:
  std::array<DimensionLevels, kDimensionCount> dims_;
};

struct CubeAxis {
  Dimension dimension = Dimension::city;
  std::size_t level = 0;
  std::vector<MemberId> members;  // distinct, ordered by label

  bool operator==(const CubeAxis&) const = default;
};

inline constexpr std::size_t kMaxAxes = kDimensionCount;
using Coord = std::array<MemberId, kMaxAxes>;  // positions past axes().size() are zero

struct Cell {
  Coord coord{};
  Measures measures;

  bool operator==(const Cell&) const = default;
};

class Cube {
 public:
  Cube() = default;

  /// Cells are sorted and cells sharing a coordinate are merged.
  Cube(std::shared_ptr<const CubeCatalog> catalog, std::vector<CubeAxis> axes, std::vector<Cell> cells)
      : catalog_(std::move(catalog)), axes_(std::move(axes)), cells_(std::move(cells)) {
    std::sort(cells_.begin(), cells_.end(), [](const Cell& a, const Cell& b) { return a.coord < b.coord; });
    std::size_t w = 0;
    for (std::size_t r = 0; r < cells_.size(); ++r) {
      if (w > 0 && cells_[w - 1].coord == cells_[r].coord) {
        cells_[w - 1].measures += cells_[r].measures;
      } else {
        cells_[w++] = cells_[r];
      }
    }
    cells_.resize(w);
  }

  const CubeCatalog& catalog() const { return *catalog_; }
  const std::shared_ptr<const CubeCatalog>& catalog_ptr() const { return catalog_; }
  const std::vector<CubeAxis>& axes() const { return axes_; }
  const std::vector<Cell>& cells() const { return cells_; }

  std::optional<std::size_t> axis_of(Dimension d) const {
    for (std::size_t i = 0; i < axes_.size(); ++i) {
      if (axes_[i].dimension == d) return i;
    }
    return std::nullopt;
  }

  Measures mass() const {
    Measures m;
    for (const auto& c : cells_) m += c.measures;
    return m;
  }

  /// Measures stored at a coordinate; absent cells are zero.
  Measures at(const Coord& coord) const {
    const auto it = std::lower_bound(cells_.begin(), cells_.end(), coord,
                                     [](const Cell& c, const Coord& k) { return c.coord < k; });
    return it != cells_.end() && it->coord == coord ? it->measures : Measures{};
  }

  bool operator==(const Cube& o) const { return axes_ == o.axes_ && cells_ == o.cells_; }

 private:
  std::shared_ptr<const CubeCatalog> catalog_;
  std::vector<CubeAxis> axes_;
  std::vector<Cell> cells_;
};

// ---------------------------------------------------------------------------

namespace detail {

inline std::size_t require_axis(const Cube& cube, Dimension d) {
  const auto axis = cube.axis_of(d);
  if (!axis) throw Error(ErrorCode::invalid_query, "cube has no " + std::string(to_string(d)) + " axis");
  return *axis;
}

inline std::size_t require_level(const CubeCatalog& cat, Dimension d, std::string_view level) {
  const auto idx = cat.level_index(d, level);
  if (!idx) {
    throw Error(ErrorCode::bad_level, "dimension " + std::string(to_string(d)) + " has no level '" +
                                          std::string(level) + "'");
  }
  return *idx;
}

/// Dense lookup table over member ids (year ids run into the thousands,
/// surrogate ids are small).
template <typename T>
class IdTable {
 public:
  IdTable(std::span<const MemberId> ids, T fill) {
    MemberId max_id = 0;
    for (MemberId id : ids) max_id = std::max(max_id, id);
    values_.assign(static_cast<std::size_t>(max_id) + 1, fill);
  }
  T& operator[](MemberId id) { return values_[id]; }
  const T& operator[](MemberId id) const { return values_[id]; }

 private:
  std::vector<T> values_;
};

inline Cube regroup_axis(const Cube& cube, std::size_t axis, std::size_t to_level) {
  const auto& cat = cube.catalog();
  const CubeAxis& from = cube.axes()[axis];
  std::vector<CubeAxis> axes = cube.axes();
  std::set<MemberId> parents;
  IdTable<MemberId> map(from.members, 0);
  for (MemberId m : from.members) {
    const MemberId p = cat.ancestor(from.dimension, from.level, to_level, m);
    map[m] = p;
    parents.insert(p);
  }
  axes[axis].level = to_level;
  axes[axis].members.assign(parents.begin(), parents.end());
  cat.sort_by_label(from.dimension, to_level, axes[axis].members);

  std::vector<Cell> cells = cube.cells();
  for (auto& c : cells) c.coord[axis] = map[c.coord[axis]];
  return Cube(cube.catalog_ptr(), std::move(axes), std::move(cells));
}

}  // namespace detail

/// Base-grain cube: one cell per fact row, every dimension member on its axis.
inline Cube build_cube(const StarSchema& schema) {
  const auto problems = check_integrity(schema);
  if (!problems.empty()) {
    throw Error(ErrorCode::integrity_violation, problems.front() + " (" + std::to_string(problems.size()) +
                                                    " problems)");
  }
  auto cat = CubeCatalog::from_schema(schema);
  std::vector<CubeAxis> axes;
  for (Dimension d : kDimensions) axes.push_back({d, 0, cat->members(d, 0)});
  std::vector<Cell> cells;
  cells.reserve(schema.facts.size());
  for (const auto& f : schema.facts) {
    Cell c;
    const auto key = f.key();
    std::copy(key.begin(), key.end(), c.coord.begin());
    c.measures = {f.total_applicants, f.num_seekers, f.num_directed};
    cells.push_back(c);
  }
  return Cube(std::move(cat), std::move(axes), std::move(cells));
}

inline Cube rollup(const Cube& cube, Dimension dim, std::string_view to_level) {
  const std::size_t axis = detail::require_axis(cube, dim);
  const std::size_t target = detail::require_level(cube.catalog(), dim, to_level);
  if (target <= cube.axes()[axis].level) {
    throw Error(ErrorCode::bad_level, "'" + std::string(to_level) + "' is not above the current " +
                                          std::string(to_string(dim)) + " level '" +
                                          cube.catalog().level_name(dim, cube.axes()[axis].level) + "'");
  }
  return detail::regroup_axis(cube, axis, target);
}

struct DiceFilter {
  Dimension dimension = Dimension::city;
  std::string level;  // empty: the axis's current level
  std::vector<std::string> members;
};

inline Cube dice(const Cube& cube, std::span<const DiceFilter> filters) {
  const auto& cat = cube.catalog();
  std::vector<CubeAxis> axes = cube.axes();
  std::vector<std::optional<detail::IdTable<char>>> keep(axes.size());
  for (const auto& f : filters) {
    const std::size_t axis = detail::require_axis(cube, f.dimension);
    CubeAxis& ax = axes[axis];
    const std::size_t level = f.level.empty() ? ax.level : detail::require_level(cat, f.dimension, f.level);
    if (level < ax.level) {
      throw Error(ErrorCode::bad_level, "filter level '" + f.level + "' is below the current " +
                                            std::string(to_string(f.dimension)) + " level");
    }
    if (f.members.empty()) {
      throw Error(ErrorCode::empty_member_set, "empty member set for " + std::string(to_string(f.dimension)));
    }
    std::set<MemberId> wanted;
    for (const auto& label : f.members) {
      const auto id = cat.find(f.dimension, level, label);
      if (!id) {
        throw Error(ErrorCode::unknown_member, std::string(to_string(f.dimension)) + " has no member '" + label + "'");
      }
      wanted.insert(*id);
    }
    std::vector<MemberId> kept;
    for (MemberId m : ax.members) {
      if (wanted.contains(cat.ancestor(f.dimension, ax.level, level, m))) kept.push_back(m);
    }
    ax.members = std::move(kept);
  }
  for (std::size_t a = 0; a < axes.size(); ++a) {
    if (axes[a].members.size() == cube.axes()[a].members.size()) continue;
    keep[a].emplace(cube.axes()[a].members, char{0});
    for (MemberId m : axes[a].members) (*keep[a])[m] = 1;
  }
  std::vector<Cell> cells;
  for (const auto& c : cube.cells()) {
    bool ok = true;
    for (std::size_t a = 0; a < axes.size() && ok; ++a) {
      if (keep[a]) ok = (*keep[a])[c.coord[a]] != 0;
    }
    if (ok) cells.push_back(c);
  }
  return Cube(cube.catalog_ptr(), std::move(axes), std::move(cells));
}

/// Fixes `dim` to one member of its current level and drops the axis.
inline Cube slice(const Cube& cube, Dimension dim, const std::string& member) {
  const std::size_t axis = detail::require_axis(cube, dim);
  const CubeAxis& ax = cube.axes()[axis];
  const auto id = cube.catalog().find(dim, ax.level, member);
  if (!id || std::find(ax.members.begin(), ax.members.end(), *id) == ax.members.end()) {
    throw Error(ErrorCode::unknown_member, std::string(to_string(dim)) + " axis has no member '" + member + "'");
  }
  std::vector<CubeAxis> axes = cube.axes();
  axes.erase(axes.begin() + static_cast<std::ptrdiff_t>(axis));
  std::vector<Cell> cells;
  for (const auto& c : cube.cells()) {
    if (c.coord[axis] != *id) continue;
    Cell out;
    std::size_t w = 0;
    for (std::size_t a = 0; a < cube.axes().size(); ++a) {
      if (a != axis) out.coord[w++] = c.coord[a];
    }
    out.measures = c.measures;
    cells.push_back(out);
  }
  return Cube(cube.catalog_ptr(), std::move(axes), std::move(cells));
}

/// Re-aggregates `base` so `dim` sits at `to_level` and every other axis
/// matches `current` (same levels, same member restrictions).
inline Cube drilldown(const Cube& current, const Cube& base, Dimension dim, std::string_view to_level) {
  if (current.axes().size() != base.axes().size()) {
    throw Error(ErrorCode::invalid_query, "drill-down needs a base cube with the same axes");
  }
  for (std::size_t a = 0; a < current.axes().size(); ++a) {
    if (current.axes()[a].dimension != base.axes()[a].dimension ||
        current.axes()[a].level < base.axes()[a].level) {
      throw Error(ErrorCode::invalid_query, "cube was not derived from the given base cube");
    }
  }
  const std::size_t axis = detail::require_axis(current, dim);
  const std::size_t target = detail::require_level(current.catalog(), dim, to_level);
  if (target >= current.axes()[axis].level) {
    throw Error(ErrorCode::bad_level, "'" + std::string(to_level) + "' is not below the current " +
                                          std::string(to_string(dim)) + " level");
  }
  if (target < base.axes()[axis].level) {
    throw Error(ErrorCode::bad_level, "'" + std::string(to_level) + "' is below the base grain of " +
                                          std::string(to_string(dim)));
  }
  std::vector<DiceFilter> filters;
  for (const auto& ax : current.axes()) {
    DiceFilter f{ax.dimension, current.catalog().level_name(ax.dimension, ax.level), {}};
    for (MemberId m : ax.members) f.members.push_back(current.catalog().label(ax.dimension, ax.level, m));
    if (f.members.empty()) {
      // Diced down to nothing: the drill-down is empty too.
      std::vector<CubeAxis> axes = base.axes();
      for (std::size_t a = 0; a < axes.size(); ++a) {
        axes[a] = current.axes()[a];
        if (axes[a].dimension == dim) {
          axes[a].level = target;
          axes[a].members.clear();
        }
      }
      return Cube(base.catalog_ptr(), std::move(axes), {});
    }
    filters.push_back(std::move(f));
  }
  Cube out = dice(base, filters);
  for (std::size_t a = 0; a < current.axes().size(); ++a) {
    const std::size_t level = current.axes()[a].dimension == dim ? target : current.axes()[a].level;
    if (level > out.axes()[a].level) out = detail::regroup_axis(out, a, level);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Aggregate queries

struct GroupBy {
  Dimension dimension = Dimension::city;
  std::string level;  // empty: the axis's current level
};

struct AggregateQuery {
  Measure measure = Measure::total;
  std::vector<GroupBy> group_by;
  std::vector<DiceFilter> filters;
};

struct ResultRow {
  std::vector<std::string> labels;
  std::vector<std::uint64_t> values;

  bool operator==(const ResultRow&) const = default;
};

struct ResultTable {
  std::vector<std::string> columns;  // group-by labels, then value columns
  std::vector<ResultRow> rows;       // sorted by labels

  bool operator==(const ResultTable&) const = default;
};

inline std::string group_column_name(const GroupBy& g) {
  const auto names = level_names(g.dimension);
  const std::string& level = g.level.empty() ? names.front() : g.level;
  if (level == to_string(g.dimension)) return level;
  return std::string(to_string(g.dimension)) + ":" + level;
}

inline void sort_rows(ResultTable& t) {
  std::sort(t.rows.begin(), t.rows.end(), [](const ResultRow& a, const ResultRow& b) { return a.labels < b.labels; });
}

/// Filters (as dice), rolls grouped axes up to the requested levels and sums
/// everything else out. One row per group with at least one stored cell.
inline ResultTable aggregate(const Cube& cube, const AggregateQuery& query) {
  const auto& cat = cube.catalog();
  const auto& axes = cube.axes();

  // Filter masks per axis member.
  std::vector<std::optional<detail::IdTable<char>>> allowed(axes.size());
  for (const auto& f : query.filters) {
    const std::size_t axis = detail::require_axis(cube, f.dimension);
    const CubeAxis& ax = axes[axis];
    const std::size_t level = f.level.empty() ? ax.level : detail::require_level(cat, f.dimension, f.level);
    if (level < ax.level) {
      throw Error(ErrorCode::bad_level, "filter level '" + f.level + "' is below the current " +
                                            std::string(to_string(f.dimension)) + " level");
    }
    if (f.members.empty()) {
      throw Error(ErrorCode::empty_member_set, "empty member set for " + std::string(to_string(f.dimension)));
    }
    std::set<MemberId> wanted;
    for (const auto& label : f.members) {
      const auto id = cat.find(f.dimension, level, label);
      if (!id) {
        throw Error(ErrorCode::unknown_member, std::string(to_string(f.dimension)) + " has no member '" + label + "'");
      }
      wanted.insert(*id);
    }
    detail::IdTable<char> mask(ax.members, char{0});
    for (MemberId m : ax.members) {
      const bool ok = wanted.contains(cat.ancestor(f.dimension, ax.level, level, m)) &&
                      (!allowed[axis] || (*allowed[axis])[m]);
      mask[m] = ok ? 1 : 0;
    }
    allowed[axis] = std::move(mask);
  }

  // Dense group ordinals per grouped axis.
  struct Grouping {
    std::size_t axis;
    std::size_t level;
    detail::IdTable<std::uint32_t> ordinal;
    std::vector<MemberId> parents;  // ordinal -> id at `level`
  };
  std::vector<Grouping> groups;
  ResultTable table;
  std::set<Dimension> seen;
  for (const auto& g : query.group_by) {
    if (!seen.insert(g.dimension).second) {
      throw Error(ErrorCode::invalid_query, "dimension " + std::string(to_string(g.dimension)) + " grouped twice");
    }
    const std::size_t axis = detail::require_axis(cube, g.dimension);
    const CubeAxis& ax = axes[axis];
    const std::size_t level = g.level.empty() ? ax.level : detail::require_level(cat, g.dimension, g.level);
    if (level < ax.level) {
      throw Error(ErrorCode::bad_level, "group level '" + g.level + "' is below the current " +
                                            std::string(to_string(g.dimension)) + " level");
    }
    Grouping grouping{axis, level, detail::IdTable<std::uint32_t>(ax.members, 0), {}};
    std::map<MemberId, std::uint32_t> ordinals;
    for (MemberId m : ax.members) {
      const MemberId p = cat.ancestor(g.dimension, ax.level, level, m);
      auto [it, inserted] = ordinals.emplace(p, static_cast<std::uint32_t>(grouping.parents.size()));
      if (inserted) grouping.parents.push_back(p);
      grouping.ordinal[m] = it->second;
    }
    table.columns.push_back(group_column_name({g.dimension, cat.level_name(g.dimension, level)}));
    groups.push_back(std::move(grouping));
  }
  table.columns.emplace_back(to_string(query.measure));

  std::uint64_t slots = 1;
  for (const auto& g : groups) slots *= std::max<std::size_t>(g.parents.size(), 1);

  const auto cell_passes = [&](const Cell& c) {
    for (std::size_t a = 0; a < axes.size(); ++a) {
      if (allowed[a] && !(*allowed[a])[c.coord[a]]) return false;
    }
    return true;
  };
  const auto slot_of = [&](const Cell& c) {
    std::uint64_t slot = 0;
    for (const auto& g : groups) slot = slot * std::max<std::size_t>(g.parents.size(), 1) + g.ordinal[c.coord[g.axis]];
    return slot;
  };

  std::vector<std::pair<std::uint64_t, std::uint64_t>> hits;  // (slot, value)
  constexpr std::uint64_t kDenseLimit = 1u << 22;
  if (slots <= kDenseLimit) {
    std::vector<std::uint64_t> sums(slots, 0);
    std::vector<char> present(slots, 0);
    for (const auto& c : cube.cells()) {
      if (!cell_passes(c)) continue;
      const auto slot = slot_of(c);
      sums[slot] += pick(c.measures, query.measure);
      present[slot] = 1;
    }
    for (std::uint64_t s = 0; s < slots; ++s) {
      if (present[s]) hits.emplace_back(s, sums[s]);
    }
  } else {
    std::map<std::uint64_t, std::uint64_t> sums;
    for (const auto& c : cube.cells()) {
      if (cell_passes(c)) sums[slot_of(c)] += pick(c.measures, query.measure);
    }
    hits.assign(sums.begin(), sums.end());
  }

  table.rows.reserve(hits.size());
  for (const auto& [slot, value] : hits) {
    ResultRow row;
    row.labels.resize(groups.size());
    std::uint64_t rest = slot;
    for (std::size_t i = groups.size(); i-- > 0;) {
      const auto width = std::max<std::size_t>(groups[i].parents.size(), 1);
      const auto ord = static_cast<std::size_t>(rest % width);
      rest /= width;
      row.labels[i] = cat.label(axes[groups[i].axis].dimension, groups[i].level, groups[i].parents[ord]);
    }
    row.values.push_back(value);
    table.rows.push_back(std::move(row));
  }
  sort_rows(table);
  return table;
}

}  // namespace mpdw
