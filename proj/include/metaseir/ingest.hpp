#ifndef METASEIR_INGEST_HPP
#define METASEIR_INGEST_HPP

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "metaseir/csv.hpp"
#include "metaseir/date.hpp"
#include "metaseir/error.hpp"

namespace metaseir {

inline constexpr std::string_view kNationalId = "NATIONAL";

struct Region {
  std::string id;
  std::string name;
  std::int64_t population = 0;
  std::optional<std::string> parent_id;
};

/// Regions of a two-level hierarchy. Model regions are the leaves, i.e. rows
/// no other row names as its parent; they keep file order and are addressed
/// by position everywhere downstream.
class RegionTable {
 public:
  RegionTable() = default;

  explicit RegionTable(std::vector<Region> rows) : rows_(std::move(rows)) {
    for (std::size_t i = 0; i < rows_.size(); ++i) {
      const Region& r = rows_[i];
      if (r.id.empty() || r.id == kNationalId) {
        throw Error(ErrorCode::ParseError, fmt::format("invalid region id '{}'", r.id));
      }
      if (r.population < 1) {
        throw Error(ErrorCode::NonpositivePopulation,
                    fmt::format("region '{}' has population {}", r.id, r.population));
      }
      if (!by_id_.emplace(r.id, i).second) {
        throw Error(ErrorCode::DuplicateRegion, fmt::format("duplicate region id '{}'", r.id));
      }
    }
    std::set<std::string, std::less<>> parents;
    for (const Region& r : rows_) {
      std::size_t depth = 0;
      std::optional<std::string> cursor = r.parent_id;
      while (cursor) {
        if (++depth > 2) {
          throw Error(ErrorCode::InvalidHierarchy,
                      fmt::format("region '{}': parent chain is cyclic or deeper than two levels", r.id));
        }
        auto it = by_id_.find(*cursor);
        if (it == by_id_.end()) {
          throw Error(ErrorCode::InvalidHierarchy, fmt::format("region '{}': unknown parent '{}'", r.id, *cursor));
        }
        cursor = rows_[it->second].parent_id;
      }
      if (r.parent_id) parents.insert(*r.parent_id);
    }
    for (std::size_t i = 0; i < rows_.size(); ++i) {
      if (!parents.contains(rows_[i].id)) {
        leaf_index_.emplace(rows_[i].id, leaves_.size());
        leaves_.push_back(i);
      }
    }
  }

  std::size_t size() const noexcept { return leaves_.size(); }
  const Region& leaf(std::size_t i) const { return rows_[leaves_.at(i)]; }
  std::span<const Region> rows() const noexcept { return rows_; }

  std::optional<std::size_t> index_of(std::string_view id) const {
    auto it = leaf_index_.find(std::string(id));
    if (it == leaf_index_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t require_index(std::string_view id) const {
    if (auto i = index_of(id)) return *i;
    throw Error(ErrorCode::UnknownRegion, fmt::format("unknown leaf region '{}'", id));
  }

  std::vector<double> populations() const {
    std::vector<double> out;
    out.reserve(size());
    for (std::size_t i = 0; i < size(); ++i) out.push_back(static_cast<double>(leaf(i).population));
    return out;
  }

  double total_population() const {
    double total = 0.0;
    for (std::size_t i = 0; i < size(); ++i) total += static_cast<double>(leaf(i).population);
    return total;
  }

  /// Parent, grandparent, ... of a leaf; ids need not be rows of the table.
  std::vector<std::string> ancestors(std::size_t leaf_position) const {
    std::vector<std::string> out;
    std::optional<std::string> cursor = leaf(leaf_position).parent_id;
    while (cursor) {
      out.push_back(*cursor);
      auto it = by_id_.find(*cursor);
      cursor = it == by_id_.end() ? std::nullopt : rows_[it->second].parent_id;
    }
    return out;
  }

 private:
  std::vector<Region> rows_;
  std::vector<std::size_t> leaves_;
  std::unordered_map<std::string, std::size_t> by_id_;
  std::unordered_map<std::string, std::size_t> leaf_index_;
};

struct FilledGap {
  std::size_t region = 0;
  Date date;
};

/// Daily reported positives per leaf region over a contiguous window. Days
/// before the window count as zero (pre-epidemic); days after it are not
/// available.
class CaseSeries {
 public:
  CaseSeries() = default;

  /// `counts[r][d]` is the count of region r on first + d.
  CaseSeries(Date first, std::vector<std::vector<std::int64_t>> counts, std::vector<FilledGap> gaps = {})
      : first_(first), counts_(std::move(counts)), gaps_(std::move(gaps)) {
    days_ = counts_.empty() ? 0 : counts_.front().size();
    prefix_.resize(counts_.size());
    for (std::size_t r = 0; r < counts_.size(); ++r) {
      if (counts_[r].size() != days_) {
        throw Error(ErrorCode::InvalidParameter, "case series rows must have equal length");
      }
      prefix_[r].assign(days_ + 1, 0);
      for (std::size_t d = 0; d < days_; ++d) {
        if (counts_[r][d] < 0) {
          throw Error(ErrorCode::NegativeCount,
                      fmt::format("negative case count on {} in region {}", first_ + static_cast<long>(d), r));
        }
        prefix_[r][d + 1] = prefix_[r][d] + counts_[r][d];
      }
    }
  }

  std::size_t regions() const noexcept { return counts_.size(); }
  std::size_t days() const noexcept { return days_; }
  Date first_date() const noexcept { return first_; }
  Date last_date() const noexcept { return first_ + static_cast<long>(days_) - 1; }
  bool covers(Date d) const noexcept { return days_ > 0 && d >= first_ && d <= last_date(); }
  const std::vector<FilledGap>& filled_gaps() const noexcept { return gaps_; }

  std::int64_t at(std::size_t region, Date d) const {
    if (d < first_) return 0;
    if (d > last_date()) {
      throw Error(ErrorCode::DateOutsideCoverage,
                  fmt::format("no case data for {} (series ends {})", d, last_date()));
    }
    return counts_.at(region)[static_cast<std::size_t>(d - first_)];
  }

  /// Sum of counts from the start of the series through `d` inclusive.
  std::int64_t cumulative(std::size_t region, Date d) const {
    if (d < first_) return 0;
    if (d > last_date()) {
      throw Error(ErrorCode::DateOutsideCoverage,
                  fmt::format("no case data for {} (series ends {})", d, last_date()));
    }
    return prefix_.at(region)[static_cast<std::size_t>(d - first_) + 1];
  }

  std::int64_t total_on(Date d) const {
    std::int64_t total = 0;
    for (std::size_t r = 0; r < regions(); ++r) total += at(r, d);
    return total;
  }

 private:
  Date first_;
  std::size_t days_ = 0;
  std::vector<std::vector<std::int64_t>> counts_;
  std::vector<std::vector<std::int64_t>> prefix_;
  std::vector<FilledGap> gaps_;
};

/// Directed daily travel volumes between leaf regions, zero diagonal.
class MobilityMatrix {
 public:
  MobilityMatrix() = default;

  explicit MobilityMatrix(Eigen::MatrixXd volume) : volume_(std::move(volume)) {
    if (volume_.rows() != volume_.cols()) {
      throw Error(ErrorCode::InvalidParameter, "mobility matrix must be square");
    }
    for (Eigen::Index i = 0; i < volume_.rows(); ++i) {
      for (Eigen::Index j = 0; j < volume_.cols(); ++j) {
        double v = volume_(i, j);
        if (!std::isfinite(v) || v < 0.0) {
          throw Error(ErrorCode::NegativeVolume, fmt::format("invalid mobility volume {} at ({}, {})", v, i, j));
        }
      }
      if (volume_(i, i) != 0.0) {
        throw Error(ErrorCode::InvalidParameter, fmt::format("mobility diagonal entry {} is nonzero", i));
      }
    }
  }

  static MobilityMatrix zeros(std::size_t n) {
    auto m = static_cast<Eigen::Index>(n);
    return MobilityMatrix(Eigen::MatrixXd::Zero(m, m));
  }

  std::size_t size() const noexcept { return static_cast<std::size_t>(volume_.rows()); }
  double operator()(std::size_t i, std::size_t j) const {
    return volume_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
  const Eigen::MatrixXd& matrix() const noexcept { return volume_; }
  double total() const { return volume_.sum(); }

  /// M + Mᵀ: contacts between i and j regardless of travel direction.
  Eigen::MatrixXd symmetric() const { return volume_ + volume_.transpose(); }

  MobilityMatrix scaled(double factor) const { return MobilityMatrix(volume_ * factor); }

  bool operator==(const MobilityMatrix& other) const {
    return volume_.rows() == other.volume_.rows() && volume_.cols() == other.volume_.cols() &&
           volume_ == other.volume_;
  }

 private:
  Eigen::MatrixXd volume_;
};

/// Relative change in workplace mobility per region key and date. Keys may
/// be leaf ids, ancestor ids, or the literal NATIONAL.
class MobilityReductionSeries {
 public:
  void add(std::string region_id, Date date, double change) {
    if (!std::isfinite(change) || change <= -1.0) {
      throw Error(ErrorCode::InvalidParameter,
                  fmt::format("workplace change {} for '{}' on {} must exceed -1", change, region_id, date));
    }
    if (region_id == kNationalId) national_dates_.insert(date);
    if (!entries_.emplace(std::make_pair(std::move(region_id), date), change).second) {
      throw Error(ErrorCode::ParseError, fmt::format("duplicate reduction entry on {}", date));
    }
  }

  std::optional<double> lookup(const std::string& region_id, Date date) const {
    auto it = entries_.find(std::make_pair(region_id, date));
    if (it == entries_.end()) return std::nullopt;
    return it->second;
  }

  bool covers(Date date) const { return national_dates_.contains(date); }

  std::optional<Date> last_national_date() const {
    if (national_dates_.empty()) return std::nullopt;
    return *national_dates_.rbegin();
  }

  std::optional<Date> first_national_date() const {
    if (national_dates_.empty()) return std::nullopt;
    return *national_dates_.begin();
  }

  /// Change for a leaf, resolved leaf -> ancestors -> NATIONAL.
  double resolve(const RegionTable& regions, std::size_t leaf_position, Date date) const {
    if (!covers(date)) {
      throw Error(ErrorCode::DateOutsideCoverage, fmt::format("no national mobility reduction for {}", date));
    }
    if (auto v = lookup(regions.leaf(leaf_position).id, date)) return *v;
    for (const std::string& ancestor : regions.ancestors(leaf_position)) {
      if (auto v = lookup(ancestor, date)) return *v;
    }
    return *lookup(std::string(kNationalId), date);
  }

 private:
  std::map<std::pair<std::string, Date>, double> entries_;
  std::set<Date> national_dates_;
};

/// Estimated total number of infectious persons per date.
class PrevalenceSeries {
 public:
  void add(Date date, double total_infectious) {
    if (!std::isfinite(total_infectious) || total_infectious < 0.0) {
      throw Error(ErrorCode::ParseError, fmt::format("invalid prevalence {} on {}", total_infectious, date));
    }
    if (!values_.emplace(date, total_infectious).second) {
      throw Error(ErrorCode::ParseError, fmt::format("duplicate prevalence entry on {}", date));
    }
  }

  double at(Date date) const {
    auto it = values_.find(date);
    if (it == values_.end()) {
      throw Error(ErrorCode::DateOutsideCoverage, fmt::format("no prevalence estimate for {}", date));
    }
    return it->second;
  }

  bool covers(Date date) const { return values_.contains(date); }
  std::size_t size() const noexcept { return values_.size(); }

 private:
  std::map<Date, double> values_;
};

// ---------------------------------------------------------------------------
// Loaders

inline RegionTable parse_regions(const csv::Table& t) {
  std::vector<Region> rows;
  rows.reserve(t.rows.size());
  for (const csv::Row& row : t.rows) {
    Region r;
    r.id = row.fields[0];
    r.name = row.fields[1];
    r.population = csv::to_int(t, row, 2);
    if (!row.fields[3].empty()) r.parent_id = row.fields[3];
    rows.push_back(std::move(r));
  }
  return RegionTable(std::move(rows));
}

/// regions.csv: `region_id,name,population,parent_id` (parent_id may be empty).
inline RegionTable load_regions(const std::filesystem::path& path) {
  return parse_regions(csv::read(path, {"region_id", "name", "population", "parent_id"}));
}

inline MobilityMatrix parse_mobility_baseline(const csv::Table& t, const RegionTable& regions,
                                              Diagnostics* diag = nullptr) {
  auto n = static_cast<Eigen::Index>(regions.size());
  Eigen::MatrixXd volume = Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixXi seen = Eigen::MatrixXi::Zero(n, n);
  for (const csv::Row& row : t.rows) {
    auto i = static_cast<Eigen::Index>(regions.require_index(row.fields[0]));
    auto j = static_cast<Eigen::Index>(regions.require_index(row.fields[1]));
    double v = csv::to_double(t, row, 2);
    if (v < 0.0 || !std::isfinite(v)) {
      throw Error(ErrorCode::NegativeVolume, fmt::format("{}:{}: invalid volume {}", t.source, row.line, v));
    }
    if (i == j) {
      detail::warn(diag, fmt::format("{}:{}: dropped diagonal mobility entry for '{}'", t.source, row.line,
                                     row.fields[0]));
      continue;
    }
    if (seen(i, j)++) {
      throw Error(ErrorCode::ParseError, fmt::format("{}:{}: duplicate pair {} -> {}", t.source, row.line,
                                                     row.fields[0], row.fields[1]));
    }
    volume(i, j) = v;
  }
  return MobilityMatrix(std::move(volume));
}

/// mobility.csv: `origin,destination,volume`. Diagonal rows are dropped.
inline MobilityMatrix load_mobility_baseline(const std::filesystem::path& path, const RegionTable& regions,
                                             Diagnostics* diag = nullptr) {
  return parse_mobility_baseline(csv::read(path, {"origin", "destination", "volume"}), regions, diag);
}

inline MobilityReductionSeries parse_reductions(const csv::Table& t) {
  MobilityReductionSeries out;
  for (const csv::Row& row : t.rows) {
    out.add(row.fields[1], Date::parse(row.fields[0]), csv::to_double(t, row, 2));
  }
  return out;
}

/// reductions.csv: `date,region_id,workplace_change`.
inline MobilityReductionSeries load_reductions(const std::filesystem::path& path) {
  return parse_reductions(csv::read(path, {"date", "region_id", "workplace_change"}));
}

/// Scales each row of the baseline by (1 + change of the origin region).
inline MobilityMatrix effective_mobility(const MobilityMatrix& baseline, const MobilityReductionSeries& reductions,
                                         const RegionTable& regions, Date date) {
  if (baseline.size() != regions.size()) {
    throw Error(ErrorCode::MismatchedRegions, "mobility matrix and region table differ in size");
  }
  Eigen::MatrixXd scaled = baseline.matrix();
  for (std::size_t i = 0; i < regions.size(); ++i) {
    scaled.row(static_cast<Eigen::Index>(i)) *= 1.0 + reductions.resolve(regions, i, date);
  }
  return MobilityMatrix(std::move(scaled));
}

inline CaseSeries parse_cases(const csv::Table& t, const RegionTable& regions,
                              std::optional<std::pair<Date, Date>> window = std::nullopt,
                              Diagnostics* diag = nullptr) {
  struct Record {
    std::size_t region;
    Date date;
    std::int64_t count;
  };
  std::vector<Record> records;
  records.reserve(t.rows.size());
  std::optional<Date> lo;
  std::optional<Date> hi;
  for (const csv::Row& row : t.rows) {
    Date d = Date::parse(row.fields[0]);
    std::size_t r = regions.require_index(row.fields[1]);
    std::int64_t c = csv::to_int(t, row, 2);
    if (c < 0) {
      throw Error(ErrorCode::NegativeCount, fmt::format("{}:{}: negative count {}", t.source, row.line, c));
    }
    lo = lo ? std::min(*lo, d) : d;
    hi = hi ? std::max(*hi, d) : d;
    records.push_back({r, d, c});
  }
  if (window) {
    lo = window->first;
    hi = window->second;
  }
  if (!lo) {
    return CaseSeries(Date{}, std::vector<std::vector<std::int64_t>>(regions.size()));
  }
  if (*hi < *lo) {
    throw Error(ErrorCode::InvalidParameter, "case window end precedes start");
  }
  auto days = static_cast<std::size_t>(*hi - *lo + 1);
  std::vector<std::vector<std::int64_t>> counts(regions.size(), std::vector<std::int64_t>(days, 0));
  std::vector<std::vector<bool>> present(regions.size(), std::vector<bool>(days, false));
  for (const Record& rec : records) {
    if (rec.date < *lo || rec.date > *hi) continue;
    auto d = static_cast<std::size_t>(rec.date - *lo);
    if (present[rec.region][d]) {
      throw Error(ErrorCode::ParseError, fmt::format("{}: duplicate record for '{}' on {}", t.source,
                                                     regions.leaf(rec.region).id, rec.date));
    }
    present[rec.region][d] = true;
    counts[rec.region][d] = rec.count;
  }
  std::vector<FilledGap> gaps;
  for (std::size_t r = 0; r < regions.size(); ++r) {
    for (std::size_t d = 0; d < days; ++d) {
      if (!present[r][d]) {
        gaps.push_back({r, *lo + static_cast<long>(d)});
        detail::warn(diag, fmt::format("{}: no cases for '{}' on {}, filled with 0", t.source,
                                       regions.leaf(r).id, *lo + static_cast<long>(d)));
      }
    }
  }
  return CaseSeries(*lo, std::move(counts), std::move(gaps));
}

/// cases.csv: `date,region_id,new_cases`. Missing days are zero-filled and
/// reported through `diag`.
inline CaseSeries load_cases(const std::filesystem::path& path, const RegionTable& regions,
                             std::optional<std::pair<Date, Date>> window = std::nullopt,
                             Diagnostics* diag = nullptr) {
  return parse_cases(csv::read(path, {"date", "region_id", "new_cases"}), regions, window, diag);
}

inline PrevalenceSeries parse_prevalence(const csv::Table& t) {
  PrevalenceSeries out;
  for (const csv::Row& row : t.rows) {
    out.add(Date::parse(row.fields[0]), csv::to_double(t, row, 1));
  }
  return out;
}

/// prevalence.csv: `date,total_infectious`.
inline PrevalenceSeries load_prevalence(const std::filesystem::path& path) {
  return parse_prevalence(csv::read(path, {"date", "total_infectious"}));
}

}  // namespace metaseir

#endif  // METASEIR_INGEST_HPP
