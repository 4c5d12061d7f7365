#ifndef METASEIR_CONFIG_HPP
#define METASEIR_CONFIG_HPP

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include <fmt/format.h>

#include "metaseir/csv.hpp"
#include "metaseir/date.hpp"
#include "metaseir/error.hpp"
#include "metaseir/estimation.hpp"

namespace metaseir {

struct RunConfig {
  std::filesystem::path regions;
  std::filesystem::path cases;
  std::filesystem::path mobility;
  std::filesystem::path reductions;
  std::filesystem::path prevalence;
  std::optional<Date> from;
  std::optional<Date> to;
  double latent_period = 3.0;
  double infectious_period = 9.0;
  CountModel family = CountModel::negbin;
  bool no_mobility = false;
  std::size_t bootstrap = 100;
  std::uint64_t seed = 0;
  std::filesystem::path out = "out";
  /// Optional `date,value` series that `validate` scans R_eff against.
  std::filesystem::path reference;
  std::size_t max_shift = 14;
  /// Inputs of `compare`.
  std::filesystem::path forecast_with;
  std::filesystem::path forecast_without;

  ModelVariant variant() const { return {family, !no_mobility}; }

  void validate() const {
    if (!from || !to) throw Error(ErrorCode::ConfigError, "both 'from' and 'to' dates are required");
    if (!(*from < *to)) throw Error(ErrorCode::ConfigError, "'from' must precede 'to'");
    if (!(latent_period > 0.0) || !(infectious_period > 0.0)) {
      throw Error(ErrorCode::ConfigError, "'nu' and 'omega' must be positive");
    }
    if (bootstrap < 1) throw Error(ErrorCode::ConfigError, "'bootstrap' must be at least 1");
  }
};

namespace detail {

inline std::string_view strip(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw Error(ErrorCode::ConfigError, fmt::format("'{}' expects true/false, got '{}'", key, v));
}

inline double parse_real(std::string_view key, std::string_view v) {
  std::string s(v);
  char* end = nullptr;
  double d = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) {
    throw Error(ErrorCode::ConfigError, fmt::format("'{}' expects a number, got '{}'", key, v));
  }
  return d;
}

inline std::uint64_t parse_count(std::string_view key, std::string_view v) {
  std::uint64_t n = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), n);
  if (v.empty() || ec != std::errc{} || ptr != v.data() + v.size()) {
    throw Error(ErrorCode::ConfigError, fmt::format("'{}' expects a nonnegative integer, got '{}'", key, v));
  }
  return n;
}

}  // namespace detail

/// Applies one `key = value` setting. Relative paths resolve against `base`.
inline void apply_setting(RunConfig& cfg, std::string_view key, std::string_view value,
                          const std::filesystem::path& base = {}) {
  auto path = [&] {
    std::filesystem::path p{std::string(value)};
    return p.is_relative() && !base.empty() ? base / p : p;
  };
  auto date = [&] {
    try {
      return Date::parse(value);
    } catch (const Error& e) {
      throw Error(ErrorCode::ConfigError, fmt::format("'{}': {}", key, e.what()));
    }
  };
  if (key == "regions") cfg.regions = path();
  else if (key == "cases") cfg.cases = path();
  else if (key == "mobility") cfg.mobility = path();
  else if (key == "reductions") cfg.reductions = path();
  else if (key == "prevalence") cfg.prevalence = path();
  else if (key == "reference") cfg.reference = path();
  else if (key == "forecast_with") cfg.forecast_with = path();
  else if (key == "forecast_without") cfg.forecast_without = path();
  else if (key == "out") cfg.out = path();
  else if (key == "from") cfg.from = date();
  else if (key == "to") cfg.to = date();
  else if (key == "nu") cfg.latent_period = detail::parse_real(key, value);
  else if (key == "omega") cfg.infectious_period = detail::parse_real(key, value);
  else if (key == "bootstrap") cfg.bootstrap = detail::parse_count(key, value);
  else if (key == "seed") cfg.seed = detail::parse_count(key, value);
  else if (key == "max_shift") cfg.max_shift = detail::parse_count(key, value);
  else if (key == "no_mobility") cfg.no_mobility = detail::parse_bool(key, value);
  else if (key == "model") {
    if (value == "poisson") cfg.family = CountModel::poisson;
    else if (value == "negbin") cfg.family = CountModel::negbin;
    else throw Error(ErrorCode::ConfigError, fmt::format("'model' must be poisson or negbin, got '{}'", value));
  } else {
    throw Error(ErrorCode::ConfigError, fmt::format("unknown configuration key '{}'", key));
  }
}

/// Flat `key = value` text; `#` starts a comment; values may be quoted.
inline void parse_config(RunConfig& cfg, std::string_view text, const std::filesystem::path& base = {}) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = detail::strip(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::ConfigError, fmt::format("config line {}: expected 'key = value'", line_no));
    }
    std::string_view key = detail::strip(line.substr(0, eq));
    std::string_view value = detail::strip(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    apply_setting(cfg, key, value, base);
  }
}

inline RunConfig load_config(const std::filesystem::path& path) {
  RunConfig cfg;
  std::string text;
  try {
    text = csv::read_file(path);
  } catch (const Error& e) {
    throw Error(ErrorCode::IoError, e.what());
  }
  parse_config(cfg, text, path.parent_path());
  return cfg;
}

}  // namespace metaseir

#endif  // METASEIR_CONFIG_HPP
