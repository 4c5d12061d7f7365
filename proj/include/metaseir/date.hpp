#ifndef METASEIR_DATE_HPP
#define METASEIR_DATE_HPP

#include <chrono>
#include <charconv>
#include <compare>
#include <string>
#include <string_view>

#include <fmt/format.h>

#include "metaseir/error.hpp"

namespace metaseir {

/// Calendar day, stored as days since the Unix epoch.
class Date {
 public:
  constexpr Date() = default;
  constexpr explicit Date(std::chrono::sys_days days) : days_(days) {}
  constexpr Date(int year, unsigned month, unsigned day)
      : days_(std::chrono::year_month_day{std::chrono::year{year}, std::chrono::month{month},
                                          std::chrono::day{day}}) {}

  /// Parses `YYYY-MM-DD`.
  static Date parse(std::string_view text) {
    auto fail = [&] {
      return Error(ErrorCode::ParseError, fmt::format("invalid ISO-8601 date '{}'", text));
    };
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') {
      throw fail();
    }
    int y = 0;
    unsigned m = 0;
    unsigned d = 0;
    auto read = [&](std::string_view part, auto& out) {
      auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), out);
      if (ec != std::errc{} || ptr != part.data() + part.size()) {
        throw fail();
      }
    };
    read(text.substr(0, 4), y);
    read(text.substr(5, 2), m);
    read(text.substr(8, 2), d);
    std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
    if (!ymd.ok()) {
      throw fail();
    }
    return Date(std::chrono::sys_days{ymd});
  }

  std::string to_string() const {
    std::chrono::year_month_day ymd{days_};
    return fmt::format("{:04d}-{:02d}-{:02d}", static_cast<int>(ymd.year()),
                       static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  }

  constexpr long serial() const { return days_.time_since_epoch().count(); }

  constexpr unsigned day_of_month() const {
    return static_cast<unsigned>(std::chrono::year_month_day{days_}.day());
  }

  constexpr Date operator+(long n) const { return Date(days_ + std::chrono::days{n}); }
  constexpr Date operator-(long n) const { return Date(days_ - std::chrono::days{n}); }
  constexpr long operator-(Date other) const { return serial() - other.serial(); }
  constexpr Date& operator++() {
    days_ += std::chrono::days{1};
    return *this;
  }

  constexpr auto operator<=>(const Date&) const = default;

 private:
  std::chrono::sys_days days_{};
};

}  // namespace metaseir

template <>
struct fmt::formatter<metaseir::Date> : fmt::formatter<std::string> {
  template <typename FormatContext>
  auto format(const metaseir::Date& d, FormatContext& ctx) const {
    return fmt::formatter<std::string>::format(d.to_string(), ctx);
  }
};

#endif  // METASEIR_DATE_HPP
