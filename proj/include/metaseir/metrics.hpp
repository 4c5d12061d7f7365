#ifndef METASEIR_METRICS_HPP
#define METASEIR_METRICS_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include <fmt/format.h>

#include "metaseir/error.hpp"

namespace metaseir {

/// Root mean squared error over regions, on raw counts.
inline double rmse(std::span<const double> forecast, std::span<const double> actual) {
  if (forecast.size() != actual.size() || forecast.empty()) {
    throw Error(ErrorCode::MismatchedRegions,
                fmt::format("rmse needs equal nonempty region sets ({} vs {})", forecast.size(), actual.size()));
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < forecast.size(); ++i) {
    const double e = forecast[i] - actual[i];
    sum += e * e;
  }
  return std::sqrt(sum / static_cast<double>(forecast.size()));
}

/// Pearson correlation; NaN when either input has zero variance.
inline double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) {
    throw Error(ErrorCode::MismatchedData, "pearson correlation needs two equal-length series of length >= 2");
  }
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0;
  double saa = 0.0;
  double sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

/// 1-based ranks; ties share the average of their positions.
inline std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return values[i] < values[j]; });
  std::vector<double> ranks(values.size());
  for (std::size_t start = 0; start < order.size();) {
    std::size_t end = start + 1;
    while (end < order.size() && values[order[end]] == values[order[start]]) ++end;
    const double rank = 0.5 * static_cast<double>(start + 1 + end);
    for (std::size_t k = start; k < end; ++k) ranks[order[k]] = rank;
    start = end;
  }
  return ranks;
}

/// Spearman rank correlation with average-rank ties.
inline double spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::MismatchedRegions, "spearman correlation needs equal-length inputs");
  }
  if (a.size() < 2) {
    throw Error(ErrorCode::DegenerateRanks, "spearman correlation needs at least two regions");
  }
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  const double rho = pearson(ra, rb);
  if (std::isnan(rho)) {
    throw Error(ErrorCode::DegenerateRanks, "all values identical; ranks carry no order");
  }
  return rho;
}

struct DelayScan {
  /// correlation[s] for shift s = 0..max_shift (NaN where undefined).
  std::vector<double> correlation;
  std::size_t best_shift = 0;
  double best_correlation = std::numeric_limits<double>::quiet_NaN();
};

inline constexpr std::size_t kMinOverlap = 10;

/// Correlates a[t] with b[t + s] for every shift s in [0, max_shift]; the
/// best shift is how many days b lags behind a.
inline DelayScan delay_scan(std::span<const double> a, std::span<const double> b, std::size_t max_shift) {
  DelayScan out;
  for (std::size_t s = 0; s <= max_shift; ++s) {
    const std::size_t overlap = b.size() > s ? std::min(a.size(), b.size() - s) : 0;
    if (overlap < kMinOverlap) {
      throw Error(ErrorCode::InsufficientOverlap,
                  fmt::format("shift {} leaves {} overlapping points, need {}", s, overlap, kMinOverlap));
    }
    const double c = pearson(a.subspan(0, overlap), b.subspan(s, overlap));
    out.correlation.push_back(c);
    if (!std::isnan(c) && (std::isnan(out.best_correlation) || c > out.best_correlation)) {
      out.best_correlation = c;
      out.best_shift = s;
    }
  }
  return out;
}

}  // namespace metaseir

#endif  // METASEIR_METRICS_HPP
