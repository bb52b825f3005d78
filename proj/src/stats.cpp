#include "spectex/stats.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "spectex/errors.hpp"

namespace spectex {

double percentile(std::span<const double> values, double p) {
  if (!(p >= 0.0 && p <= 100.0)) throw ParameterError("percentile outside [0, 100]");
  if (values.empty()) return 0.0;
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double pos = p / 100.0 * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

double median(std::span<const double> values) { return percentile(values, 50.0); }

}  // namespace spectex
