#ifndef SPECTEX_STATS_HPP_
#define SPECTEX_STATS_HPP_

#include <span>

namespace spectex {

/// Linear-interpolated percentile (p in [0,100]) of the values; 0 when empty.
double percentile(std::span<const double> values, double p);

double median(std::span<const double> values);

}  // namespace spectex

#endif  // SPECTEX_STATS_HPP_
