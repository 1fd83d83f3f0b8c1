#pragma once

#include <span>
#include <vector>

namespace ecgdx {

// Linear interpolation between order statistics (h = (n-1) q); `sorted` must
// be ascending and non-empty.
double quantile_sorted(std::span<const double> sorted, double q);

// Same, on an unsorted copy; NaNs are dropped.
double quantile(std::vector<double> values, double q);

}  // namespace ecgdx
