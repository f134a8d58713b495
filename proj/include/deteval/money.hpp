#pragma once

#include <cmath>
#include <cstdint>

namespace deteval {

// Fixed-point dollars. Sums of per-file costs are accumulated here so that
// totals do not depend on summation order.
using Nanodollars = std::int64_t;

inline Nanodollars to_nanodollars(double dollars) {
  return static_cast<Nanodollars>(std::llround(dollars * 1e9));
}

inline double to_dollars(Nanodollars n) { return static_cast<double>(n) / 1e9; }

}  // namespace deteval
