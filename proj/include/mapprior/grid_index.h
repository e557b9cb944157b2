#ifndef MAPPRIOR_GRID_INDEX_H_
#define MAPPRIOR_GRID_INDEX_H_

#include <cmath>
#include <cstdint>

namespace mapprior {

// Index i of the half-open cell [i*cell, (i+1)*cell) containing x. The
// quotient floor(x/cell) can be off by one under rounding; the result is
// corrected so that membership agrees with the products i*cell exactly.
inline std::int64_t CellIndex(double x, double cell) {
  auto i = static_cast<std::int64_t>(std::floor(x / cell));
  if (cell * static_cast<double>(i) > x) {
    --i;
  } else if (cell * static_cast<double>(i + 1) <= x) {
    ++i;
  }
  return i;
}

}  // namespace mapprior

#endif  // MAPPRIOR_GRID_INDEX_H_
