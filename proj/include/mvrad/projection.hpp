#pragma once

#include <array>
#include <cstdint>

#include "mvrad/types.hpp"

namespace mvrad {

struct Projection2d {
  Matrix coords;                  ///< [n x 2], columns centred
  std::array<double, 2> variance; ///< sample variance per component, descending
  Matrix components;              ///< [d x 2] orthonormal principal directions
};

/// Centres the columns and projects onto the top two principal directions,
/// found by power iteration with deflation from a seeded start vector.
/// Each direction's sign is fixed so its largest-magnitude loading is positive.
Projection2d project_2d(const Matrix& data, std::uint64_t seed = 0);

}  // namespace mvrad
