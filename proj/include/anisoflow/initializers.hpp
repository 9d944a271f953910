#pragma once

#include "anisoflow/grid.hpp"

#include <cstdint>

namespace anisoflow {

Field constant_field(const Grid& grid, double value);

/// i.i.d. uniform values on [low, high), reproducible for a given seed.
Field random_uniform_field(const Grid& grid, double low, double high, std::uint64_t seed);

/// tanh((radius - |x - center|) / width): +1 inside the circle, -1 outside.
/// In 1D the "circle" is the interval center +- radius.
Field tanh_circle_field(const Grid& grid, const SpaceVector& center, double radius, double width);

}  // namespace anisoflow
