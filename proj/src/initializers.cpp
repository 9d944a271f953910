#include "anisoflow/initializers.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace anisoflow {

Field constant_field(const Grid& grid, double value)
{
    return Field::Constant(grid.node_count(), value);
}

Field random_uniform_field(const Grid& grid, double low, double high, std::uint64_t seed)
{
    if (!(high > low)) {
        throw std::invalid_argument("random_uniform: need low < high");
    }
    std::mt19937_64 rng(seed);
    // Built from raw engine output so the sequence does not depend on the
    // standard library's distribution implementation.
    Field f(grid.node_count());
    for (int i = 0; i < grid.node_count(); ++i) {
        const double unit = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        f[i] = low + (high - low) * unit;
    }
    return f;
}

Field tanh_circle_field(const Grid& grid, const SpaceVector& center, double radius, double width)
{
    if (!(radius > 0.0)) throw std::invalid_argument("tanh_circle: radius must be positive");
    if (!(width > 0.0)) throw std::invalid_argument("tanh_circle: width must be positive");
    if (center.size() != grid.dim()) throw std::invalid_argument("tanh_circle: center has wrong dimension");
    Field f(grid.node_count());
    for (int i = 0; i < grid.node_count(); ++i) {
        f[i] = std::tanh((radius - (grid.node(i) - center).norm()) / width);
    }
    return f;
}

}  // namespace anisoflow
