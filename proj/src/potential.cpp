#include "anisoflow/potential.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace anisoflow {

namespace {

/// inf over t >= 0 of a + b t + c t^2 / 2.
double quadratic_tail_minimum(double a, double b, double c)
{
    if (c > 0.0) {
        return b >= 0.0 ? a : a - 0.5 * b * b / c;
    }
    if (c == 0.0 && b >= 0.0) {
        return a;
    }
    return -std::numeric_limits<double>::infinity();
}

}  // namespace

Potential Potential::zero()
{
    return Potential(Kind::Zero);
}

Potential Potential::double_well()
{
    Potential p(Kind::DoubleWell);
    p.semiconvexity_ = 1.0;
    p.lower_bound_ = 0.0;
    return p;
}

Potential Potential::moreau_yosida(double penalty)
{
    if (!(penalty > 0.5) || !std::isfinite(penalty)) {
        throw std::invalid_argument("potential: Moreau-Yosida penalty must be finite and > 1/2");
    }
    Potential p(Kind::MoreauYosida);
    p.penalty_ = penalty;
    p.semiconvexity_ = 1.0;
    // Minimum at |y| = 2s/(2s-1).
    p.lower_bound_ = -0.5 / (2.0 * penalty - 1.0);
    return p;
}

double Potential::value(double y) const
{
    switch (kind_) {
    case Kind::Zero:
        return 0.0;
    case Kind::DoubleWell: {
        const double q = y * y - 1.0;
        return 0.25 * q * q;
    }
    case Kind::MoreauYosida: {
        const double lo = std::min(y + 1.0, 0.0);
        const double hi = std::max(y - 1.0, 0.0);
        return 0.5 * (1.0 - y * y) + penalty_ * (lo * lo + hi * hi);
    }
    case Kind::Truncated: {
        if (std::abs(y) <= cutoff_) return base_->value(y);
        const double edge = std::copysign(cutoff_, y);
        const double t = y - edge;
        return base_->value(edge) + base_->prime(edge) * t + 0.5 * base_->second(edge) * t * t;
    }
    }
    return 0.0;
}

double Potential::prime(double y) const
{
    switch (kind_) {
    case Kind::Zero:
        return 0.0;
    case Kind::DoubleWell:
        return y * y * y - y;
    case Kind::MoreauYosida:
        return -y + 2.0 * penalty_ * (std::min(y + 1.0, 0.0) + std::max(y - 1.0, 0.0));
    case Kind::Truncated: {
        if (std::abs(y) <= cutoff_) return base_->prime(y);
        const double edge = std::copysign(cutoff_, y);
        return base_->prime(edge) + base_->second(edge) * (y - edge);
    }
    }
    return 0.0;
}

double Potential::second(double y) const
{
    switch (kind_) {
    case Kind::Zero:
        return 0.0;
    case Kind::DoubleWell:
        return 3.0 * y * y - 1.0;
    case Kind::MoreauYosida:
        return std::abs(y) > 1.0 ? -1.0 + 2.0 * penalty_ : -1.0;
    case Kind::Truncated:
        return base_->second(std::clamp(y, -cutoff_, cutoff_));
    }
    return 0.0;
}

Potential build_truncation(const Potential& base, double cutoff)
{
    if (!base.twice_differentiable()) {
        throw std::invalid_argument("potential: truncation needs a C^2 base potential");
    }
    if (!(cutoff > 0.0) || !std::isfinite(cutoff)) {
        throw std::invalid_argument("potential: truncation cutoff must be positive and finite");
    }
    Potential p(Potential::Kind::Truncated);
    p.cutoff_ = cutoff;
    p.base_ = std::make_shared<const Potential>(base);
    p.semiconvexity_ = sampled_semiconvexity(base, -cutoff, cutoff);

    double inner_min = std::numeric_limits<double>::infinity();
    constexpr int samples = 100001;
    for (int i = 0; i < samples; ++i) {
        const double y = -cutoff + 2.0 * cutoff * i / (samples - 1);
        inner_min = std::min(inner_min, base.value(y));
    }
    const double right = quadratic_tail_minimum(base.value(cutoff), base.prime(cutoff), base.second(cutoff));
    // Mirror the left tail onto t >= 0.
    const double left = quadratic_tail_minimum(base.value(-cutoff), -base.prime(-cutoff), base.second(-cutoff));
    p.lower_bound_ = std::min({inner_min, right, left});
    if (!std::isfinite(p.lower_bound_)) {
        throw std::invalid_argument("potential: truncated continuation is unbounded below");
    }
    return p;
}

double sampled_semiconvexity(const Potential& pot, double lo, double hi, int points)
{
    double min_second = std::numeric_limits<double>::infinity();
    for (int i = 0; i < points; ++i) {
        const double y = lo + (hi - lo) * i / (points - 1);
        min_second = std::min(min_second, pot.second(y));
    }
    return std::max(0.0, -min_second);
}

}  // namespace anisoflow
