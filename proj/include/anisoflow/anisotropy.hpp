#pragma once

#include "anisoflow/linalg.hpp"

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace anisoflow {

class HessianUnavailable : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Convex gradient energy A(p) with flux A'(p).
///
/// Isotropic:     A(p) = |p|^2 / 2
/// MatrixFamily:  A(p) = gamma(p)^2 / 2,  gamma(p) = sum_l sqrt(p^T G_l p + delta)
///
/// The matrix family is twice differentiable only for delta > 0; with
/// delta = 0 it is absolutely 2-homogeneous and A'(0) is taken as 0.
class Anisotropy {
public:
    enum class Kind { Isotropic, MatrixFamily };

    static Anisotropy isotropic(int dim);
    /// Throws std::invalid_argument unless every G_l is symmetric positive definite and delta >= 0.
    static Anisotropy matrix_family(std::vector<SpaceMatrix> matrices, double delta);

    [[nodiscard]] Kind kind() const noexcept { return kind_; }
    [[nodiscard]] int dim() const noexcept { return dim_; }
    [[nodiscard]] double delta() const noexcept { return delta_; }
    [[nodiscard]] const std::vector<SpaceMatrix>& matrices() const noexcept { return matrices_; }
    [[nodiscard]] bool twice_differentiable() const noexcept
    {
        return kind_ == Kind::Isotropic || delta_ > 0.0;
    }

    [[nodiscard]] double value(const SpaceVector& p) const;
    [[nodiscard]] SpaceVector grad(const SpaceVector& p) const;
    /// Throws HessianUnavailable for the delta = 0 matrix family.
    [[nodiscard]] SpaceMatrix hess(const SpaceVector& p) const;

private:
    Anisotropy(Kind kind, int dim, std::vector<SpaceMatrix> matrices, double delta)
        : kind_(kind), dim_(dim), matrices_(std::move(matrices)), delta_(delta)
    {
    }

    Kind kind_;
    int dim_;
    std::vector<SpaceMatrix> matrices_;
    double delta_ = 0.0;
};

inline double a_value(const Anisotropy& a, const SpaceVector& p) { return a.value(p); }
inline SpaceVector a_grad(const Anisotropy& a, const SpaceVector& p) { return a.grad(p); }
inline SpaceMatrix a_hess(const Anisotropy& a, const SpaceVector& p) { return a.hess(p); }

struct AnisotropyConstants {
    double monotonicity = 0.0;  ///< estimate of C_A (strong monotonicity)
    double growth = 0.0;        ///< estimate of the growth constant |A'(p)| <= C |p|
};

/// Samples `sample_count` points uniformly in the ball of the given radius
/// plus the 2*dim signed coordinate directions, then takes the minimum
/// monotonicity quotient over all pairs and the maximum growth quotient.
AnisotropyConstants estimate_constants(const Anisotropy& a, int sample_count, double radius,
                                       std::uint64_t seed = 12345);

}  // namespace anisoflow
