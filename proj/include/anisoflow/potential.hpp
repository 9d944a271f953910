#pragma once

#include <memory>
#include <stdexcept>

namespace anisoflow {

/// Nonlinearity psi of the phase-field energy.
///
/// Zero:          psi = 0
/// DoubleWell:    psi(y) = (y^2 - 1)^2 / 4
/// MoreauYosida:  psi(y) = (1 - y^2)/2 + s min(y+1, 0)^2 + s max(y-1, 0)^2
/// Truncated:     base on [-x_c, x_c], second-order Taylor continuation outside
///
/// MoreauYosida is only C^1; second() returns the a.e. derivative with the
/// interior value -1 at |y| = 1 (a generalized derivative for semismooth Newton).
class Potential {
public:
    enum class Kind { Zero, DoubleWell, MoreauYosida, Truncated };

    static Potential zero();
    static Potential double_well();
    /// Requires s > 1/2, otherwise psi is unbounded below.
    static Potential moreau_yosida(double penalty);

    [[nodiscard]] Kind kind() const noexcept { return kind_; }
    [[nodiscard]] double penalty() const noexcept { return penalty_; }
    [[nodiscard]] double cutoff() const noexcept { return cutoff_; }
    [[nodiscard]] const Potential* base() const noexcept { return base_.get(); }
    [[nodiscard]] bool twice_differentiable() const noexcept { return kind_ != Kind::MoreauYosida; }
    [[nodiscard]] bool semismooth() const noexcept { return kind_ == Kind::MoreauYosida; }

    [[nodiscard]] double value(double y) const;
    [[nodiscard]] double prime(double y) const;
    [[nodiscard]] double second(double y) const;

    /// C_psi >= 0 with psi'' >= -C_psi.
    [[nodiscard]] double semiconvexity() const noexcept { return semiconvexity_; }
    /// inf psi over the real line.
    [[nodiscard]] double lower_bound() const noexcept { return lower_bound_; }

    friend Potential build_truncation(const Potential& base, double cutoff);

private:
    explicit Potential(Kind kind) : kind_(kind) {}

    Kind kind_;
    double penalty_ = 0.0;
    double cutoff_ = 0.0;
    std::shared_ptr<const Potential> base_;
    double semiconvexity_ = 0.0;
    double lower_bound_ = 0.0;
};

/// Quadratic continuation of a C^2 base beyond [-cutoff, cutoff]. Throws
/// std::invalid_argument for a non-C^2 base, cutoff <= 0, or a continuation
/// that is unbounded below.
Potential build_truncation(const Potential& base, double cutoff);

/// max(0, -min psi'') over a uniform grid of `points` samples on [lo, hi].
double sampled_semiconvexity(const Potential& pot, double lo = -10.0, double hi = 10.0,
                             int points = 100001);

inline double psi_value(const Potential& p, double y) { return p.value(y); }
inline double psi_prime(const Potential& p, double y) { return p.prime(y); }
inline double psi_second(const Potential& p, double y) { return p.second(y); }
inline double semiconvexity_constant(const Potential& p) { return p.semiconvexity(); }

}  // namespace anisoflow
