#include "anisoflow/anisotropy.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

namespace anisoflow {

Anisotropy Anisotropy::isotropic(int dim)
{
    if (dim != 1 && dim != 2) {
        throw std::invalid_argument("anisotropy: dim must be 1 or 2");
    }
    return Anisotropy(Kind::Isotropic, dim, {}, 0.0);
}

Anisotropy Anisotropy::matrix_family(std::vector<SpaceMatrix> matrices, double delta)
{
    if (matrices.empty()) {
        throw std::invalid_argument("anisotropy: matrix family needs at least one matrix");
    }
    if (!(delta >= 0.0) || !std::isfinite(delta)) {
        throw std::invalid_argument("anisotropy: delta must be finite and >= 0");
    }
    const Eigen::Index d = matrices.front().rows();
    if (d != 1 && d != 2) {
        throw std::invalid_argument("anisotropy: matrices must be 1x1 or 2x2");
    }
    for (std::size_t l = 0; l < matrices.size(); ++l) {
        const SpaceMatrix& g = matrices[l];
        if (g.rows() != d || g.cols() != d) {
            throw std::invalid_argument("anisotropy: matrix " + std::to_string(l) + " has wrong shape");
        }
        if ((g - g.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, g.cwiseAbs().maxCoeff())) {
            throw std::invalid_argument("anisotropy: matrix " + std::to_string(l) + " is not symmetric");
        }
        Eigen::SelfAdjointEigenSolver<SpaceMatrix> eig(g, Eigen::EigenvaluesOnly);
        if (!(eig.eigenvalues().minCoeff() > 0.0)) {
            throw std::invalid_argument("anisotropy: matrix " + std::to_string(l)
                                        + " is not positive definite");
        }
    }
    return Anisotropy(Kind::MatrixFamily, static_cast<int>(d), std::move(matrices), delta);
}

double Anisotropy::value(const SpaceVector& p) const
{
    if (kind_ == Kind::Isotropic) {
        return 0.5 * p.squaredNorm();
    }
    double gamma = 0.0;
    for (const SpaceMatrix& g : matrices_) {
        gamma += std::sqrt(p.dot(g * p) + delta_);
    }
    return 0.5 * gamma * gamma;
}

SpaceVector Anisotropy::grad(const SpaceVector& p) const
{
    if (kind_ == Kind::Isotropic) {
        return p;
    }
    double gamma = 0.0;
    SpaceVector dgamma = SpaceVector::Zero(p.size());
    for (const SpaceMatrix& g : matrices_) {
        const SpaceVector gp = g * p;
        const double s = std::sqrt(p.dot(gp) + delta_);
        gamma += s;
        if (s > 0.0) {
            dgamma += gp / s;
        }
    }
    return gamma * dgamma;
}

SpaceMatrix Anisotropy::hess(const SpaceVector& p) const
{
    const auto d = p.size();
    if (kind_ == Kind::Isotropic) {
        return SpaceMatrix::Identity(d, d);
    }
    if (!(delta_ > 0.0)) {
        throw HessianUnavailable("anisotropy: A'' is undefined at p = 0 for the delta = 0 matrix family");
    }
    double gamma = 0.0;
    SpaceVector dgamma = SpaceVector::Zero(d);
    SpaceMatrix d2gamma = SpaceMatrix::Zero(d, d);
    for (const SpaceMatrix& g : matrices_) {
        const SpaceVector gp = g * p;
        const double s = std::sqrt(p.dot(gp) + delta_);
        gamma += s;
        dgamma += gp / s;
        d2gamma += g / s - (gp * gp.transpose()) / (s * s * s);
    }
    SpaceMatrix h = dgamma * dgamma.transpose() + gamma * d2gamma;
    // Symmetrize exactly; the two products above differ only by roundoff.
    return 0.5 * (h + h.transpose());
}

AnisotropyConstants estimate_constants(const Anisotropy& a, int sample_count, double radius,
                                       std::uint64_t seed)
{
    const int d = a.dim();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    std::vector<SpaceVector> points;
    for (int k = 0; k < d; ++k) {
        for (double sign : {1.0, -1.0}) {
            SpaceVector e = SpaceVector::Zero(d);
            e[k] = sign * radius;
            points.push_back(e);
        }
    }
    for (int s = 0; s < sample_count; ++s) {
        SpaceVector dir(d);
        for (int k = 0; k < d; ++k) dir[k] = normal(rng);
        const double n = dir.norm();
        if (n == 0.0) continue;
        const double r = radius * std::pow(unit(rng), 1.0 / d);
        points.push_back(dir * (r / n));
    }

    std::vector<SpaceVector> fluxes;
    fluxes.reserve(points.size());
    for (const auto& p : points) fluxes.push_back(a.grad(p));

    AnisotropyConstants c;
    c.monotonicity = std::numeric_limits<double>::infinity();
    c.growth = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const double pn = points[i].norm();
        if (pn > 0.0) {
            c.growth = std::max(c.growth, fluxes[i].norm() / pn);
        }
        for (std::size_t j = i + 1; j < points.size(); ++j) {
            const SpaceVector dp = points[i] - points[j];
            const double dist2 = dp.squaredNorm();
            if (dist2 <= 1e-24 * radius * radius) continue;
            c.monotonicity = std::min(c.monotonicity, (fluxes[i] - fluxes[j]).dot(dp) / dist2);
        }
    }
    return c;
}

}  // namespace anisoflow
