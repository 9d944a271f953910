#include "anisoflow/linalg.hpp"

#include <cmath>

namespace anisoflow {

CgResult conjugate_gradient(const SparseMatrix& a, const Eigen::VectorXd& b,
                            Eigen::VectorXd& x, double rel_tol, int max_iterations)
{
    CgResult result;
    const Eigen::Index n = b.size();
    if (x.size() != n) {
        x = Eigen::VectorXd::Zero(n);
    }
    const double b_norm = b.norm();
    if (b_norm == 0.0) {
        x.setZero();
        result.status = CgStatus::Converged;
        return result;
    }

    Eigen::VectorXd inv_diag(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double d = a.coeff(i, i);
        inv_diag[i] = d > 0.0 ? 1.0 / d : 1.0;
    }

    Eigen::VectorXd r = b - a * x;
    Eigen::VectorXd z = inv_diag.cwiseProduct(r);
    Eigen::VectorXd d = z;
    Eigen::VectorXd ad(n);
    double rz = r.dot(z);

    for (int it = 0; it < max_iterations; ++it) {
        result.relative_residual = r.norm() / b_norm;
        if (result.relative_residual <= rel_tol) {
            result.status = CgStatus::Converged;
            result.iterations = it;
            return result;
        }
        ad.noalias() = a * d;
        const double curvature = d.dot(ad);
        if (!(curvature > 0.0)) {
            result.status = CgStatus::NonPositiveCurvature;
            result.iterations = it;
            return result;
        }
        const double alpha = rz / curvature;
        x.noalias() += alpha * d;
        r.noalias() -= alpha * ad;
        z = inv_diag.cwiseProduct(r);
        const double rz_next = r.dot(z);
        d = z + (rz_next / rz) * d;
        rz = rz_next;
    }
    result.relative_residual = r.norm() / b_norm;
    result.iterations = max_iterations;
    result.status = result.relative_residual <= rel_tol ? CgStatus::Converged
                                                        : CgStatus::MaxIterations;
    return result;
}

Eigen::VectorXd solve_spd(const SparseMatrix& a, const Eigen::VectorXd& b, double rel_tol,
                          int max_iterations, const std::string& what)
{
    Eigen::VectorXd x = Eigen::VectorXd::Zero(b.size());
    const CgResult res = conjugate_gradient(a, b, x, rel_tol, max_iterations);
    if (res.status != CgStatus::Converged) {
        throw LinearSolverError(what + ": conjugate gradients did not converge (relative residual "
                                + std::to_string(res.relative_residual) + " after "
                                + std::to_string(res.iterations) + " iterations)");
    }
    return x;
}

}  // namespace anisoflow
