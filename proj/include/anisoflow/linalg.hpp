#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <stdexcept>
#include <string>

namespace anisoflow {

/// Nodal vector on a grid. Length always equals the grid's node count.
using Field = Eigen::VectorXd;

/// Small spatial vector / matrix. Capacity fixed at two so element loops never allocate.
using SpaceVector = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 2, 1>;
using SpaceMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 2, 2>;

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Thrown when an iterative linear solve fails to reach its tolerance.
class LinearSolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class CgStatus { Converged, MaxIterations, NonPositiveCurvature };

struct CgResult {
    CgStatus status = CgStatus::MaxIterations;
    int iterations = 0;
    double relative_residual = 0.0;
};

/// Jacobi-preconditioned conjugate gradients for A x = b, starting from the
/// given x. Stops when ||r|| <= rel_tol * ||b||. Reports NonPositiveCurvature
/// as soon as a search direction with d^T A d <= 0 is met, leaving x at the
/// last iterate.
CgResult conjugate_gradient(const SparseMatrix& a, const Eigen::VectorXd& b,
                            Eigen::VectorXd& x, double rel_tol, int max_iterations);

/// conjugate_gradient from a zero start; throws LinearSolverError unless it converged.
Eigen::VectorXd solve_spd(const SparseMatrix& a, const Eigen::VectorXd& b, double rel_tol,
                          int max_iterations, const std::string& what);

}  // namespace anisoflow
