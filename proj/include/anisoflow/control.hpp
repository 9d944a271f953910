#pragma once

#include "anisoflow/stepper.hpp"

#include <iosfwd>
#include <variant>

namespace anisoflow {

/// Raised when the discrete adjoint needs A'' and the anisotropy has none.
/// Use fd_gradient instead.
class AdjointUnavailable : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct FinalTimeTarget {
    Field state;  ///< y_Omega
};

struct DistributedTarget {
    std::vector<Field> states;  ///< y_{Q,1} .. y_{Q,N}
};

using Target = std::variant<FinalTimeTarget, DistributedTarget>;

struct ControlProblem {
    Grid grid;
    TimePartition partition;
    Field y0;
    Target target;
    double lambda = 1.0;
    Anisotropy aniso;
    Potential pot;
    StepConfig solver;

    /// Throws std::invalid_argument on shape errors or lambda <= 0.
    void validate() const;
};

/// Discrete L2(Q) inner product sum_j tau_j sum_i w_i a_ji b_ji.
double control_dot(const ControlProblem& problem, const ControlSequence& a, const ControlSequence& b);
double control_norm(const ControlProblem& problem, const ControlSequence& a);

ControlSequence zero_control(const Grid& grid, int steps);

Trajectory forward_solve(const ControlProblem& problem, const ControlSequence& control);

/// Tracking term plus lambda/2 ||u||^2_{L2(Q)}.
double cost(const ControlProblem& problem, const Trajectory& trajectory, const ControlSequence& control);

/// Backward recursion of the discrete adjoint, p_{N+1} = 0:
/// (W + tau_j K[A''(grad y_j)] + tau_j W psi''(y_j)) p_j = W p_{j+1} + dJ/dy_j.
std::vector<Field> adjoint_solve(const ControlProblem& problem, const Trajectory& trajectory);

struct GradientEvaluation {
    ControlSequence gradient;  ///< lambda u_j + p_j
    Trajectory trajectory;
    double cost = 0.0;
};

/// Reduced gradient represented in the control_dot inner product.
GradientEvaluation reduced_gradient(const ControlProblem& problem, const ControlSequence& control);

/// Central differences of the cost in every control entry, rescaled to the
/// same representation as reduced_gradient. Refuses instances with more
/// than 10^4 unknowns.
ControlSequence fd_gradient(const ControlProblem& problem, const ControlSequence& control, double eps);

struct OptimizeOptions {
    enum class Method { SteepestDescent, Lbfgs };

    int max_iters = 200;
    double grad_tol = 1e-8;
    double armijo_slope = 1e-4;
    double armijo_backtrack = 0.5;
    double armijo_min_step = 1e-12;
    Method method = Method::SteepestDescent;
    int lbfgs_memory = 10;
};

struct OptimizeReport {
    std::vector<double> costs;            ///< accepted iterates, starting with u_init
    std::vector<double> grad_norms;
    std::vector<double> step_lengths;     ///< 0 for the initial iterate
    std::vector<int> linesearch_evals;
    int iterations = 0;
    bool converged = false;
    std::string message;
};

struct OptimizeResult {
    ControlSequence control;
    Trajectory trajectory;
    OptimizeReport report;
};

OptimizeResult optimize(const ControlProblem& problem, const ControlSequence& u_init,
                        const OptimizeOptions& options);

/// Columns `iter, J, grad_norm, step_length, linesearch_evals`.
void write_history_csv(std::ostream& out, const OptimizeReport& report);

}  // namespace anisoflow
