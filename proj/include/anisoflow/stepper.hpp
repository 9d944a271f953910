#pragma once

#include "anisoflow/anisotropy.hpp"
#include "anisoflow/grid.hpp"
#include "anisoflow/potential.hpp"

#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <vector>

namespace anisoflow {

/// Base of all state-solver failures. `step()` is the 1-based time index of
/// the failing step, or -1 when the failure is not tied to a step.
class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    [[nodiscard]] int step() const noexcept { return step_; }
    void set_step(int j) noexcept { step_ = j; }

private:
    int step_ = -1;
};

/// tau_j >= 1/C_psi while uniqueness enforcement is on.
class UniquenessViolation : public SolverError {
public:
    using SolverError::SolverError;
};

class NonConvergence : public SolverError {
public:
    NonConvergence(const std::string& what, Field best, double residual)
        : SolverError(what), best_(std::move(best)), residual_(residual)
    {
    }
    [[nodiscard]] const Field& best_iterate() const noexcept { return best_; }
    [[nodiscard]] double residual() const noexcept { return residual_; }

private:
    Field best_;
    double residual_;
};

/// 0 = t_0 < t_1 < ... < t_N = T.
class TimePartition {
public:
    explicit TimePartition(std::vector<double> breakpoints);
    static TimePartition uniform(double final_time, int steps);

    [[nodiscard]] int steps() const noexcept { return static_cast<int>(breakpoints_.size()) - 1; }
    [[nodiscard]] double final_time() const noexcept { return breakpoints_.back(); }
    [[nodiscard]] double t(int j) const { return breakpoints_.at(j); }
    /// tau_j = t_j - t_{j-1}, 1 <= j <= N.
    [[nodiscard]] double tau(int j) const { return breakpoints_.at(j) - breakpoints_.at(j - 1); }
    [[nodiscard]] double max_tau() const noexcept;
    [[nodiscard]] const std::vector<double>& breakpoints() const noexcept { return breakpoints_; }

private:
    std::vector<double> breakpoints_;
};

struct StepConfig {
    double newton_tol = 1e-10;  ///< on max_i |R_i| / w_i, the nodal residual
    int max_newton_iters = 50;
    int max_descent_iters = 5000;  ///< iteration cap of the first-order fallback
    double armijo_slope = 1e-4;
    double armijo_backtrack = 0.5;
    double armijo_min_step = 1e-12;
    double linear_tol = 1e-12;
    bool enforce_uniqueness = true;

    void validate() const;
};

/// Which of the step-size conditions tau < 1/C_psi, tau <= 1/(1+2 C_psi),
/// tau <= 2/C_psi hold (1/0 read as infinity).
struct TauRegime {
    bool unique = false;
    bool lipschitz = false;
    bool energy_stable = false;
};

TauRegime tau_regime(double tau, double c_psi);

/// Ginzburg-Landau energy with lumped potential term.
double energy(const Grid& grid, const Anisotropy& aniso, const Potential& pot, const Field& y);

/// Per-step functional whose unique minimizer is the next state:
/// sum_i w_i ((y_i - yp_i)^2 / (2 tau) + psi(y_i) - u_i y_i) + sum_e |e| A(grad y).
double step_merit(const Grid& grid, const Anisotropy& aniso, const Potential& pot, const Field& y,
                  const Field& y_prev, const Field& u, double tau);

/// W(y - y_prev) + tau K[A'(grad y)] + tau W psi'(y) - tau W u  (equals tau * grad of step_merit).
Eigen::VectorXd step_residual(const Grid& grid, const Anisotropy& aniso, const Potential& pot,
                              const Field& y, const Field& y_prev, const Field& u, double tau);

/// Jacobian of step_residual: W + tau K[A''(grad y)] + tau W psi''(y).
/// Throws HessianUnavailable when A'' is not defined.
SparseMatrix step_jacobian(const Grid& grid, const Anisotropy& aniso, const Potential& pot, const Field& y,
                           double tau);

struct StepResult {
    Field y;
    int iterations = 0;
    double residual_inf = 0.0;  ///< max_i |R_i| / w_i
    bool descent_fallback = false;  ///< at least one iteration used the first-order direction
};

/// One implicit step: minimizes step_merit by Newton with Armijo backtracking,
/// falling back to preconditioned gradient descent where A'' is unavailable or
/// the Newton matrix is not positive definite. Starts from `initial_guess`
/// (y_prev when empty).
StepResult step(const Grid& grid, const Anisotropy& aniso, const Potential& pot, const Field& y_prev,
                const Field& u, double tau, const StepConfig& config,
                const std::optional<Field>& initial_guess = std::nullopt);

struct StepDiagnostics {
    int iterations = 0;
    double residual_inf = 0.0;
    bool descent_fallback = false;
};

struct Trajectory {
    Grid grid;
    TimePartition partition;
    std::vector<Field> states;  ///< y_0 .. y_N
    std::vector<StepDiagnostics> diagnostics;  ///< steps 1 .. N
    TauRegime regime;
};

using ControlSequence = std::vector<Field>;

/// Control-to-state map: y_0 = y0, then one step per interval. Solver errors
/// propagate with their step index set.
Trajectory solve_trajectory(const Grid& grid, const Anisotropy& aniso, const Potential& pot, const Field& y0,
                            const ControlSequence& control, const TimePartition& partition,
                            const StepConfig& config);

/// (y_j - y_{j-1}) / tau_j, j = 1..N.
std::vector<Field> backward_difference(const Trajectory& trajectory);

/// sqrt(sum_j tau_j ||f_j||^2_{L2}) for N fields on the partition.
double space_time_l2(const Grid& grid, const TimePartition& partition, const std::vector<Field>& fields);

struct EnergyReport {
    std::vector<double> energies;  ///< E_0 .. E_N
    bool pass = true;
    int first_violation = -1;
    double tolerance = 0.0;
    double max_tau = 0.0;
    bool tau_in_stable_regime = false;  ///< tau <= 2/C_psi
};

EnergyReport check_energy_stability(const Trajectory& trajectory, const Anisotropy& aniso, const Potential& pot,
                                    double tolerance = 1e-9);

/// Columns `j, t_j, tau_j, newton_iters, residual_inf, energy`; row 0 is the initial state.
void write_diagnostics_csv(std::ostream& out, const Trajectory& trajectory, const Anisotropy& aniso,
                           const Potential& pot);

}  // namespace anisoflow
