#include "anisoflow/stepper.hpp"

#include "anisoflow/field_io.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <ostream>
#include <string>

namespace anisoflow {

TimePartition::TimePartition(std::vector<double> breakpoints) : breakpoints_(std::move(breakpoints))
{
    if (breakpoints_.size() < 2) {
        throw std::invalid_argument("time partition: need at least one interval");
    }
    if (breakpoints_.front() != 0.0) {
        throw std::invalid_argument("time partition: must start at t_0 = 0");
    }
    for (std::size_t j = 1; j < breakpoints_.size(); ++j) {
        if (!(breakpoints_[j] > breakpoints_[j - 1]) || !std::isfinite(breakpoints_[j])) {
            throw std::invalid_argument("time partition: breakpoints must be strictly increasing");
        }
    }
}

TimePartition TimePartition::uniform(double final_time, int steps)
{
    if (steps < 1 || !(final_time > 0.0)) {
        throw std::invalid_argument("time partition: need T > 0 and N >= 1");
    }
    std::vector<double> t(steps + 1);
    for (int j = 0; j <= steps; ++j) {
        t[j] = final_time * j / steps;
    }
    return TimePartition(std::move(t));
}

double TimePartition::max_tau() const noexcept
{
    double m = 0.0;
    for (std::size_t j = 1; j < breakpoints_.size(); ++j) {
        m = std::max(m, breakpoints_[j] - breakpoints_[j - 1]);
    }
    return m;
}

void StepConfig::validate() const
{
    if (!(newton_tol > 0.0) || !(linear_tol > 0.0) || !(armijo_slope > 0.0) || !(armijo_slope < 1.0)
        || !(armijo_backtrack > 0.0) || !(armijo_backtrack < 1.0) || !(armijo_min_step > 0.0)
        || max_newton_iters < 1 || max_descent_iters < 1) {
        throw std::invalid_argument("step config: tolerances and iteration limits must be positive");
    }
}

TauRegime tau_regime(double tau, double c_psi)
{
    TauRegime r;
    r.unique = c_psi == 0.0 || tau * c_psi < 1.0;
    r.lipschitz = tau * (1.0 + 2.0 * c_psi) <= 1.0;
    r.energy_stable = c_psi == 0.0 || tau * c_psi <= 2.0;
    return r;
}

namespace {

double gradient_energy(const Grid& grid, const Anisotropy& aniso, const Field& y)
{
    const auto grads = element_gradients(grid, y);
    const auto elements = grid.elements();
    double sum = 0.0;
    for (std::size_t m = 0; m < elements.size(); ++m) {
        sum += elements[m].measure * aniso.value(grads[m]);
    }
    return sum;
}

Eigen::VectorXd flux_divergence(const Grid& grid, const Anisotropy& aniso, const Field& y)
{
    auto grads = element_gradients(grid, y);
    for (auto& g : grads) g = aniso.grad(g);
    return assemble_flux_divergence(grid, grads);
}

/// Scale c of the first-order metric W + tau c K; any c > 0 keeps the
/// direction a descent direction, c near the growth constant makes it Newton-like.
double descent_metric_scale(const Anisotropy& aniso)
{
    if (aniso.kind() == Anisotropy::Kind::Isotropic) return 1.0;
    double s = 0.0;
    for (const auto& g : aniso.matrices()) {
        Eigen::SelfAdjointEigenSolver<SpaceMatrix> eig(g, Eigen::EigenvaluesOnly);
        s += std::sqrt(eig.eigenvalues().maxCoeff());
    }
    return s * s;
}

}  // namespace

double energy(const Grid& grid, const Anisotropy& aniso, const Potential& pot, const Field& y)
{
    grid.check_field(y, "energy");
    double potential_sum = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        potential_sum += grid.weights()[i] * pot.value(y[i]);
    }
    return gradient_energy(grid, aniso, y) + potential_sum;
}

double step_merit(const Grid& grid, const Anisotropy& aniso, const Potential& pot, const Field& y,
                  const Field& y_prev, const Field& u, double tau)
{
    const auto& w = grid.weights();
    double sum = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        const double dy = y[i] - y_prev[i];
        sum += w[i] * (0.5 * dy * dy / tau + pot.value(y[i]) - u[i] * y[i]);
    }
    return sum + gradient_energy(grid, aniso, y);
}

Eigen::VectorXd step_residual(const Grid& grid, const Anisotropy& aniso, const Potential& pot,
                              const Field& y, const Field& y_prev, const Field& u, double tau)
{
    grid.check_field(y, "step_residual");
    grid.check_field(y_prev, "step_residual");
    grid.check_field(u, "step_residual");
    if (!(tau > 0.0)) {
        throw std::invalid_argument("step_residual: tau must be positive");
    }
    const auto& w = grid.weights();
    Eigen::VectorXd r = tau * flux_divergence(grid, aniso, y);
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        r[i] += w[i] * (y[i] - y_prev[i] + tau * (pot.prime(y[i]) - u[i]));
    }
    return r;
}

SparseMatrix step_jacobian(const Grid& grid, const Anisotropy& aniso, const Potential& pot, const Field& y,
                           double tau)
{
    auto grads = element_gradients(grid, y);
    std::vector<SpaceMatrix> hessians;
    hessians.reserve(grads.size());
    for (const auto& g : grads) hessians.push_back(tau * aniso.hess(g));
    SparseMatrix jac = assemble_weighted_stiffness(grid, hessians);
    const auto& w = grid.weights();
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        jac.coeffRef(i, i) += w[i] * (1.0 + tau * pot.second(y[i]));
    }
    return jac;
}

StepResult step(const Grid& grid, const Anisotropy& aniso, const Potential& pot, const Field& y_prev,
                const Field& u, double tau, const StepConfig& config, const std::optional<Field>& initial_guess)
{
    config.validate();
    grid.check_field(y_prev, "step");
    grid.check_field(u, "step");
    if (!(tau > 0.0)) {
        throw std::invalid_argument("step: tau must be positive");
    }
    const double c_psi = pot.semiconvexity();
    if (config.enforce_uniqueness && !tau_regime(tau, c_psi).unique) {
        throw UniquenessViolation("step size tau = " + format_double(tau)
                                  + " violates the uniqueness rule tau < 1/C_psi = "
                                  + format_double(1.0 / c_psi));
    }

    const int n = grid.node_count();
    const bool newton_available = aniso.twice_differentiable();
    const int max_iters = newton_available ? config.max_newton_iters : config.max_descent_iters;
    const int cg_iters = 10 * n + 100;

    StepResult result;
    result.y = initial_guess ? *initial_guess : y_prev;
    grid.check_field(result.y, "step initial guess");

    SparseMatrix descent_metric;
    auto descent_direction = [&](const Eigen::VectorXd& residual) -> Eigen::VectorXd {
        if (descent_metric.rows() == 0) {
            descent_metric = tau * descent_metric_scale(aniso) * assemble_stiffness(grid);
            for (int i = 0; i < n; ++i) descent_metric.coeffRef(i, i) += grid.weights()[i];
        }
        return -solve_spd(descent_metric, residual, config.linear_tol, cg_iters, "step descent metric");
    };

    Eigen::VectorXd residual = step_residual(grid, aniso, pot, result.y, y_prev, u, tau);
    double merit = step_merit(grid, aniso, pot, result.y, y_prev, u, tau);
    constexpr double eps = std::numeric_limits<double>::epsilon();

    for (int it = 0;; ++it) {
        // Nodal (mass-scaled) residual, so the tolerance does not shrink with h.
        result.residual_inf = (residual.array() / grid.weights().array()).abs().maxCoeff();
        result.iterations = it;
        if (result.residual_inf <= config.newton_tol) {
            return result;
        }
        if (it == max_iters) break;

        Eigen::VectorXd direction;
        bool use_descent = !newton_available;
        if (newton_available) {
            const SparseMatrix jac = step_jacobian(grid, aniso, pot, result.y, tau);
            direction = Eigen::VectorXd::Zero(n);
            const CgResult cg = conjugate_gradient(jac, -residual, direction, config.linear_tol, cg_iters);
            if (cg.status == CgStatus::NonPositiveCurvature || residual.dot(direction) >= 0.0) {
                use_descent = true;
            }
        }
        if (use_descent) {
            direction = descent_direction(residual);
            result.descent_fallback = true;
        }
        // Directional derivative of the merit; its gradient is residual / tau.
        const double slope = residual.dot(direction) / tau;
        if (!(slope < 0.0)) break;

        double alpha = 1.0;
        bool accepted = false;
        while (alpha >= config.armijo_min_step) {
            Field trial = result.y + alpha * direction;
            const double trial_merit = step_merit(grid, aniso, pot, trial, y_prev, u, tau);
            Eigen::VectorXd trial_residual = step_residual(grid, aniso, pot, trial, y_prev, u, tau);
            const bool armijo = trial_merit <= merit + config.armijo_slope * alpha * slope;
            // Once the predicted decrease is below roundoff in the merit, fall
            // back to requiring a residual decrease.
            const bool roundoff_level = -alpha * slope <= 64.0 * eps * (std::abs(merit) + 1.0);
            if (armijo || (roundoff_level && trial_residual.norm() < residual.norm())) {
                result.y = std::move(trial);
                residual = std::move(trial_residual);
                merit = trial_merit;
                accepted = true;
                break;
            }
            alpha *= config.armijo_backtrack;
        }
        if (!accepted) break;
    }
    throw NonConvergence("step: nonlinear solve stopped after " + std::to_string(result.iterations)
                             + " iterations with residual " + format_double(result.residual_inf),
                         result.y, result.residual_inf);
}

Trajectory solve_trajectory(const Grid& grid, const Anisotropy& aniso, const Potential& pot, const Field& y0,
                            const ControlSequence& control, const TimePartition& partition,
                            const StepConfig& config)
{
    grid.check_field(y0, "solve_trajectory initial state");
    const int steps = partition.steps();
    if (static_cast<int>(control.size()) != steps) {
        throw std::invalid_argument("solve_trajectory: control has " + std::to_string(control.size())
                                    + " fields for " + std::to_string(steps) + " steps");
    }
    Trajectory traj{grid, partition, {}, {}, tau_regime(partition.max_tau(), pot.semiconvexity())};
    traj.states.reserve(steps + 1);
    traj.diagnostics.reserve(steps);
    traj.states.push_back(y0);
    for (int j = 1; j <= steps; ++j) {
        try {
            StepResult r = step(grid, aniso, pot, traj.states.back(), control[j - 1], partition.tau(j), config);
            traj.diagnostics.push_back({r.iterations, r.residual_inf, r.descent_fallback});
            traj.states.push_back(std::move(r.y));
        } catch (SolverError& e) {
            e.set_step(j);
            throw;
        }
    }
    return traj;
}

std::vector<Field> backward_difference(const Trajectory& trajectory)
{
    std::vector<Field> out;
    const int steps = trajectory.partition.steps();
    out.reserve(steps);
    for (int j = 1; j <= steps; ++j) {
        out.push_back((trajectory.states[j] - trajectory.states[j - 1]) / trajectory.partition.tau(j));
    }
    return out;
}

double space_time_l2(const Grid& grid, const TimePartition& partition, const std::vector<Field>& fields)
{
    if (static_cast<int>(fields.size()) != partition.steps()) {
        throw std::invalid_argument("space_time_l2: need one field per interval");
    }
    double sum = 0.0;
    for (int j = 1; j <= partition.steps(); ++j) {
        sum += partition.tau(j) * l2_dot(grid, fields[j - 1], fields[j - 1]);
    }
    return std::sqrt(sum);
}

EnergyReport check_energy_stability(const Trajectory& trajectory, const Anisotropy& aniso, const Potential& pot,
                                    double tolerance)
{
    EnergyReport report;
    report.tolerance = tolerance;
    report.max_tau = trajectory.partition.max_tau();
    report.tau_in_stable_regime = tau_regime(report.max_tau, pot.semiconvexity()).energy_stable;
    for (std::size_t j = 0; j < trajectory.states.size(); ++j) {
        report.energies.push_back(energy(trajectory.grid, aniso, pot, trajectory.states[j]));
        if (j > 0 && report.energies[j] > report.energies[j - 1] + tolerance && report.pass) {
            report.pass = false;
            report.first_violation = static_cast<int>(j);
        }
    }
    return report;
}

void write_diagnostics_csv(std::ostream& out, const Trajectory& trajectory, const Anisotropy& aniso,
                           const Potential& pot)
{
    out << "j,t_j,tau_j,newton_iters,residual_inf,energy\n";
    for (std::size_t j = 0; j < trajectory.states.size(); ++j) {
        const double tau = j == 0 ? 0.0 : trajectory.partition.tau(static_cast<int>(j));
        const int iters = j == 0 ? 0 : trajectory.diagnostics[j - 1].iterations;
        const double res = j == 0 ? 0.0 : trajectory.diagnostics[j - 1].residual_inf;
        out << j << ',' << format_double(trajectory.partition.t(static_cast<int>(j))) << ','
            << format_double(tau) << ',' << iters << ',' << format_double(res) << ','
            << format_double(energy(trajectory.grid, aniso, pot, trajectory.states[j])) << '\n';
    }
}

}  // namespace anisoflow
