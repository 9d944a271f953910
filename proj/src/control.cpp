#include "anisoflow/control.hpp"

#include "anisoflow/field_io.hpp"

#include <cmath>
#include <deque>
#include <ostream>
#include <string>

namespace anisoflow {

void ControlProblem::validate() const
{
    if (!(lambda > 0.0) || !std::isfinite(lambda)) {
        throw std::invalid_argument("control problem: lambda must be positive");
    }
    grid.check_field(y0, "control problem y0");
    if (aniso.dim() != grid.dim()) {
        throw std::invalid_argument("control problem: anisotropy dimension does not match the grid");
    }
    if (const auto* ft = std::get_if<FinalTimeTarget>(&target)) {
        grid.check_field(ft->state, "control problem target");
    } else {
        const auto& dt = std::get<DistributedTarget>(target);
        if (static_cast<int>(dt.states.size()) != partition.steps()) {
            throw std::invalid_argument("control problem: distributed target needs one field per step");
        }
        for (const auto& f : dt.states) grid.check_field(f, "control problem target");
    }
    solver.validate();
}

namespace {

void check_control(const ControlProblem& problem, const ControlSequence& u, const char* what)
{
    if (static_cast<int>(u.size()) != problem.partition.steps()) {
        throw std::invalid_argument(std::string(what) + ": control has " + std::to_string(u.size())
                                    + " fields, partition has " + std::to_string(problem.partition.steps())
                                    + " steps");
    }
    for (const auto& f : u) problem.grid.check_field(f, what);
}

ControlSequence axpy(const ControlSequence& x, double alpha, const ControlSequence& d)
{
    ControlSequence out(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) out[j] = x[j] + alpha * d[j];
    return out;
}

void scale(ControlSequence& x, double alpha)
{
    for (auto& f : x) f *= alpha;
}

}  // namespace

double control_dot(const ControlProblem& problem, const ControlSequence& a, const ControlSequence& b)
{
    check_control(problem, a, "control_dot");
    check_control(problem, b, "control_dot");
    double sum = 0.0;
    for (int j = 1; j <= problem.partition.steps(); ++j) {
        sum += problem.partition.tau(j) * l2_dot(problem.grid, a[j - 1], b[j - 1]);
    }
    return sum;
}

double control_norm(const ControlProblem& problem, const ControlSequence& a)
{
    return std::sqrt(control_dot(problem, a, a));
}

ControlSequence zero_control(const Grid& grid, int steps)
{
    return ControlSequence(steps, Field::Zero(grid.node_count()));
}

Trajectory forward_solve(const ControlProblem& problem, const ControlSequence& control)
{
    check_control(problem, control, "forward_solve");
    return solve_trajectory(problem.grid, problem.aniso, problem.pot, problem.y0, control, problem.partition,
                            problem.solver);
}

double cost(const ControlProblem& problem, const Trajectory& trajectory, const ControlSequence& control)
{
    check_control(problem, control, "cost");
    const int steps = problem.partition.steps();
    if (static_cast<int>(trajectory.states.size()) != steps + 1) {
        throw std::invalid_argument("cost: trajectory does not match the partition");
    }
    double tracking = 0.0;
    if (const auto* ft = std::get_if<FinalTimeTarget>(&problem.target)) {
        const Field diff = trajectory.states[steps] - ft->state;
        tracking = 0.5 * l2_dot(problem.grid, diff, diff);
    } else {
        const auto& dt = std::get<DistributedTarget>(problem.target);
        for (int j = 1; j <= steps; ++j) {
            const Field diff = trajectory.states[j] - dt.states[j - 1];
            tracking += 0.5 * problem.partition.tau(j) * l2_dot(problem.grid, diff, diff);
        }
    }
    return tracking + 0.5 * problem.lambda * control_dot(problem, control, control);
}

std::vector<Field> adjoint_solve(const ControlProblem& problem, const Trajectory& trajectory)
{
    if (!problem.aniso.twice_differentiable()) {
        throw AdjointUnavailable("adjoint: the anisotropy has no second derivative (delta = 0); "
                                 "use the finite-difference gradient");
    }
    const int steps = problem.partition.steps();
    const Grid& grid = problem.grid;
    const auto& w = grid.weights();
    const int cg_iters = 10 * grid.node_count() + 100;

    std::vector<Field> p(steps, Field::Zero(grid.node_count()));
    Field next = Field::Zero(grid.node_count());
    for (int j = steps; j >= 1; --j) {
        const double tau = problem.partition.tau(j);
        Eigen::VectorXd rhs = w.cwiseProduct(next);
        if (const auto* ft = std::get_if<FinalTimeTarget>(&problem.target)) {
            if (j == steps) rhs += w.cwiseProduct(trajectory.states[steps] - ft->state);
        } else {
            const auto& dt = std::get<DistributedTarget>(problem.target);
            rhs += tau * w.cwiseProduct(trajectory.states[j] - dt.states[j - 1]);
        }
        const SparseMatrix jac = step_jacobian(grid, problem.aniso, problem.pot, trajectory.states[j], tau);
        try {
            p[j - 1] = solve_spd(jac, rhs, problem.solver.linear_tol, cg_iters, "adjoint");
        } catch (LinearSolverError& e) {
            throw SolverError(std::string(e.what()) + " at step " + std::to_string(j));
        }
        next = p[j - 1];
    }
    return p;
}

GradientEvaluation reduced_gradient(const ControlProblem& problem, const ControlSequence& control)
{
    Trajectory traj = forward_solve(problem, control);
    const double j_value = cost(problem, traj, control);
    std::vector<Field> p = adjoint_solve(problem, traj);
    ControlSequence g(control.size());
    for (std::size_t j = 0; j < control.size(); ++j) {
        g[j] = problem.lambda * control[j] + p[j];
    }
    return {std::move(g), std::move(traj), j_value};
}

ControlSequence fd_gradient(const ControlProblem& problem, const ControlSequence& control, double eps)
{
    check_control(problem, control, "fd_gradient");
    const int steps = problem.partition.steps();
    const int n = problem.grid.node_count();
    if (static_cast<long>(steps) * n > 10000) {
        throw std::invalid_argument("fd_gradient: instance has " + std::to_string(static_cast<long>(steps) * n)
                                    + " control unknowns, limit is 10000");
    }
    const auto& w = problem.grid.weights();
    ControlSequence g = zero_control(problem.grid, steps);
    ControlSequence u = control;
    for (int j = 0; j < steps; ++j) {
        for (int i = 0; i < n; ++i) {
            const double saved = u[j][i];
            u[j][i] = saved + eps;
            const double plus = cost(problem, forward_solve(problem, u), u);
            u[j][i] = saved - eps;
            const double minus = cost(problem, forward_solve(problem, u), u);
            u[j][i] = saved;
            g[j][i] = (plus - minus) / (2.0 * eps) / (problem.partition.tau(j + 1) * w[i]);
        }
    }
    return g;
}

OptimizeResult optimize(const ControlProblem& problem, const ControlSequence& u_init,
                        const OptimizeOptions& options)
{
    problem.validate();
    check_control(problem, u_init, "optimize");

    OptimizeReport report;
    ControlSequence u = u_init;
    GradientEvaluation eval = reduced_gradient(problem, u);
    double grad_norm = control_norm(problem, eval.gradient);
    report.costs.push_back(eval.cost);
    report.grad_norms.push_back(grad_norm);
    report.step_lengths.push_back(0.0);
    report.linesearch_evals.push_back(0);

    struct Pair {
        ControlSequence s, y;
        double rho;
    };
    std::deque<Pair> memory;
    double alpha_prev = 1.0;

    for (int k = 0;; ++k) {
        report.iterations = k;
        if (grad_norm <= options.grad_tol) {
            report.converged = true;
            report.message = "gradient tolerance reached";
            break;
        }
        if (k == options.max_iters) {
            report.message = "iteration limit reached";
            break;
        }

        ControlSequence direction = eval.gradient;
        scale(direction, -1.0);
        bool quasi_newton = false;
        if (options.method == OptimizeOptions::Method::Lbfgs && !memory.empty()) {
            std::vector<double> a(memory.size());
            for (std::size_t m = memory.size(); m-- > 0;) {
                a[m] = memory[m].rho * control_dot(problem, memory[m].s, direction);
                direction = axpy(direction, -a[m], memory[m].y);
            }
            const Pair& last = memory.back();
            scale(direction, control_dot(problem, last.s, last.y) / control_dot(problem, last.y, last.y));
            for (std::size_t m = 0; m < memory.size(); ++m) {
                const double b = memory[m].rho * control_dot(problem, memory[m].y, direction);
                direction = axpy(direction, a[m] - b, memory[m].s);
            }
            quasi_newton = true;
        }
        double slope = control_dot(problem, eval.gradient, direction);
        if (!(slope < 0.0)) {
            memory.clear();
            direction = eval.gradient;
            scale(direction, -1.0);
            slope = -grad_norm * grad_norm;
            quasi_newton = false;
        }

        double alpha = quasi_newton ? 1.0 : std::min(1e8, 2.0 * alpha_prev);
        int evals = 0;
        bool accepted = false;
        ControlSequence trial;
        while (alpha >= options.armijo_min_step) {
            trial = axpy(u, alpha, direction);
            ++evals;
            try {
                const Trajectory traj = forward_solve(problem, trial);
                const double trial_cost = cost(problem, traj, trial);
                if (trial_cost <= eval.cost + options.armijo_slope * alpha * slope) {
                    accepted = true;
                    break;
                }
            } catch (const SolverError&) {
                // Treat an unsolvable trial state like an infinite cost.
            }
            alpha *= options.armijo_backtrack;
        }
        if (!accepted) {
            report.message = "line search failed below the minimum step";
            break;
        }

        GradientEvaluation next = reduced_gradient(problem, trial);
        if (options.method == OptimizeOptions::Method::Lbfgs) {
            Pair pair{axpy(trial, -1.0, u), axpy(next.gradient, -1.0, eval.gradient), 0.0};
            const double sy = control_dot(problem, pair.s, pair.y);
            if (sy > 1e-12 * control_norm(problem, pair.s) * control_norm(problem, pair.y)) {
                pair.rho = 1.0 / sy;
                memory.push_back(std::move(pair));
                if (static_cast<int>(memory.size()) > options.lbfgs_memory) memory.pop_front();
            }
        }
        u = std::move(trial);
        eval = std::move(next);
        grad_norm = control_norm(problem, eval.gradient);
        alpha_prev = alpha;
        report.costs.push_back(eval.cost);
        report.grad_norms.push_back(grad_norm);
        report.step_lengths.push_back(alpha);
        report.linesearch_evals.push_back(evals);
    }
    return {std::move(u), std::move(eval.trajectory), std::move(report)};
}

void write_history_csv(std::ostream& out, const OptimizeReport& report)
{
    out << "iter,J,grad_norm,step_length,linesearch_evals\n";
    for (std::size_t k = 0; k < report.costs.size(); ++k) {
        out << k << ',' << format_double(report.costs[k]) << ',' << format_double(report.grad_norms[k]) << ','
            << format_double(report.step_lengths[k]) << ',' << report.linesearch_evals[k] << '\n';
    }
}

}  // namespace anisoflow
