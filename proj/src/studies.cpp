#include "anisoflow/studies.hpp"

#include "anisoflow/field_io.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

namespace anisoflow {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

int level_steps(int base_steps, int k)
{
    return base_steps << k;
}

void check_ladder(int base_steps, int levels, int min_levels)
{
    if (base_steps < 1 || levels < min_levels || levels > 20) {
        throw StudyError("study: need base_steps >= 1 and " + std::to_string(min_levels)
                         + " <= levels <= 20");
    }
}

ControlSequence control_for_steps(const StateStudySetup& setup, const ControlSequence& master, int steps)
{
    if (master.empty()) {
        return zero_control(setup.grid, steps);
    }
    const int m = static_cast<int>(master.size());
    if (m % steps == 0) return coarsen_control(master, steps);
    if (steps % m == 0) return prolong_control(master, steps);
    throw StudyError("study: master control with " + std::to_string(m) + " steps does not nest with "
                     + std::to_string(steps) + " steps");
}

Trajectory solve_level(const StateStudySetup& setup, const Field& y0, const ControlSequence& master, int steps)
{
    const TimePartition partition = TimePartition::uniform(setup.final_time, steps);
    return solve_trajectory(setup.grid, setup.aniso, setup.pot, y0, control_for_steps(setup, master, steps),
                            partition, setup.solver);
}

/// Growth that is not decelerating across every level.
bool monotone_blowup(const std::vector<double>& values)
{
    if (values.size() < 3) return false;
    double prev_ratio = 0.0;
    for (std::size_t k = 1; k < values.size(); ++k) {
        if (!(values[k - 1] > 0.0)) return false;
        const double r = values[k] / values[k - 1];
        if (!(r > 1.0) || r < prev_ratio) return false;
        prev_ratio = r;
    }
    return true;
}

std::string fmt(double v)
{
    return format_double(v);
}

int grid_mode_count(const Grid& grid)
{
    return grid.dim() == 1 ? 3 : 9;
}

}  // namespace

ControlSequence coarsen_control(const ControlSequence& fine, int to_steps)
{
    const int from = static_cast<int>(fine.size());
    if (to_steps < 1 || from % to_steps != 0) {
        throw StudyError("coarsen_control: " + std::to_string(to_steps) + " does not divide "
                         + std::to_string(from));
    }
    const int ratio = from / to_steps;
    ControlSequence out;
    out.reserve(to_steps);
    for (int j = 0; j < to_steps; ++j) {
        Field sum = fine[j * ratio];
        for (int r = 1; r < ratio; ++r) sum += fine[j * ratio + r];
        out.push_back(sum / ratio);
    }
    return out;
}

ControlSequence prolong_control(const ControlSequence& coarse, int to_steps)
{
    const int from = static_cast<int>(coarse.size());
    if (from < 1 || to_steps % from != 0) {
        throw StudyError("prolong_control: " + std::to_string(from) + " does not divide "
                         + std::to_string(to_steps));
    }
    const int ratio = to_steps / from;
    ControlSequence out;
    out.reserve(to_steps);
    for (int j = 0; j < to_steps; ++j) out.push_back(coarse[j / ratio]);
    return out;
}

double loglog_slope(const std::vector<double>& taus, const std::vector<double>& errors)
{
    const std::size_t n = taus.size();
    double mx = 0.0, my = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        mx += std::log(taus[k]);
        my += std::log(errors[k]);
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double dx = std::log(taus[k]) - mx;
        sxy += dx * (std::log(errors[k]) - my);
        sxx += dx * dx;
    }
    return sxy / sxx;
}

double reference_corrected_rate(const std::vector<double>& taus, const std::vector<double>& errors,
                                double tau_ref)
{
    auto misfit = [&](double p) {
        std::vector<double> r(taus.size());
        for (std::size_t k = 0; k < taus.size(); ++k) {
            r[k] = std::log(errors[k]) - std::log(std::pow(taus[k], p) - std::pow(tau_ref, p));
        }
        const double mean = std::accumulate(r.begin(), r.end(), 0.0) / r.size();
        double s = 0.0;
        for (double v : r) s += (v - mean) * (v - mean);
        return s;
    };
    // Coarse scan, then golden-section refinement around the best sample.
    double best_p = 0.05, best = misfit(best_p);
    for (double p = 0.05; p <= 6.0; p += 0.01) {
        const double m = misfit(p);
        if (m < best) {
            best = m;
            best_p = p;
        }
    }
    double a = std::max(0.01, best_p - 0.01), b = best_p + 0.01;
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - g * (b - a), d = a + g * (b - a);
    double fc = misfit(c), fd = misfit(d);
    for (int it = 0; it < 100; ++it) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = misfit(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = misfit(d);
        }
    }
    return 0.5 * (a + b);
}

StudyReport tau_convergence_study(const StateStudySetup& setup, int base_steps, int levels,
                                  const ConvergenceThresholds& thresholds)
{
    check_ladder(base_steps, levels, 3);
    StudyReport report;
    report.name = "tau-convergence";
    report.metric_names = {"error_max_l2"};
    report.thresholds = {{"rate_min", thresholds.rate_min}, {"rate_max", thresholds.rate_max}};

    const int ref_steps = level_steps(base_steps, levels);
    const Trajectory reference = solve_level(setup, setup.y0, setup.master_control, ref_steps);
    double scale = 0.0;
    for (const auto& y : reference.states) scale = std::max(scale, norms(setup.grid, y).l2);

    std::vector<double> taus, errors;
    for (int k = 0; k < levels; ++k) {
        const int steps = level_steps(base_steps, k);
        const Trajectory traj = solve_level(setup, setup.y0, setup.master_control, steps);
        const int stride = ref_steps / steps;
        double err = 0.0;
        for (int j = 0; j <= steps; ++j) {
            err = std::max(err, norms(setup.grid, traj.states[j] - reference.states[j * stride]).l2);
        }
        StudyRow row{k, steps, setup.final_time / steps, {err}, kNaN};
        if (k > 0 && err > 0.0 && errors.back() > 0.0) {
            row.rate = std::log(errors.back() / err) / std::log(taus.back() / row.tau);
        }
        taus.push_back(row.tau);
        errors.push_back(err);
        report.rows.push_back(row);
    }

    const double zero_level = 1e-12 * (1.0 + scale);
    if (std::all_of(errors.begin(), errors.end(), [&](double e) { return e <= zero_level; })) {
        report.notes.push_back("errors vanish at every level; rate undefined");
        report.pass = true;
        return report;
    }
    bool decreasing = true;
    for (std::size_t k = 1; k < errors.size(); ++k) decreasing = decreasing && errors[k] < errors[k - 1];
    if (!decreasing) report.notes.push_back("errors are not strictly decreasing");
    if (std::any_of(errors.begin(), errors.end(), [](double e) { return !(e > 0.0); })) {
        report.notes.push_back("zero error at some level; rate undefined");
        report.pass = false;
        return report;
    }
    const double tau_ref = setup.final_time / ref_steps;
    report.fitted_rate = reference_corrected_rate(taus, errors, tau_ref);
    report.notes.push_back("plain log-log slope against the reference: " + fmt(loglog_slope(taus, errors)));
    const bool in_window = *report.fitted_rate >= thresholds.rate_min && *report.fitted_rate <= thresholds.rate_max;
    if (!in_window) report.notes.push_back("fitted rate outside the configured window");
    report.pass = decreasing && in_window;
    return report;
}

StudyReport uniform_bound_study(const StateStudySetup& setup, int base_steps, int levels, double ratio_window)
{
    check_ladder(base_steps, levels, 2);
    StudyReport report;
    report.name = "uniform-bounds";
    report.metric_names = {"dt_y_l2q", "max_h1", "psi_prime_l2q"};
    report.thresholds = {{"ratio_window", ratio_window}};

    std::vector<std::vector<double>> columns(3);
    for (int k = 0; k < levels; ++k) {
        const int steps = level_steps(base_steps, k);
        const Trajectory traj = solve_level(setup, setup.y0, setup.master_control, steps);
        const double dt_norm = space_time_l2(setup.grid, traj.partition, backward_difference(traj));
        double max_h1 = 0.0;
        for (const auto& y : traj.states) max_h1 = std::max(max_h1, h1_norm(setup.grid, y));
        std::vector<Field> psi_prime;
        for (int j = 1; j <= steps; ++j) {
            psi_prime.push_back(traj.states[j].unaryExpr([&](double v) { return setup.pot.prime(v); }));
        }
        const double psi_norm = space_time_l2(setup.grid, traj.partition, psi_prime);
        report.rows.push_back({k, steps, setup.final_time / steps, {dt_norm, max_h1, psi_norm}, kNaN});
        columns[0].push_back(dt_norm);
        columns[1].push_back(max_h1);
        columns[2].push_back(psi_norm);
    }

    report.pass = true;
    for (std::size_t m = 0; m < columns.size(); ++m) {
        const auto& col = columns[m];
        for (std::size_t k = 1; k < col.size(); ++k) {
            if (col[k] == col[k - 1]) continue;
            const double ratio = col[k - 1] > 0.0 ? col[k] / col[k - 1] : std::numeric_limits<double>::infinity();
            if (!(ratio <= ratio_window && ratio >= 1.0 / ratio_window)) {
                report.pass = false;
                report.notes.push_back(report.metric_names[m] + ": ratio " + fmt(ratio) + " between levels "
                                       + std::to_string(k - 1) + " and " + std::to_string(k)
                                       + " outside the window");
            }
        }
        if (monotone_blowup(col)) {
            report.pass = false;
            report.notes.push_back(report.metric_names[m] + ": non-decelerating growth across the ladder");
        }
    }
    return report;
}

std::optional<double> lipschitz_ratio(const StateStudySetup& setup, const PerturbationPair& pair,
                                      const TimePartition& partition)
{
    const int steps = partition.steps();
    const Grid& grid = setup.grid;
    const ControlSequence u1 = control_for_steps(setup, pair.control_first, steps);
    const ControlSequence u2 = control_for_steps(setup, pair.control_second, steps);

    double data = norms(grid, pair.y0_first - pair.y0_second).l2;
    double control_part = 0.0;
    for (int j = 1; j <= steps; ++j) {
        const double dn = dual_norm(grid, u1[j - 1] - u2[j - 1]);
        control_part += partition.tau(j) * dn * dn;
    }
    data += std::sqrt(control_part);
    if (!(data > 0.0)) return std::nullopt;

    const Trajectory t1 = solve_trajectory(grid, setup.aniso, setup.pot, pair.y0_first, u1, partition, setup.solver);
    const Trajectory t2 = solve_trajectory(grid, setup.aniso, setup.pot, pair.y0_second, u2, partition, setup.solver);
    double max_l2 = 0.0, grad_part = 0.0;
    for (int j = 0; j <= steps; ++j) {
        const FieldNorms n = norms(grid, t1.states[j] - t2.states[j]);
        max_l2 = std::max(max_l2, n.l2);
        if (j > 0) grad_part += partition.tau(j) * n.h1_semi * n.h1_semi;
    }
    return (max_l2 + std::sqrt(grad_part)) / data;
}

StudyReport lipschitz_study(const StateStudySetup& setup, const std::vector<PerturbationPair>& pairs,
                            int base_steps, int levels, double growth_window)
{
    check_ladder(base_steps, levels, 2);
    const double c_psi = setup.pot.semiconvexity();
    const double coarse_tau = setup.final_time / base_steps;
    if (!tau_regime(coarse_tau, c_psi).lipschitz) {
        throw StudyError("lipschitz study: coarsest tau = " + fmt(coarse_tau) + " exceeds 1/(1+2 C_psi) = "
                         + fmt(1.0 / (1.0 + 2.0 * c_psi)));
    }
    StudyReport report;
    report.name = "lipschitz";
    report.metric_names = {"max_ratio", "min_ratio", "pairs_used"};
    report.thresholds = {{"growth_window", growth_window}};

    std::vector<bool> flagged(pairs.size(), false);
    for (int k = 0; k < levels; ++k) {
        const int steps = level_steps(base_steps, k);
        const TimePartition partition = TimePartition::uniform(setup.final_time, steps);
        double max_ratio = 0.0, min_ratio = std::numeric_limits<double>::infinity();
        int used = 0;
        for (std::size_t p = 0; p < pairs.size(); ++p) {
            const auto ratio = lipschitz_ratio(setup, pairs[p], partition);
            if (!ratio) {
                if (!flagged[p]) {
                    report.notes.push_back("pair " + std::to_string(p) + " has identical data; skipped");
                    flagged[p] = true;
                }
                continue;
            }
            max_ratio = std::max(max_ratio, *ratio);
            min_ratio = std::min(min_ratio, *ratio);
            ++used;
        }
        if (used == 0) {
            max_ratio = min_ratio = kNaN;
        }
        report.rows.push_back({k, steps, setup.final_time / steps, {max_ratio, min_ratio, double(used)}, kNaN});
    }

    const double base = report.rows.front().metrics[0];
    if (std::isnan(base)) {
        report.notes.push_back("no usable pairs");
        report.pass = false;
        return report;
    }
    report.pass = true;
    for (const auto& row : report.rows) {
        if (!(row.metrics[0] <= growth_window * base)) {
            report.pass = false;
            report.notes.push_back("level " + std::to_string(row.level) + ": max ratio " + fmt(row.metrics[0])
                                   + " exceeds " + fmt(growth_window) + " x coarsest " + fmt(base));
        }
    }
    return report;
}

ControlProblem make_control_problem(const ControlStudySetup& setup, int steps)
{
    const TimePartition partition = TimePartition::uniform(setup.final_time, steps);
    Target target = setup.target;
    if (auto* dt = std::get_if<DistributedTarget>(&target)) {
        const int m = static_cast<int>(dt->states.size());
        if (m % steps == 0) {
            dt->states = coarsen_control(dt->states, steps);
        } else if (steps % m == 0) {
            dt->states = prolong_control(dt->states, steps);
        } else {
            throw StudyError("control study: distributed target does not nest with " + std::to_string(steps)
                             + " steps");
        }
    }
    ControlProblem problem{setup.grid, partition, setup.y0, std::move(target), setup.lambda,
                           setup.aniso, setup.pot, setup.solver};
    problem.validate();
    return problem;
}

StudyReport control_convergence_study(const ControlStudySetup& setup, int base_steps, int levels)
{
    check_ladder(base_steps, levels, 2);
    StudyReport report;
    report.name = "control-convergence";
    report.metric_names = {"cost", "grad_norm", "iterations", "cauchy_diff"};
    report.thresholds = {{"grad_tol", setup.optimizer.grad_tol}, {"max_iters", double(setup.optimizer.max_iters)}};

    std::vector<ControlSequence> optima;
    std::vector<double> costs;
    bool histories_monotone = true;
    for (int k = 0; k < levels; ++k) {
        const int steps = level_steps(base_steps, k);
        const ControlProblem problem = make_control_problem(setup, steps);
        const OptimizeResult res = optimize(problem, zero_control(setup.grid, steps), setup.optimizer);
        const auto& hist = res.report.costs;
        for (std::size_t i = 1; i < hist.size(); ++i) {
            if (hist[i] > hist[i - 1]) {
                histories_monotone = false;
                report.notes.push_back("level " + std::to_string(k) + ": cost history increases at iterate "
                                       + std::to_string(i));
                break;
            }
        }
        if (!res.report.converged) {
            report.notes.push_back("level " + std::to_string(k) + " did not converge: " + res.report.message);
        }
        report.rows.push_back({k, steps, setup.final_time / steps,
                               {hist.back(), res.report.grad_norms.back(), double(res.report.iterations), kNaN},
                               kNaN});
        costs.push_back(hist.back());
        optima.push_back(res.control);
    }

    std::vector<double> diffs;
    for (int k = 0; k + 1 < levels; ++k) {
        const int fine_steps = level_steps(base_steps, k + 1);
        const ControlProblem fine = make_control_problem(setup, fine_steps);
        ControlSequence diff = prolong_control(optima[k], fine_steps);
        for (int j = 0; j < fine_steps; ++j) diff[j] -= optima[k + 1][j];
        diffs.push_back(control_norm(fine, diff));
        report.rows[k].metrics[3] = diffs.back();
    }

    bool cost_monotone = true;
    for (std::size_t k = 1; k < costs.size(); ++k) {
        cost_monotone = cost_monotone && costs[k] <= costs[k - 1] * (1.0 + 1e-6) + 1e-14;
    }
    report.notes.push_back(std::string("optimal cost non-increasing under refinement: ")
                           + (cost_monotone ? "yes" : "no"));

    if (std::all_of(diffs.begin(), diffs.end(), [](double d) { return d == 0.0; })) {
        report.notes.push_back("all Cauchy differences vanish");
        report.pass = histories_monotone;
        return report;
    }
    bool decreasing = true;
    for (std::size_t k = 1; k < diffs.size(); ++k) decreasing = decreasing && diffs[k] < diffs[k - 1];
    if (!decreasing) report.notes.push_back("Cauchy differences are not strictly decreasing");
    if (diffs.size() >= 2 && diffs.back() > 0.0) {
        std::vector<double> taus;
        for (int k = 0; k + 1 < levels; ++k) taus.push_back(setup.final_time / level_steps(base_steps, k));
        report.fitted_rate = loglog_slope(taus, diffs);
    }
    report.pass = decreasing && histories_monotone;
    return report;
}

void write_study_csv(std::ostream& out, const StudyReport& report)
{
    out << "level,N,tau";
    for (const auto& m : report.metric_names) out << ',' << m;
    out << ",rate\n";
    for (const auto& row : report.rows) {
        out << row.level << ',' << row.steps << ',' << fmt(row.tau);
        for (double v : row.metrics) out << ',' << fmt(v);
        out << ',' << fmt(row.rate) << '\n';
    }
}

void write_study_summary(std::ostream& out, const StudyReport& report)
{
    out << "study: " << report.name << '\n';
    out << "levels: " << report.rows.size() << '\n';
    for (const auto& [key, value] : report.thresholds) out << "threshold " << key << ": " << fmt(value) << '\n';
    if (report.fitted_rate) out << "fitted rate: " << fmt(*report.fitted_rate) << '\n';
    for (const auto& note : report.notes) out << "note: " << note << '\n';
    out << (report.pass ? "PASS" : "FAIL") << '\n';
}

}  // namespace anisoflow

#include <random>

namespace anisoflow {

namespace {

double unit_sample(std::mt19937_64& rng)
{
    return static_cast<double>(rng() >> 11) * 0x1.0p-53 * 2.0 - 1.0;
}

/// sum over modes k (per axis) in 0..2 of c_k prod cos(k pi x / L).
Field cosine_modes(const Grid& grid, const std::vector<double>& coeffs)
{
    Field f = Field::Zero(grid.node_count());
    const int modes = 3;
    for (int i = 0; i < grid.node_count(); ++i) {
        const SpaceVector x = grid.node(i);
        for (int m = 0; m < static_cast<int>(coeffs.size()); ++m) {
            double basis = 1.0;
            int rest = m;
            for (int k = 0; k < grid.dim(); ++k) {
                basis *= std::cos((rest % modes) * M_PI * x[k] / grid.lengths()[k]);
                rest /= modes;
            }
            f[i] += coeffs[m] * basis;
        }
    }
    return f;
}

}  // namespace

std::vector<PerturbationPair> random_perturbation_pairs(const StateStudySetup& setup, int count, double amplitude,
                                                        int master_steps, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    const int spatial_modes = grid_mode_count(setup.grid);
    const ControlSequence base = control_for_steps(setup, setup.master_control, master_steps);
    std::vector<PerturbationPair> pairs;
    for (int p = 0; p < count; ++p) {
        std::vector<double> c(spatial_modes);
        for (auto& v : c) v = amplitude * unit_sample(rng) / spatial_modes;
        PerturbationPair pair{setup.y0, setup.y0 + cosine_modes(setup.grid, c), base, base};
        // Up to three cosine modes in time, each with its own spatial profile.
        std::vector<Field> temporal;
        for (int m = 0; m < 3; ++m) {
            for (auto& v : c) v = amplitude * unit_sample(rng) / (3 * spatial_modes);
            temporal.push_back(cosine_modes(setup.grid, c));
        }
        for (int j = 0; j < master_steps; ++j) {
            const double t_mid = (j + 0.5) / master_steps;
            for (int m = 0; m < 3; ++m) pair.control_second[j] += std::cos(m * M_PI * t_mid) * temporal[m];
        }
        pairs.push_back(std::move(pair));
    }
    return pairs;
}

ControlSequence handcrafted_control(const Grid& grid, int steps, double amplitude)
{
    Field f(grid.node_count());
    for (int i = 0; i < grid.node_count(); ++i) {
        f[i] = amplitude * std::cos(M_PI * grid.node(i)[0] / grid.lengths()[0]);
    }
    return ControlSequence(steps, f);
}

}  // namespace anisoflow
