#include "anisoflow/cli.hpp"

#include "anisoflow/config.hpp"
#include "anisoflow/field_io.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>

namespace anisoflow::cli {

namespace fs = std::filesystem;

namespace {

/// Study/solver failure after artifacts may have been written.
class CommandFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::string indexed(const char* prefix, int j)
{
    char buf[48];
    std::snprintf(buf, sizeof buf, "%s_%04d.field", prefix, j);
    return buf;
}

std::ofstream open_out(const fs::path& p)
{
    std::ofstream out(p);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    return out;
}

void write_states(const fs::path& dir, const Trajectory& traj)
{
    fs::create_directories(dir);
    for (std::size_t j = 0; j < traj.states.size(); ++j) {
        write_field(dir / indexed("y", static_cast<int>(j)), traj.grid, traj.states[j]);
    }
}

void write_controls(const fs::path& dir, const Grid& grid, const ControlSequence& u)
{
    fs::create_directories(dir);
    for (std::size_t j = 0; j < u.size(); ++j) {
        write_field(dir / indexed("u", static_cast<int>(j + 1)), grid, u[j]);
    }
}

const char* flag(bool b)
{
    return b ? "true" : "false";
}

void write_manifest(const fs::path& dir, const std::string& command, const RunConfig& cfg, double tau)
{
    const Potential pot = cfg.make_potential();
    const AnisotropyConstants c = estimate_constants(cfg.make_anisotropy(), 400, 10.0);
    const TauRegime regime = tau_regime(tau, pot.semiconvexity());
    char hash[32];
    std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(cfg.hash));
    std::ofstream out = open_out(dir / "manifest.txt");
    out << "command=" << command << '\n'
        << "config_hash=" << hash << '\n'
        << "seed=" << cfg.seed << '\n'
        << "C_psi=" << format_double(pot.semiconvexity()) << '\n'
        << "C_A_hat=" << format_double(c.monotonicity) << '\n'
        << "C_bar_A_hat=" << format_double(c.growth) << '\n'
        << "tau_max=" << format_double(tau) << '\n'
        << "tau_lt_inv_C_psi=" << flag(regime.unique) << '\n'
        << "tau_le_lipschitz_bound=" << flag(regime.lipschitz) << '\n'
        << "tau_le_energy_bound=" << flag(regime.energy_stable) << '\n';
}

void warn_regime(std::ostream& err, double tau, double c_psi)
{
    if (!tau_regime(tau, c_psi).lipschitz) {
        err << "warning: tau = " << format_double(tau) << " exceeds 1/(1+2 C_psi) = "
            << format_double(1.0 / (1.0 + 2.0 * c_psi)) << "; the Lipschitz estimate does not apply\n";
    }
}

/// Loads referenced fields, reporting failures as configuration errors.
template <typename F>
auto config_stage(const std::string& key, F&& f) -> decltype(f())
{
    try {
        return f();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(key, e.what());
    }
}

StateStudySetup state_setup(const RunConfig& cfg, int master_steps)
{
    const Grid grid = cfg.make_grid();
    Field y0 = config_stage("initial", [&] { return cfg.make_initial(grid); });
    ControlSequence u;
    if (cfg.control.kind != ControlSpec::Kind::Zero) {
        u = config_stage("control", [&] { return cfg.make_control(grid, master_steps); });
    }
    return {grid, cfg.make_anisotropy(), cfg.make_potential(), std::move(y0), cfg.final_time, std::move(u), cfg.solver};
}

Target build_target(const RunConfig& cfg, const Grid& grid, const Field& y0, int steps_for_files)
{
    const auto& spec = cfg.problem;
    if (spec.target_source == ProblemSpec::TargetSource::File) {
        return config_stage("problem", [&]() -> Target {
            if (spec.target_kind == ProblemSpec::TargetKind::FinalTime) {
                return FinalTimeTarget{read_field(spec.target_file, grid)};
            }
            DistributedTarget dt;
            for (int j = 1; j <= steps_for_files; ++j) dt.states.push_back(read_field(spec.target_dir / indexed("yq", j), grid));
            return dt;
        });
    }
    // Reference run driven by the handcrafted control.
    const TimePartition partition = TimePartition::uniform(cfg.final_time, spec.reference_steps);
    const Trajectory ref = solve_trajectory(grid, cfg.make_anisotropy(), cfg.make_potential(), y0,
                                            handcrafted_control(grid, spec.reference_steps, spec.reference_amplitude),
                                            partition, cfg.solver);
    if (spec.target_kind == ProblemSpec::TargetKind::FinalTime) return FinalTimeTarget{ref.states.back()};
    return DistributedTarget{{ref.states.begin() + 1, ref.states.end()}};
}

int cmd_simulate(const RunConfig& cfg, const fs::path& out, std::ostream& log, std::ostream& err)
{
    const TimePartition partition = cfg.make_partition();
    const StateStudySetup s = state_setup(cfg, partition.steps());
    warn_regime(err, partition.max_tau(), s.pot.semiconvexity());
    const ControlSequence u = s.master_control.empty() ? zero_control(s.grid, partition.steps()) : s.master_control;
    write_manifest(out, "simulate", cfg, partition.max_tau());
    const Trajectory traj = solve_trajectory(s.grid, s.aniso, s.pot, s.y0, u, partition, s.solver);
    write_states(out / "states", traj);
    std::ofstream csv = open_out(out / "diagnostics.csv");
    write_diagnostics_csv(csv, traj, s.aniso, s.pot);
    log << "simulate: " << partition.steps() << " steps, final energy "
        << format_double(energy(s.grid, s.aniso, s.pot, traj.states.back())) << '\n';
    return kExitOk;
}

int cmd_verify_energy(const RunConfig& cfg, const fs::path& out, std::ostream& log, std::ostream& err)
{
    const TimePartition partition = cfg.make_partition();
    const StateStudySetup s = state_setup(cfg, partition.steps());
    if (cfg.control.kind != ControlSpec::Kind::Zero) {
        err << "warning: verify-energy ignores the configured control and runs with u = 0\n";
    }
    write_manifest(out, "verify-energy", cfg, partition.max_tau());
    const Trajectory traj =
        solve_trajectory(s.grid, s.aniso, s.pot, s.y0, zero_control(s.grid, partition.steps()), partition, s.solver);
    const EnergyReport rep = check_energy_stability(traj, s.aniso, s.pot, 10.0 * cfg.solver.newton_tol);
    write_states(out / "states", traj);
    {
        std::ofstream csv = open_out(out / "diagnostics.csv");
        write_diagnostics_csv(csv, traj, s.aniso, s.pot);
    }
    std::ofstream summary = open_out(out / "summary.txt");
    summary << "check: energy stability (u = 0)\n"
            << "tau_max: " << format_double(rep.max_tau) << '\n'
            << "tau_le_2_over_C_psi: " << flag(rep.tau_in_stable_regime) << '\n'
            << "tolerance: " << format_double(rep.tolerance) << '\n'
            << "E_0: " << format_double(rep.energies.front()) << '\n'
            << "E_N: " << format_double(rep.energies.back()) << '\n';
    if (!rep.pass) summary << "first violation at j = " << rep.first_violation << '\n';
    summary << (rep.pass ? "PASS" : "FAIL") << '\n';
    log << "verify-energy: " << (rep.pass ? "PASS" : "FAIL") << '\n';
    return rep.pass ? kExitOk : kExitFailure;
}

int cmd_optimize(const RunConfig& cfg, const fs::path& out, std::ostream& log, std::ostream& err)
{
    const TimePartition partition = cfg.make_partition();
    const StateStudySetup s = state_setup(cfg, partition.steps());
    warn_regime(err, partition.max_tau(), s.pot.semiconvexity());
    Target target = build_target(cfg, s.grid, s.y0, partition.steps());
    if (auto* dt = std::get_if<DistributedTarget>(&target);
        dt && static_cast<int>(dt->states.size()) != partition.steps()) {
        const int m = static_cast<int>(dt->states.size());
        const int n = partition.steps();
        if (!cfg.breakpoints.empty() || (m % n != 0 && n % m != 0)) {
            throw ConfigError("problem.reference_steps", "reference target does not nest with the run partition");
        }
        dt->states = m % n == 0 ? coarsen_control(dt->states, n) : prolong_control(dt->states, n);
    }
    ControlProblem problem{s.grid, partition, s.y0, std::move(target), cfg.problem.lambda, s.aniso, s.pot, s.solver};
    config_stage("problem", [&] { problem.validate(); return 0; });
    const ControlSequence u_init =
        s.master_control.empty() ? zero_control(s.grid, partition.steps()) : s.master_control;
    write_manifest(out, "optimize", cfg, partition.max_tau());
    const OptimizeResult res = optimize(problem, u_init, cfg.optimizer);
    write_controls(out / "controls", s.grid, res.control);
    write_states(out / "states", res.trajectory);
    {
        std::ofstream csv = open_out(out / "history.csv");
        write_history_csv(csv, res.report);
    }
    {
        std::ofstream csv = open_out(out / "diagnostics.csv");
        write_diagnostics_csv(csv, res.trajectory, s.aniso, s.pot);
    }
    log << "optimize: " << res.report.iterations << " iterations, J = " << format_double(res.report.costs.back())
        << ", gradient norm " << format_double(res.report.grad_norms.back()) << " (" << res.report.message << ")\n";
    return res.report.converged ? kExitOk : kExitFailure;
}

int finish_study(const StudyReport& rep, const fs::path& out, std::ostream& log)
{
    {
        std::ofstream csv = open_out(out / "study.csv");
        write_study_csv(csv, rep);
    }
    std::ofstream summary = open_out(out / "summary.txt");
    write_study_summary(summary, rep);
    write_study_summary(log, rep);
    return rep.pass ? kExitOk : kExitFailure;
}

int cmd_state_study(const std::string& command, const RunConfig& cfg, const fs::path& out, std::ostream& log)
{
    const int base = cfg.study.base_steps;
    const int levels = cfg.study.levels;
    const int finest = base << (command == "study-tau" ? levels : levels - 1);
    const StateStudySetup s = state_setup(cfg, finest);
    const double coarse_tau = cfg.final_time / base;
    if (cfg.solver.enforce_uniqueness && !tau_regime(coarse_tau, s.pot.semiconvexity()).unique) {
        throw ConfigError("study.base_N", "coarsest tau = " + format_double(coarse_tau)
                                              + " violates the uniqueness step-size rule tau < 1/C_psi");
    }
    write_manifest(out, command, cfg, coarse_tau);
    StudyReport rep;
    if (command == "study-tau") {
        rep = tau_convergence_study(s, base, levels, {cfg.study.rate_min, cfg.study.rate_max});
    } else if (command == "study-bounds") {
        rep = uniform_bound_study(s, base, levels, cfg.study.ratio_window);
    } else {
        const auto pairs = random_perturbation_pairs(s, cfg.study.pairs, cfg.study.amplitude, finest, cfg.seed);
        rep = lipschitz_study(s, pairs, base, levels, cfg.study.growth_window);
    }
    return finish_study(rep, out, log);
}

int cmd_study_control(const RunConfig& cfg, const fs::path& out, std::ostream& log)
{
    const int base = cfg.study.base_steps;
    const int levels = cfg.study.levels;
    const int finest = base << (levels - 1);
    const StateStudySetup s = state_setup(cfg, finest);
    const double coarse_tau = cfg.final_time / base;
    if (cfg.solver.enforce_uniqueness && !tau_regime(coarse_tau, s.pot.semiconvexity()).unique) {
        throw ConfigError("study.base_N", "coarsest tau = " + format_double(coarse_tau)
                                              + " violates the uniqueness step-size rule tau < 1/C_psi");
    }
    ControlStudySetup cs{s.grid,           s.aniso, s.pot, s.y0, cfg.final_time, cfg.problem.lambda,
                         build_target(cfg, s.grid, s.y0, finest), cfg.solver, cfg.optimizer};
    write_manifest(out, "study-control", cfg, coarse_tau);
    return finish_study(control_convergence_study(cs, base, levels), out, log);
}

}  // namespace

const std::vector<std::string>& commands()
{
    static const std::vector<std::string> names = {"simulate",     "optimize",        "verify-energy", "study-tau",
                                                   "study-bounds", "study-lipschitz", "study-control"};
    return names;
}

int run(const Request& request, std::ostream& log, std::ostream& err)
{
    try {
        const auto& names = commands();
        if (std::find(names.begin(), names.end(), request.command) == names.end()) {
            throw ConfigError("", "unknown command '" + request.command + "'");
        }
        std::vector<std::string> overrides = request.overrides;
        if (request.out) overrides.push_back("output.dir=" + request.out->string());
        if (request.seed) overrides.push_back("seed=" + std::to_string(*request.seed));
        const RunConfig cfg = load_config(request.config, overrides);
        const fs::path out = cfg.output_dir;
        fs::create_directories(out);

        const std::string& c = request.command;
        if (c == "simulate") return cmd_simulate(cfg, out, log, err);
        if (c == "verify-energy") return cmd_verify_energy(cfg, out, log, err);
        if (c == "optimize") return cmd_optimize(cfg, out, log, err);
        if (c == "study-control") return cmd_study_control(cfg, out, log);
        return cmd_state_study(c, cfg, out, log);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kExitConfigError;
    } catch (const SolverError& e) {
        err << "solver failure" << (e.step() > 0 ? " at step " + std::to_string(e.step()) : std::string()) << ": "
            << e.what() << '\n';
        return kExitFailure;
    } catch (const std::exception& e) {
        err << "failure: " << e.what() << '\n';
        return kExitFailure;
    }
}

}  // namespace anisoflow::cli
