#pragma once

#include "anisoflow/control.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace anisoflow {

/// Raised when a study's preconditions fail before any solve.
class StudyError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Forward-problem data shared by every level of a tau ladder. The master
/// control lives on a uniform partition of master_control.size() steps and is
/// coarsened to each level by interval averaging; empty means u = 0.
struct StateStudySetup {
    Grid grid;
    Anisotropy aniso;
    Potential pot;
    Field y0;
    double final_time = 1.0;
    ControlSequence master_control;
    StepConfig solver;
};

struct StudyRow {
    int level = 0;
    int steps = 0;
    double tau = 0.0;
    std::vector<double> metrics;
    double rate = 0.0;  ///< local rate against the previous level; NaN where undefined
};

struct StudyReport {
    std::string name;
    std::vector<std::string> metric_names;
    std::vector<StudyRow> rows;
    std::optional<double> fitted_rate;
    bool pass = false;
    std::vector<std::string> notes;
    std::vector<std::pair<std::string, double>> thresholds;
};

/// Averages a control on a uniform partition of from_steps intervals down to
/// to_steps intervals (to_steps must divide from_steps).
ControlSequence coarsen_control(const ControlSequence& fine, int to_steps);
/// Piecewise-constant injection from a uniform coarse partition to to_steps intervals.
ControlSequence prolong_control(const ControlSequence& coarse, int to_steps);

/// Least-squares fit of log e = c + p log(tau) over the given points.
double loglog_slope(const std::vector<double>& taus, const std::vector<double>& errors);

/// Least-squares fit of log e = c + log(tau^p - tau_ref^p): the exponent seen
/// when errors are measured against a numerical reference with step tau_ref.
double reference_corrected_rate(const std::vector<double>& taus, const std::vector<double>& errors,
                                 double tau_ref);

struct ConvergenceThresholds {
    double rate_min = 0.8;
    double rate_max = 1.2;
};

/// Ladder N = base_steps * 2^k (k < levels) against the reference
/// base_steps * 2^levels; error = max over coarse breakpoints of the L2
/// distance to the reference.
StudyReport tau_convergence_study(const StateStudySetup& setup, int base_steps, int levels,
                                  const ConvergenceThresholds& thresholds = {});

/// Per level: ||d_t y||_{L2(Q)}, max_j ||y_j||_{H1}, ||psi'(y)||_{L2(Q)}.
StudyReport uniform_bound_study(const StateStudySetup& setup, int base_steps, int levels,
                                double ratio_window = 1.5);

struct PerturbationPair {
    Field y0_first, y0_second;
    ControlSequence control_first, control_second;  ///< master controls, empty = zero
};

/// Ratio of the state difference to the data difference, measured in the
/// norms of the discrete Lipschitz estimate, maximized over pairs per level.
StudyReport lipschitz_study(const StateStudySetup& setup, const std::vector<PerturbationPair>& pairs,
                            int base_steps, int levels, double growth_window = 1.5);

/// Ratio for one pair on one partition; nullopt when the data difference vanishes.
std::optional<double> lipschitz_ratio(const StateStudySetup& setup, const PerturbationPair& pair,
                                      const TimePartition& partition);

struct ControlStudySetup {
    Grid grid;
    Anisotropy aniso;
    Potential pot;
    Field y0;
    double final_time = 1.0;
    double lambda = 1.0;
    /// Final-time target, or a distributed master target coarsened to each level.
    Target target;
    StepConfig solver;
    OptimizeOptions optimizer;
};

ControlProblem make_control_problem(const ControlStudySetup& setup, int steps);

/// Optimizes from u = 0 at N = base_steps * 2^k and reports the Cauchy
/// differences ||u*_tau - u*_{tau/2}||_{L2(Q)} of adjacent levels.
StudyReport control_convergence_study(const ControlStudySetup& setup, int base_steps, int levels);

/// `level, N, tau, <metrics...>, rate`
void write_study_csv(std::ostream& out, const StudyReport& report);
/// Human-readable block ending in a PASS or FAIL line.
void write_study_summary(std::ostream& out, const StudyReport& report);

}  // namespace anisoflow

namespace anisoflow {

/// Smooth random perturbation pairs: the first member is (setup.y0,
/// setup.master_control), the second adds `amplitude`-sized combinations of
/// low cosine modes in space (and time, for the control). Controls are built
/// on a uniform partition with master_steps intervals.
std::vector<PerturbationPair> random_perturbation_pairs(const StateStudySetup& setup, int count, double amplitude,
                                                        int master_steps, std::uint64_t seed);

/// a cos(pi x_1 / L_1) on every interval.
ControlSequence handcrafted_control(const Grid& grid, int steps, double amplitude);

}  // namespace anisoflow
