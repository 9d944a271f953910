#include "anisoflow/initializers.hpp"
#include "anisoflow/studies.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace anisoflow;

namespace {

Field tanh_profile(const Grid& g)
{
    SpaceVector c(1);
    c << 0.5 * g.lengths()[0];
    return tanh_circle_field(g, c, 0.25 * g.lengths()[0], 1.0);
}

StateStudySetup smooth_setup(Potential pot)
{
    const Grid g = build_grid(1, {33}, {8.0});
    return {g, Anisotropy::isotropic(1), std::move(pot), tanh_profile(g), 1.0, {}, {}};
}

StateStudySetup stationary_setup()
{
    const Grid g = build_grid(1, {17}, {1.0});
    return {g, Anisotropy::isotropic(1), Potential::double_well(), constant_field(g, 1.0), 1.0, {}, {}};
}

}  // namespace

TEST(ControlTransfer, CoarsenAveragesAndProlongInjects)
{
    const Grid g = build_grid(1, {3}, {1.0});
    ControlSequence fine;
    for (int j = 0; j < 4; ++j) fine.push_back(constant_field(g, j));
    const ControlSequence coarse = coarsen_control(fine, 2);
    ASSERT_EQ(coarse.size(), 2u);
    EXPECT_DOUBLE_EQ(coarse[0][0], 0.5);
    EXPECT_DOUBLE_EQ(coarse[1][2], 2.5);
    const ControlSequence back = prolong_control(coarse, 4);
    ASSERT_EQ(back.size(), 4u);
    EXPECT_DOUBLE_EQ(back[1][0], 0.5);
    EXPECT_DOUBLE_EQ(back[2][0], 2.5);
    // Averaging of an injected control is the identity.
    const ControlSequence again = coarsen_control(back, 2);
    for (int j = 0; j < 2; ++j) EXPECT_EQ(again[j], coarse[j]);
    EXPECT_THROW(coarsen_control(fine, 3), StudyError);
}

TEST(RateFits, RecoverSyntheticExponents)
{
    const std::vector<double> taus = {1.0 / 16, 1.0 / 32, 1.0 / 64, 1.0 / 128};
    std::vector<double> plain, shifted;
    const double ref = 1.0 / 256;
    for (double t : taus) {
        plain.push_back(3 * t * t);
        shifted.push_back(0.7 * (t - ref));
    }
    EXPECT_NEAR(loglog_slope(taus, plain), 2.0, 1e-12);
    EXPECT_NEAR(reference_corrected_rate(taus, shifted, ref), 1.0, 1e-6);
    EXPECT_GT(loglog_slope(taus, shifted), 1.05);
}

TEST(TauConvergence, StationaryDataHasNoRate)
{
    const StudyReport r = tau_convergence_study(stationary_setup(), 4, 3);
    EXPECT_TRUE(r.pass);
    EXPECT_FALSE(r.fitted_rate.has_value());
    for (const StudyRow& row : r.rows) EXPECT_LT(row.metrics[0], 1e-10);
    bool flagged = false;
    for (const auto& n : r.notes) flagged |= n.find("rate undefined") != std::string::npos;
    EXPECT_TRUE(flagged);
}

TEST(TauConvergence, LinearProblemIsFirstOrder)
{
    const StudyReport r = tau_convergence_study(smooth_setup(Potential::zero()), 8, 3);
    ASSERT_TRUE(r.fitted_rate.has_value());
    EXPECT_GE(*r.fitted_rate, 0.9);
    EXPECT_LE(*r.fitted_rate, 1.1);
    for (std::size_t k = 1; k < r.rows.size(); ++k) EXPECT_LT(r.rows[k].metrics[0], r.rows[k - 1].metrics[0]);
    EXPECT_TRUE(r.pass);
    EXPECT_THROW(tau_convergence_study(smooth_setup(Potential::zero()), 8, 2), StudyError);
}

TEST(UniformBounds, StationaryMetricsAreConstant)
{
    const StudyReport r = uniform_bound_study(stationary_setup(), 4, 3);
    EXPECT_TRUE(r.pass);
    for (std::size_t m = 0; m < r.metric_names.size(); ++m)
        for (const StudyRow& row : r.rows) EXPECT_NEAR(row.metrics[m], r.rows.front().metrics[m], 1e-10);
}

TEST(UniformBounds, DoubleWellMetricsStayBounded)
{
    const StudyReport r = uniform_bound_study(smooth_setup(Potential::double_well()), 8, 3);
    EXPECT_TRUE(r.pass);
    ASSERT_EQ(r.metric_names.size(), 3u);
    for (std::size_t k = 1; k < r.rows.size(); ++k)
        for (std::size_t m = 0; m < 3; ++m) {
            const double ratio = r.rows[k].metrics[m] / r.rows[k - 1].metrics[m];
            EXPECT_LT(ratio, 1.5);
            EXPECT_GT(ratio, 1 / 1.5);
        }
}

TEST(Lipschitz, ConstantPerturbationOfLinearProblem)
{
    const StateStudySetup s = smooth_setup(Potential::zero());
    PerturbationPair pair{s.y0, s.y0 + constant_field(s.grid, 0.01), {}, {}};
    for (int n : {4, 8, 16}) {
        const auto ratio = lipschitz_ratio(s, pair, TimePartition::uniform(1.0, n));
        ASSERT_TRUE(ratio.has_value());
        EXPECT_NEAR(*ratio, 1.0, 1e-9);
    }
}

TEST(Lipschitz, IdenticalPairsAreSkipped)
{
    const StateStudySetup s = smooth_setup(Potential::double_well());
    PerturbationPair same{s.y0, s.y0, {}, {}};
    EXPECT_FALSE(lipschitz_ratio(s, same, TimePartition::uniform(1.0, 4)).has_value());
    const StudyReport r = lipschitz_study(s, {same}, 4, 3);
    EXPECT_FALSE(r.pass);
}

TEST(Lipschitz, ScalingInvarianceForLinearProblem)
{
    const StateStudySetup s = smooth_setup(Potential::zero());
    const auto pairs = random_perturbation_pairs(s, 3, 0.1, 16, 77);
    const TimePartition part = TimePartition::uniform(1.0, 8);
    for (const PerturbationPair& p : pairs) {
        const double base = *lipschitz_ratio(s, p, part);
        for (double scale : {1e-2, 3.0}) {
            PerturbationPair q = p;
            q.y0_second = p.y0_first + scale * (p.y0_second - p.y0_first);
            const ControlSequence& c1 = p.control_first.empty() ? ControlSequence(16, constant_field(s.grid, 0.0))
                                                                 : p.control_first;
            q.control_second = c1;
            for (std::size_t j = 0; j < c1.size(); ++j) q.control_second[j] += scale * (p.control_second[j] - c1[j]);
            q.control_first = c1;
            EXPECT_NEAR(*lipschitz_ratio(s, q, part), base, 1e-8 * base);
        }
    }
}

TEST(Lipschitz, RandomDoubleWellPairsBounded)
{
    const StateStudySetup s = smooth_setup(Potential::double_well());
    const StudyReport r = lipschitz_study(s, random_perturbation_pairs(s, 3, 0.1, 32, 5), 4, 3);
    EXPECT_TRUE(r.pass);
}

TEST(Lipschitz, RejectsStepsOutsideRegime)
{
    const StateStudySetup s = smooth_setup(Potential::double_well());
    EXPECT_THROW(lipschitz_study(s, random_perturbation_pairs(s, 1, 0.1, 8, 5), 2, 3), StudyError);
}

TEST(Lipschitz, PerturbationPairsAreDeterministic)
{
    const StateStudySetup s = smooth_setup(Potential::double_well());
    const auto a = random_perturbation_pairs(s, 2, 0.1, 8, 42);
    const auto b = random_perturbation_pairs(s, 2, 0.1, 8, 42);
    for (std::size_t k = 0; k < a.size(); ++k) {
        EXPECT_EQ(a[k].y0_second, b[k].y0_second);
        for (std::size_t j = 0; j < a[k].control_second.size(); ++j)
            EXPECT_EQ(a[k].control_second[j], b[k].control_second[j]);
    }
}

TEST(ControlConvergence, DistributedTargetIsCoarsenedAndTrivialProblemIsExact)
{
    const StateStudySetup st = smooth_setup(Potential::double_well());
    const Trajectory free = solve_trajectory(st.grid, st.aniso, st.pot, st.y0,
                                             ControlSequence(64, constant_field(st.grid, 0.0)),
                                             TimePartition::uniform(1.0, 64), {});
    ControlStudySetup cs{st.grid, st.aniso, st.pot, st.y0, 1.0, 1e-3,
                         DistributedTarget{std::vector<Field>(free.states.begin() + 1, free.states.end())}, {}, {}};
    const ControlProblem p = make_control_problem(cs, 16);
    ASSERT_EQ(std::get<DistributedTarget>(p.target).states.size(), 16u);

    const Field steady = constant_field(st.grid, 1.0);
    ControlStudySetup trivial{st.grid, st.aniso, st.pot, steady, 1.0, 1e-3, FinalTimeTarget{steady}, {}, {}};
    const StudyReport r = control_convergence_study(trivial, 2, 3);
    EXPECT_TRUE(r.pass);
    for (const StudyRow& row : r.rows) EXPECT_EQ(row.metrics[0], 0.0);
}

TEST(ControlConvergence, TrackingProblemDifferencesDecrease)
{
    const Grid g = build_grid(1, {33}, {8.0});
    const Field y0 = tanh_profile(g);
    const Trajectory ref = solve_trajectory(g, Anisotropy::isotropic(1), Potential::double_well(), y0,
                                            handcrafted_control(g, 128, 1.0), TimePartition::uniform(1.0, 128), {});
    ControlStudySetup cs{g, Anisotropy::isotropic(1), Potential::double_well(), y0, 1.0, 1e-3,
                         FinalTimeTarget{ref.states.back()}, {}, {}};
    cs.optimizer.method = OptimizeOptions::Method::Lbfgs;
    cs.optimizer.max_iters = 500;
    const StudyReport r = control_convergence_study(cs, 4, 3);
    EXPECT_TRUE(r.pass);
    const auto it = std::find(r.metric_names.begin(), r.metric_names.end(), "cauchy_diff");
    ASSERT_NE(it, r.metric_names.end());
    const std::size_t m = static_cast<std::size_t>(it - r.metric_names.begin());
    // Row k holds ||u*_k - u*_{k+1}||; the finest level has none.
    EXPECT_LT(r.rows[1].metrics[m], r.rows[0].metrics[m]);
    EXPECT_TRUE(std::isnan(r.rows[2].metrics[m]));
}

TEST(StudyOutput, CsvAndSummary)
{
    const StudyReport r = uniform_bound_study(stationary_setup(), 4, 3);
    std::ostringstream csv, sum;
    write_study_csv(csv, r);
    write_study_summary(sum, r);
    const std::string header = csv.str().substr(0, csv.str().find('\n'));
    EXPECT_EQ(header.rfind("level,N,tau,", 0), 0u);
    EXPECT_EQ(header.substr(header.size() - 5), ",rate");
    const std::string s = sum.str();
    EXPECT_EQ(s.substr(s.rfind('\n', s.size() - 2) + 1), "PASS\n");
}
