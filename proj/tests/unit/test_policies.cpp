/*
 Copyright 2026 The stochplan Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

#include "stochplan/errors.hpp"
#include "stochplan/policies.hpp"
#include "stochplan/presets.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

using namespace stochplan;

namespace
{
    PolicyConfig policy(PolicyKind kind, double J_thresh = 0.02, int H_c = 0)
    {
        PolicyConfig c;
        c.kind = kind;
        c.J_thresh = J_thresh;
        c.H_c = H_c;
        return c;
    }

    void expect_same_rollout(const RolloutRecord &a, const RolloutRecord &b)
    {
        ASSERT_EQ(a.states.size(), b.states.size());
        for (std::size_t t = 0; t < a.states.size(); ++t)
            ASSERT_EQ(a.states[t], b.states[t]) << "t=" << t;
        for (std::size_t t = 0; t < a.controls.size(); ++t)
            ASSERT_EQ(a.controls[t], b.controls[t]) << "t=" << t;
        EXPECT_EQ(a.cost, b.cost);
        ASSERT_EQ(a.replans.size(), b.replans.size());
        for (std::size_t k = 0; k < a.replans.size(); ++k)
            EXPECT_EQ(a.replans[k].t, b.replans[k].t);
    }

    class CarPolicies : public ::testing::Test
    {
    protected:
        static void SetUpTestSuite()
        {
            scenario_ = new Scenario(car_single().scenario());
            plan_ = new NominalPlan(initial_plan(*scenario_, GainSource::SurrogateLqr));
        }
        static void TearDownTestSuite()
        {
            delete plan_;
            delete scenario_;
        }
        static ExecutionOptions options()
        {
            ExecutionOptions o;
            o.initial = plan_;
            return o;
        }
        static RolloutRecord run(const PolicyConfig &cfg, double eps, std::uint64_t seed)
        {
            return execute_policy(*scenario_, cfg, eps, NoiseStream(seed), options());
        }
        static Scenario *scenario_;
        static NominalPlan *plan_;
    };

    Scenario *CarPolicies::scenario_ = nullptr;
    NominalPlan *CarPolicies::plan_ = nullptr;
} // namespace

TEST_F(CarPolicies, TlqrControlAtNominalIsNominal)
{
    for (int t : {0, 10, 34})
        EXPECT_EQ(tlqr_control(*plan_, t, plan_->xbar[t], scenario_->model), plan_->ubar[t]);
}

TEST_F(CarPolicies, TlqrControlIsClampedToBox)
{
    const int t = 5;
    // Push the deviation along the direction that raises the speed command.
    const Vector dir = -plan_->gains.L[t].row(0).transpose();
    const State x = plan_->xbar[t] + 1e3 * dir / dir.norm();
    const Control u = tlqr_control(*plan_, t, x, scenario_->model);
    EXPECT_EQ(u(0), scenario_->model.u_max(0));
    EXPECT_LE(std::abs(u(1)), scenario_->model.u_max(1));
}

TEST_F(CarPolicies, TlqrControlWithZeroGainIsOpenLoop)
{
    NominalPlan p = *plan_;
    for (auto &L : p.gains.L)
        L.setZero();
    State x = p.xbar[3];
    x(0) += 0.7;
    x(2) -= 0.3;
    EXPECT_EQ(tlqr_control(p, 3, x, scenario_->model), p.ubar[3]);
}

TEST_F(CarPolicies, PlanIsConsistent)
{
    const auto xs = rollout_nominal(scenario_->model, scenario_->x0, plan_->ubar);
    ASSERT_EQ(xs.size(), plan_->xbar.size());
    for (std::size_t t = 0; t < xs.size(); ++t)
        EXPECT_EQ(xs[t], plan_->xbar[t]);
    EXPECT_EQ(plan_->gains.L.size(), plan_->ubar.size());
    ASSERT_EQ(plan_->prefix_costs.size(), plan_->ubar.size());
    EXPECT_LT(plan_->prefix_costs.back(), plan_->cost);
}

TEST_F(CarPolicies, ZeroNoiseIsNominal)
{
    for (auto kind : {PolicyKind::TLQR, PolicyKind::TLQR2})
    {
        const RolloutRecord r = run(policy(kind), 0.0, 3);
        EXPECT_EQ(r.replan_count(), 0);
        EXPECT_NEAR(r.ratio, 1.0, 1e-12);
        EXPECT_EQ(r.step_ms.size(), 35u);
    }
    const RolloutRecord m = run(policy(PolicyKind::MPC), 0.0, 3);
    EXPECT_NEAR(m.ratio, 1.0, 1e-4);
    EXPECT_EQ(m.replan_count(), 34);
    const RolloutRecord sh = run(policy(PolicyKind::MPCSH, 0.02, 35), 0.0, 3);
    EXPECT_NEAR(sh.ratio, 1.0, 1e-4);
}

TEST_F(CarPolicies, InfiniteThresholdIsTlqr)
{
    for (std::uint64_t seed : {0u, 1u, 2u})
        expect_same_rollout(run(policy(PolicyKind::TLQR2, kNoReplan), 0.4, seed),
                            run(policy(PolicyKind::TLQR), 0.4, seed));
}

TEST_F(CarPolicies, FullControlHorizonIsMpc)
{
    for (std::uint64_t seed : {0u, 1u})
        expect_same_rollout(run(policy(PolicyKind::MPCSH, 0.02, 35), 0.4, seed),
                            run(policy(PolicyKind::MPC), 0.4, seed));
}

TEST_F(CarPolicies, ZeroThresholdFiresOnEveryPositiveDeviation)
{
    for (std::uint64_t seed : {0u, 4u})
    {
        const RolloutRecord r = run(policy(PolicyKind::TLQR2, 0.0), 0.4, seed);
        EXPECT_GT(r.replan_count(), 0);
        EXPECT_LT(r.replan_count(), 35);
        for (const auto &e : r.replans)
            EXPECT_GT(e.trigger, 0.0);
    }
}

TEST_F(CarPolicies, ReplanEventsExceedThreshold)
{
    const RolloutRecord r = run(policy(PolicyKind::TLQR2, 0.02), 0.6, 7);
    int last = 0;
    for (const auto &e : r.replans)
    {
        EXPECT_GT(e.trigger, 0.02);
        EXPECT_GT(e.t, last);
        EXPECT_LT(e.t, 35);
        last = e.t;
    }
}

TEST_F(CarPolicies, ReplanCountMonotoneInThreshold)
{
    for (std::uint64_t seed = 0; seed < 3; ++seed)
    {
        int prev = std::numeric_limits<int>::max();
        for (double th : {0.0, 0.01, 0.02, 0.05, 0.1})
        {
            const int n = run(policy(PolicyKind::TLQR2, th), 0.4, seed).replan_count();
            EXPECT_LE(n, prev) << "seed " << seed << " J_thresh " << th;
            prev = n;
        }
    }
}

TEST_F(CarPolicies, ControlsWithinBox)
{
    const ModelSpec &m = scenario_->model;
    for (auto kind : {PolicyKind::TLQR, PolicyKind::TLQR2, PolicyKind::MPC})
    {
        const RolloutRecord r = run(policy(kind), 0.9, 11);
        for (const auto &u : r.controls)
            for (int i = 0; i < m.n_u; ++i)
            {
                EXPECT_GE(u(i), m.u_min(i));
                EXPECT_LE(u(i), m.u_max(i));
            }
    }
}

TEST_F(CarPolicies, Deterministic)
{
    for (auto kind : {PolicyKind::TLQR2, PolicyKind::MPCSH})
    {
        PolicyConfig cfg = policy(kind, 0.02, 7);
        const RolloutRecord a = run(cfg, 0.5, 21);
        const RolloutRecord b = run(cfg, 0.5, 21);
        expect_same_rollout(a, b);
        EXPECT_EQ(a.ratio, b.ratio);
    }
}

TEST_F(CarPolicies, RecordInvariants)
{
    const RolloutRecord r = run(policy(PolicyKind::TLQR2), 0.4, 2);
    EXPECT_EQ(r.states.size(), 36u);
    EXPECT_EQ(r.controls.size(), 35u);
    EXPECT_EQ(r.step_ms.size(), 35u);
    EXPECT_GE(r.cost, 0.0);
    EXPECT_EQ(r.nominal_cost, plan_->cost);
    EXPECT_NEAR(r.ratio, r.cost / r.nominal_cost, 1e-15);
    EXPECT_NEAR(r.terminal_error, (r.states.back() - scenario_->goal).norm(), 1e-12);
    EXPECT_NEAR(r.cost, trajectory_cost(car_single().cost, scenario_->model, r.states, r.controls), 1e-9 * r.cost);
}

TEST_F(CarPolicies, ShortHorizonIsWorseAtZeroNoise)
{
    const double full = run(policy(PolicyKind::MPC), 0.0, 0).cost;
    for (int H : {3, 7, 14})
        EXPECT_GE(run(policy(PolicyKind::MPCSH, 0.02, H), 0.0, 0).cost, full * (1 - 1e-6)) << "H_c " << H;
}

TEST(PolicyConfig, Validation)
{
    EXPECT_NO_THROW(policy(PolicyKind::MPCSH, 0.02, 7).validate(35));
    EXPECT_THROW(policy(PolicyKind::MPCSH, 0.02, 36).validate(35), ContractViolation);
    EXPECT_THROW(policy(PolicyKind::TLQR2, -0.1).validate(35), ContractViolation);
    EXPECT_EQ(parse_policy_kind("T-LQR2"), PolicyKind::TLQR2);
    EXPECT_EQ(parse_policy_kind("MPC-SH"), PolicyKind::MPCSH);
    EXPECT_THROW(parse_policy_kind("LQG"), ContractViolation);
    EXPECT_EQ(parse_gain_source("tpfc"), GainSource::Tpfc);
    EXPECT_EQ(policy(PolicyKind::TLQR, 0.5).threshold(), kNoReplan);
}

TEST(Policies, TpfcGainSourceRuns)
{
    const Scenario sc = car_single().scenario();
    PolicyConfig cfg = policy(PolicyKind::TLQR2);
    cfg.gain_source = GainSource::Tpfc;
    const RolloutRecord r = execute_policy(sc, cfg, 0.0, NoiseStream(0));
    EXPECT_NEAR(r.ratio, 1.0, 1e-12);
    const RolloutRecord n = execute_policy(sc, cfg, 0.3, NoiseStream(0));
    EXPECT_FALSE(n.diverged);
    EXPECT_LT(n.ratio, 2.0);
}

TEST(MultiAgent, SingleAgentReducesToSolveOcp)
{
    const SingleAgentPreset p = car_single();
    MultiAgentProblem mp;
    mp.models = {p.model};
    mp.costs = {p.cost};
    mp.starts = {p.x0};
    const Scenario joint = mp.scenario("one", p.horizon);
    const auto plans = plan_joint(joint);
    ASSERT_EQ(plans.size(), 1u);
    const NominalPlan single = initial_plan(p.scenario(), GainSource::SurrogateLqr);
    ASSERT_EQ(plans[0].ubar.size(), single.ubar.size());
    for (std::size_t t = 0; t < single.ubar.size(); ++t)
    {
        EXPECT_LE((plans[0].ubar[t] - single.ubar[t]).cwiseAbs().maxCoeff(), 1e-9);
        EXPECT_LE((plans[0].gains.L[t] - single.gains.L[t]).cwiseAbs().maxCoeff(), 1e-9);
    }
}

TEST(MultiAgent, FarApartAgentsDecouple)
{
    // Convex agents (planar double integrators) so each solve has a unique
    // optimum; the collision term vanishes at 100 m.
    Matrix A = Matrix::Identity(4, 4);
    A(0, 2) = A(1, 3) = 0.1;
    Matrix B = Matrix::Zero(4, 2);
    B(2, 0) = B(3, 1) = 0.1;
    const ModelSpec m = oracle::linear_model(A, B, 50.0);
    CostSpec near;
    near.Wx = Matrix::Identity(4, 4);
    near.Wu = 0.1 * Matrix::Identity(2, 2);
    near.Wxf = 100.0 * Matrix::Identity(4, 4);
    near.goal = State::Zero(4);
    near.goal << 3.0, 2.0, 0.0, 0.0;
    CostSpec far = near;
    far.goal(0) += 100.0;
    far.goal(1) = -1.0;
    MultiAgentProblem mp;
    mp.models = {m, m};
    mp.costs = {near, far};
    mp.starts = {State::Zero(4), State::Zero(4)};
    mp.starts[1](0) = 100.0;
    const int T = 20;
    const auto plans = plan_joint(mp.scenario("far", T));
    ASSERT_EQ(plans.size(), 2u);
    const NominalPlan a = initial_plan(make_scenario("a", m, near, mp.starts[0], T), GainSource::SurrogateLqr);
    const NominalPlan b = initial_plan(make_scenario("b", m, far, mp.starts[1], T), GainSource::SurrogateLqr);
    for (std::size_t t = 0; t < a.ubar.size(); ++t)
    {
        EXPECT_LE((plans[0].ubar[t] - a.ubar[t]).cwiseAbs().maxCoeff(), 1e-6) << "t " << t;
        EXPECT_LE((plans[1].ubar[t] - b.ubar[t]).cwiseAbs().maxCoeff(), 1e-6) << "t " << t;
        EXPECT_LE((plans[1].gains.L[t] - b.gains.L[t]).cwiseAbs().maxCoeff(), 1e-6) << "t " << t;
    }
}

class ThreeAgents : public ::testing::Test
{
protected:
    static void SetUpTestSuite()
    {
        preset_ = new MultiAgentPreset(car_multi3());
        joint_ = new Scenario(preset_->scenario());
        plan_ = new NominalPlan(initial_plan(*joint_, GainSource::SurrogateLqr));
    }
    static void TearDownTestSuite()
    {
        delete plan_;
        delete joint_;
        delete preset_;
    }
    static MultiAgentRecord run(PolicyKind kind, double eps, std::uint64_t seed)
    {
        ExecutionOptions o;
        o.initial = plan_;
        return execute_multi_agent(*joint_, preset_->problem.costs, policy(kind), eps, NoiseStream(seed), o);
    }
    static MultiAgentPreset *preset_;
    static Scenario *joint_;
    static NominalPlan *plan_;
};

MultiAgentPreset *ThreeAgents::preset_ = nullptr;
Scenario *ThreeAgents::joint_ = nullptr;
NominalPlan *ThreeAgents::plan_ = nullptr;

TEST_F(ThreeAgents, NominalKeepsAgentsApart)
{
    const double r = preset_->problem.r_thresh;
    for (const auto &x : plan_->xbar)
        for (int i = 0; i < 3; ++i)
            for (int j = i + 1; j < 3; ++j)
                EXPECT_GE((x.segment<2>(4 * i) - x.segment<2>(4 * j)).norm(), r);
}

TEST_F(ThreeAgents, SplitPlanUsesDiagonalBlocks)
{
    const auto parts = split_plan(*joint_, *plan_);
    ASSERT_EQ(parts.size(), 3u);
    for (int i = 0; i < 3; ++i)
    {
        EXPECT_EQ(parts[i].xbar[5], plan_->xbar[5].segment(4 * i, 4));
        EXPECT_EQ(parts[i].gains.L[5], plan_->gains.L[5].block(2 * i, 4 * i, 2, 4));
    }
    // Decoupled design: off-diagonal gain blocks vanish.
    EXPECT_EQ(plan_->gains.L[5].block(0, 4, 2, 4).cwiseAbs().maxCoeff(), 0.0);
}

TEST_F(ThreeAgents, ZeroNoiseNeedsNoCommunication)
{
    const MultiAgentRecord r = run(PolicyKind::TLQR2, 0.0, 0);
    EXPECT_EQ(r.joint.replan_count(), 0);
    EXPECT_EQ(r.communication_events, 1);
    EXPECT_NEAR(r.joint.ratio, 1.0, 1e-12);
    EXPECT_EQ(r.agents.size(), 3u);
}

TEST_F(ThreeAgents, CommunicationIsOnePlusReplans)
{
    for (std::uint64_t seed : {0u, 1u, 2u})
    {
        const MultiAgentRecord r = run(PolicyKind::TLQR2, 0.4, seed);
        EXPECT_EQ(r.communication_events, 1 + r.joint.replan_count());
        for (const auto &a : r.agents)
            EXPECT_EQ(a.replan_count(), r.joint.replan_count());
    }
}

TEST_F(ThreeAgents, JointMpcSolvesEveryStep)
{
    const MultiAgentRecord r = run(PolicyKind::MPC, 0.4, 0);
    EXPECT_EQ(r.joint.replan_count(), 34);
    EXPECT_EQ(r.communication_events, 35);
}
