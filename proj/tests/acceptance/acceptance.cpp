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

// Acceptance gate. Prints one PASS/FAIL line per criterion and exits nonzero
// if any criterion fails. Thresholds are fixed here, not configurable.

#include "stochplan/feedback.hpp"
#include "stochplan/montecarlo.hpp"
#include "stochplan/presets.hpp"
#include "stochplan/trajopt.hpp"

#include "oracles.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

using namespace stochplan;

namespace
{
    constexpr double kRiccatiTol = 1e-6;
    constexpr double kRiccatiBudgetS = 1.0;
    constexpr double kLqTol = 1e-6;
    constexpr double kGradientTol = 1e-4;
    constexpr double kOcpBudgetS = 10.0;
    constexpr double kDegeneracyTol = 1e-4;
    constexpr double kDegeneracyBudgetS = 60.0;
    constexpr double kIdentityBudgetS = 600.0;
    constexpr double kSlopeLo = 1.7;
    constexpr double kSlopeHi = 2.3;
    constexpr double kMinR2 = 0.9;
    constexpr double kScalingBudgetS = 1800.0;
    constexpr double kSweepRatioGap = 0.10;
    constexpr double kSweepReplanShare = 0.5;
    constexpr double kSweepBudgetS = 1800.0;
    constexpr double kTimingTimeShare = 0.5;
    constexpr double kTimingBudgetS = 600.0;
    constexpr double kMultiRatioGap = 0.10;
    constexpr double kMultiBudgetS = 3600.0;

    constexpr double kJThresh = 0.02;

    using Clock = std::chrono::steady_clock;

    struct Outcome
    {
        bool pass = true;
        std::string detail;
    };

    class Detail
    {
    public:
        template <class T>
        Detail &operator<<(const T &v)
        {
            os_ << v;
            return *this;
        }
        std::string str() const { return os_.str(); }

    private:
        std::ostringstream os_;
    };

    int g_failures = 0;

    void criterion(const char *name, double budget_s, const std::function<Outcome()> &body)
    {
        const auto start = Clock::now();
        Outcome o;
        try
        {
            o = body();
        }
        catch (const std::exception &e)
        {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        const double secs = std::chrono::duration<double>(Clock::now() - start).count();
        bool pass = o.pass;
        if (secs >= budget_s)
        {
            pass = false;
            o.detail += " runtime over budget";
        }
        std::printf("%s %s (%.2f s, budget %.0f s) %s\n", pass ? "PASS" : "FAIL", name, secs, budget_s,
                    o.detail.c_str());
        std::fflush(stdout);
        if (!pass)
            ++g_failures;
    }

    double max_abs(const Matrix &m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

    PolicyConfig policy(PolicyKind kind, double J_thresh = kJThresh, int H_c = 0)
    {
        PolicyConfig p;
        p.kind = kind;
        p.J_thresh = J_thresh;
        p.H_c = H_c;
        return p;
    }

    CostSpec lq_cost(const Matrix &Wx, const Matrix &Wu, const Matrix &Wxf, const State &goal)
    {
        CostSpec c;
        c.Wx = Wx;
        c.Wu = Wu;
        c.Wxf = Wxf;
        c.goal = goal;
        return c;
    }

    Outcome riccati_oracle()
    {
        std::mt19937_64 rng(2024);
        double worst = 0.0;
        for (int trial = 0; trial < 50; ++trial)
        {
            const int nx = 2 + trial % 3;
            const int nu = 1 + trial % 2;
            const int T = 20;
            const LinearizedSystem lin = oracle::random_system(rng, nx, nu, T);
            LqrWeights w;
            w.Q = oracle::random_spd(rng, nx, 0.05);
            w.R = oracle::random_spd(rng, nu, 0.2);
            w.Qf = oracle::random_spd(rng, nx, 0.05);
            const GainSchedule g = lqr_gains(lin, w);
            const oracle::DpResult dp = oracle::dp_value_oracle(lin, w.Q, w.R, w.Qf);
            for (int t = 0; t <= T; ++t)
            {
                if (t < T)
                    worst = std::max(worst, max_abs(g.L[t] - dp.L[t]));
                worst = std::max(worst, max_abs(g.P[t] - dp.P[t]));
            }
        }
        return {worst <= kRiccatiTol, (Detail() << "50 systems, max |diff| = " << worst).str()};
    }

    Outcome ocp_optimality()
    {
        // Unconstrained LQ: scalar Riccati closed form and random instances
        // against the condensed least-squares solution.
        double lq_err = 0.0;
        {
            const double a = 1.0, b = 0.1, q = 2.0, r = 0.5, qf = 10.0, x0 = 3.0;
            const int T = 25;
            const ModelSpec m = oracle::linear_model(Matrix::Constant(1, 1, a), Matrix::Constant(1, 1, b));
            const QuadraticCost cost(lq_cost(Matrix::Constant(1, 1, q), Matrix::Constant(1, 1, r),
                                             Matrix::Constant(1, 1, qf), State::Zero(1)));
            const OcpSolution sol = solve_ocp({m, cost, State::Constant(1, x0), T});
            const auto ref = oracle::scalar_lqr_open_loop(a, b, q, r, qf, x0, T);
            for (int t = 0; t < T; ++t)
                lq_err = std::max(lq_err, std::abs(sol.controls[t](0) - ref[t]));
        }
        std::mt19937_64 rng(77);
        for (int trial = 0; trial < 10; ++trial)
        {
            const int nx = 2 + trial % 3, nu = 1 + trial % 2, T = 20;
            const auto lin = oracle::random_system(rng, nx, nu, 1, 1.05);
            const Matrix Wx = oracle::random_spd(rng, nx, 0.1);
            const Matrix Wu = oracle::random_spd(rng, nu, 0.5);
            const Matrix Wxf = oracle::random_spd(rng, nx, 1.0);
            const State goal = oracle::random_matrix(rng, nx, 1, 2.0);
            const State x0 = oracle::random_matrix(rng, nx, 1, 2.0);
            const ModelSpec m = oracle::linear_model(lin.A[0], lin.B[0]);
            const QuadraticCost cost(lq_cost(Wx, Wu, Wxf, goal));
            const OcpSolution sol = solve_ocp({m, cost, x0, T});
            const auto ref = oracle::condensed_lq_controls(lin.A[0], lin.B[0], Wx, Wu, Wxf, x0, goal, T);
            for (int t = 0; t < T; ++t)
                lq_err = std::max(lq_err, max_abs(sol.controls[t] - ref[t]));
        }

        // Car: the optimum sits on control and slew bounds, so stationarity is
        // measured on the Lagrangian with NNLS multipliers for the active set.
        const SingleAgentPreset car = car_single();
        const QuadraticCost cost(car.cost);
        const OcpSolution sol = solve_ocp({car.model, cost, car.x0, car.horizon});
        const auto k = oracle::kkt_check(car.model, cost, car.x0, Control::Zero(car.model.n_u), sol.controls);

        const bool pass = lq_err <= kLqTol && k.residual < kGradientTol && k.max_violation <= 1e-6 && sol.converged;
        return {pass, (Detail() << "LQ max err " << lq_err << "; car KKT residual " << k.residual
                                << " (raw gradient " << k.raw_gradient << ", " << sol.iterations << " iterations)")
                          .str()};
    }

    Outcome degeneracy()
    {
        Outcome o;
        Detail d;
        for (const SingleAgentPreset &p : {car_single(), trailers_single(), quadrotor_single()})
        {
            SweepSpec s;
            s.experiment = "degeneracy";
            s.scenario = p.scenario();
            s.policies = {policy(PolicyKind::MPC), policy(PolicyKind::MPCSH, kJThresh, p.horizon),
                          policy(PolicyKind::TLQR), policy(PolicyKind::TLQR2)};
            s.eps_grid = {0.0};
            s.seeds = 1;
            const SweepSummary sum = run_sweep(s);
            double worst = 0.0;
            int tracking_replans = 0;
            for (const RolloutRow &r : sum.rows)
            {
                worst = std::max(worst, std::abs(r.ratio - 1.0));
                if (r.policy == "TLQR" || r.policy == "TLQR2")
                    tracking_replans += r.replans;
                if (r.failed || !(std::abs(r.ratio - 1.0) <= kDegeneracyTol))
                    o.pass = false;
            }
            if (tracking_replans != 0)
                o.pass = false;
            d << p.name << ": max |ratio-1| " << worst << ", replans " << tracking_replans << "; ";
        }
        o.detail = d.str();
        return o;
    }

    bool same_trajectory(const RolloutRecord &a, const RolloutRecord &b)
    {
        if (a.states.size() != b.states.size() || a.controls.size() != b.controls.size())
            return false;
        for (std::size_t t = 0; t < a.states.size(); ++t)
            if (a.states[t] != b.states[t])
                return false;
        for (std::size_t t = 0; t < a.controls.size(); ++t)
            if (a.controls[t] != b.controls[t])
                return false;
        return a.cost == b.cost;
    }

    Outcome identities()
    {
        const SingleAgentPreset car = car_single();
        const Scenario sc = car.scenario();
        const double eps = 0.4;
        const int seeds = 20;
        const NominalPlan plan = initial_plan(sc, GainSource::SurrogateLqr);
        const ExecutionOptions opts{SolverOptions{}, &plan};
        const std::vector<double> thresholds{0.0, 0.01, 0.02, 0.05, 0.1};

        int tlqr_mismatch = 0, mpc_mismatch = 0, monotone_breaks = 0;
        std::vector<double> mean_replans(thresholds.size(), 0.0);
        for (int k = 0; k < seeds; ++k)
        {
            const NoiseStream noise(static_cast<std::uint64_t>(k));
            const auto tlqr = execute_policy(sc, policy(PolicyKind::TLQR), eps, noise, opts);
            const auto inf = execute_policy(sc, policy(PolicyKind::TLQR2, kNoReplan), eps, noise, opts);
            tlqr_mismatch += !same_trajectory(tlqr, inf) || inf.replan_count() != 0;

            const auto mpc = execute_policy(sc, policy(PolicyKind::MPC), eps, noise, opts);
            const auto sh = execute_policy(sc, policy(PolicyKind::MPCSH, kJThresh, car.horizon), eps, noise, opts);
            mpc_mismatch += !same_trajectory(mpc, sh);

            int prev = std::numeric_limits<int>::max();
            for (std::size_t i = 0; i < thresholds.size(); ++i)
            {
                const int n = execute_policy(sc, policy(PolicyKind::TLQR2, thresholds[i]), eps, noise, opts)
                                  .replan_count();
                mean_replans[i] += static_cast<double>(n) / seeds;
                monotone_breaks += n > prev;
                prev = n;
            }
        }
        Detail d;
        d << "TLQR2(inf) vs TLQR mismatches " << tlqr_mismatch << ", MPCSH(T) vs MPC mismatches " << mpc_mismatch
          << ", per-seed monotonicity breaks " << monotone_breaks << "; mean replans";
        for (std::size_t i = 0; i < thresholds.size(); ++i)
            d << ' ' << thresholds[i] << ':' << mean_replans[i];
        return {tlqr_mismatch == 0 && mpc_mismatch == 0 && monotone_breaks == 0, d.str()};
    }

    Outcome scaling()
    {
        const SingleAgentPreset car = car_single();
        const Scenario sc = car.scenario();
        const NominalPlan plan = initial_plan(sc, GainSource::SurrogateLqr);
        DecouplingSpec spec;
        spec.eps_grid = {0.05, 0.1, 0.2, 0.4};
        spec.seeds = 2000;
        const DecouplingReport rep = verify_decoupling(sc, plan, spec);
        auto ok = [](const ScalingFit &f) {
            return f.slope >= kSlopeLo && f.slope <= kSlopeHi && f.r2 >= kMinR2;
        };
        Detail d;
        d << "cost gap slope " << rep.cost_fit.slope << " (R2 " << rep.cost_fit.r2 << ", " << rep.cost_estimator
          << "), path slope " << rep.path_fit.slope << " (R2 " << rep.path_fit.r2 << "), variance residual slope "
          << rep.variance_fit.slope << " (R2 " << rep.variance_fit.r2 << ", not gated)";
        return {ok(rep.cost_fit) && ok(rep.path_fit), d.str()};
    }

    Outcome cost_and_replans()
    {
        const SingleAgentPreset car = car_single();
        SweepSpec s;
        s.experiment = "cost_sweep";
        s.scenario = car.scenario();
        s.policies = {policy(PolicyKind::MPC), policy(PolicyKind::TLQR2)};
        s.eps_grid = {0.0, 0.1, 0.2, 0.3, 0.4};
        s.seeds = 100;
        const SweepSummary sum = run_sweep(s);
        const double full_replans = car.horizon - 1;

        Outcome o;
        Detail d;
        for (double eps : s.eps_grid)
        {
            const CellSummary &mpc = sum.cell("MPC", eps);
            const CellSummary &tl = sum.cell("TLQR2", eps);
            const double gap = std::abs(tl.ratio.mean - mpc.ratio.mean) / mpc.ratio.mean;
            const bool cell_ok = gap <= kSweepRatioGap && tl.replans.mean <= kSweepReplanShare * full_replans &&
                                 mpc.failures == 0 && tl.failures == 0;
            o.pass = o.pass && cell_ok;
            d << "eps " << eps << ": MPC " << mpc.ratio.mean << " TLQR2 " << tl.ratio.mean << " (gap "
              << gap * 100.0 << "%, replans " << tl.replans.mean << "); ";
        }
        for (const RolloutRow &r : sum.rows)
            if (r.policy == "MPC" && r.replans != car.horizon - 1)
            {
                o.pass = false;
                d << "MPC seed " << r.seed << " eps " << r.eps << " replans " << r.replans << "; ";
            }
        o.detail = d.str();
        return o;
    }

    Outcome planning_time()
    {
        const SingleAgentPreset car = car_single();
        SweepSpec s;
        s.experiment = "planning_time";
        s.scenario = car.scenario();
        s.policies = {policy(PolicyKind::MPC), policy(PolicyKind::TLQR2)};
        s.eps_grid = {0.4};
        s.seeds = 20;
        const SweepSummary sum = run_sweep(s);
        double mpc_ms = 0.0, tl_ms = 0.0;
        for (const RolloutRow &r : sum.rows)
            (r.policy == "MPC" ? mpc_ms : tl_ms) += r.total_plan_ms;
        const double share = tl_ms / mpc_ms;
        return {share < kTimingTimeShare, (Detail() << "TLQR2 " << tl_ms << " ms vs MPC " << mpc_ms << " ms over "
                                                  << s.seeds << " seeds (" << share * 100.0 << "%)")
                                            .str()};
    }

    Outcome multi_agent()
    {
        const MultiAgentPreset p = car_multi3();
        SweepSpec s;
        s.experiment = "multi";
        s.scenario = p.scenario();
        s.agent_costs = p.problem.costs;
        s.policies = {policy(PolicyKind::MPC), policy(PolicyKind::TLQR2)};
        s.eps_grid = {0.4};
        s.seeds = 50;
        const SweepSummary sum = run_sweep(s);
        const CellSummary &mpc = sum.cell("MPC", 0.4);
        const CellSummary &tl = sum.cell("TLQR2", 0.4);
        int comm_mismatch = 0;
        for (const RolloutRow &r : sum.rows)
            if (r.policy == "TLQR2")
                comm_mismatch += r.communication != 1 + r.replans;
        const double gap = std::abs(tl.ratio.mean - mpc.ratio.mean) / mpc.ratio.mean;
        const bool pass = gap <= kMultiRatioGap && comm_mismatch == 0 && mpc.failures == 0 && tl.failures == 0;
        return {pass, (Detail() << "joint MPC " << mpc.ratio.mean << ", MT-LQR2 " << tl.ratio.mean << " (gap "
                                << gap * 100.0 << "%, replans " << tl.replans.mean
                                << "), communication mismatches " << comm_mismatch)
                          .str()};
    }
} // namespace

int main()
{
    criterion("riccati_oracle", kRiccatiBudgetS, riccati_oracle);
    criterion("ocp_optimality", kOcpBudgetS, ocp_optimality);
    criterion("eps0_degeneracy", kDegeneracyBudgetS, degeneracy);
    criterion("reduction_identities", kIdentityBudgetS, identities);
    criterion("scaling_laws", kScalingBudgetS, scaling);
    criterion("cost_and_replans", kSweepBudgetS, cost_and_replans);
    criterion("planning_time", kTimingBudgetS, planning_time);
    criterion("multi_agent", kMultiBudgetS, multi_agent);
    std::printf("%d of 8 criteria failed\n", g_failures);
    return g_failures == 0 ? 0 : 1;
}
