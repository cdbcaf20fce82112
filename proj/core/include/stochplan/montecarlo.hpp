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

#pragma once

#include "stochplan/policies.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace stochplan
{
    /// One Monte Carlo experiment: every (policy, eps, seed) combination.
    struct SweepSpec
    {
        std::string experiment = "sweep";
        Scenario scenario;
        /// Per-agent costs for a multi-agent scenario (joint execution);
        /// empty for single-agent sweeps.
        std::vector<CostSpec> agent_costs;
        std::vector<PolicyConfig> policies;
        std::vector<double> eps_grid;
        int seeds = 100;
        std::uint64_t base_seed = 0;
        int workers = 1;
        SolverOptions solver;
        /// Rollouts with J > divergence_cap * Jbar count as failures.
        double divergence_cap = 1e6;

        void validate() const;
        bool multi_agent() const { return !agent_costs.empty(); }
    };

    /// One line of rollouts.csv.
    struct RolloutRow
    {
        std::string policy;
        std::string model;
        double eps = 0.0;
        std::uint64_t seed = 0;
        double J = 0.0;
        double J_bar = 0.0;
        double ratio = 0.0;
        int replans = 0;
        double total_plan_ms = 0.0;
        bool failed = false;
        int communication = 0;  ///< multi-agent only: 1 + joint replans (MT-LQR2) or every solve (MPC)
        int failed_solves = 0;
        std::vector<double> step_ms;
    };

    /// Mean and sample standard deviation (n - 1 denominator; 0 when n == 1,
    /// NaN when n == 0).
    struct Stat
    {
        double mean = 0.0;
        double std = 0.0;
    };

    Stat sample_stat(const std::vector<double> &values);

    /// Statistics of one (policy, eps) cell over its successful rollouts.
    struct CellSummary
    {
        std::string policy;
        double eps = 0.0;
        int samples = 0;   ///< successful rollouts
        int failures = 0;  ///< diverged or above the cap, excluded from the statistics
        Stat ratio;
        Stat cost;
        Stat replans;
        Stat plan_ms;       ///< total planning time per rollout
        Stat step_plan_ms;  ///< planning time per step
        std::vector<double> mean_step_ms;  ///< per-step planning time averaged over samples
    };

    struct SweepSummary
    {
        std::string experiment;
        std::string model;
        int horizon = 0;
        double nominal_cost = 0.0;
        std::vector<CellSummary> cells;  ///< policy-major, in configuration order
        std::vector<RolloutRow> rows;    ///< policy, eps, seed order

        int failures() const;
        const CellSummary &cell(const std::string &policy, double eps) const;
    };

    /// Rollout seeds are base_seed + index; the per-seed noise is shared by
    /// all policies and noise levels. Initial plans are computed once per gain
    /// source and reused by every rollout. Aggregation runs after all workers
    /// finish, in row order, so the statistics do not depend on scheduling.
    SweepSummary run_sweep(const SweepSpec &spec);

    /// Shortest decimal form that reads back to the same double.
    std::string format_number(double v);

    /// Header: policy,model,eps,seed,J,J_bar,ratio,replans,total_plan_ms,failed,
    /// plus communication for multi-agent sweeps.
    void write_rollouts_csv(std::ostream &os, const SweepSummary &summary);
    /// One line per (policy, eps) with mean/std columns.
    void write_summary_csv(std::ostream &os, const SweepSummary &summary);
    /// Long format: policy,eps,t,mean_step_ms.
    void write_timing_csv(std::ostream &os, const SweepSummary &summary);

    /// Ordinary least squares fit of log(y) on log(x).
    struct ScalingFit
    {
        double slope = 0.0;
        double intercept = 0.0;
        double r2 = 0.0;
        int points = 0;
        bool low_confidence = true;  ///< r2 < 0.9 or fewer than three usable points
    };

    /// Fits the positive finite pairs only.
    ScalingFit loglog_fit(const std::vector<double> &x, const std::vector<double> &y);

    struct DecouplingSpec
    {
        std::vector<double> eps_grid{0.05, 0.1, 0.2, 0.4};
        int seeds = 2000;
        std::uint64_t base_seed = 0;
        int workers = 1;
    };

    struct DecouplingLevel
    {
        double eps = 0.0;
        int samples = 0;
        double mean_cost = 0.0;
        double cost_gap = 0.0;          ///< |E[J] - Jbar|, plain sample mean
        double paired_cost_gap = 0.0;   ///< same, from (J(w) + J(-w)) / 2 pairs
        double var_cost = 0.0;          ///< Var[J]
        double var_linear = 0.0;        ///< Var[dJ1] of the linear perturbation model
        double var_residual = 0.0;      ///< |Var[J] - Var[dJ1]|
        double path_error = 0.0;        ///< mean over seeds of max_t |dx_t - dx^l_t|
    };

    struct DecouplingReport
    {
        std::string model;
        double nominal_cost = 0.0;
        std::vector<DecouplingLevel> levels;
        ScalingFit cost_fit;      ///< (a) from cost_gap, or paired_cost_gap when used
        ScalingFit variance_fit;  ///< (b) residual variance, expected slope 4
        ScalingFit path_fit;      ///< (c) expected slope 2
        std::string cost_estimator = "plain";  ///< "plain" | "paired"

        std::string to_json() const;
    };

    /**
     * Perturbation analysis of a fixed plan under the linear feedback
     * u_t = ubar_t - L_t (x_t - xbar_t), applied without clamping so the
     * closed loop is smooth in the noise. Each seed's noise sequence is reused
     * across noise levels. The linear model
     *
     *     dx^l_{t+1} = (A_t - B_t L_t) dx^l_t + eps B_t w_t
     *
     * uses Jacobians along the nominal and dJ1 = sum_t c_t' dx^l_t with c_t the
     * finite-difference closed-loop cost gradient.
     *
     * The cost-gap fit uses the plain mean unless that fit is low confidence
     * or outside [1.5, 2.5] while the paired (antithetic) estimate is not; the
     * report records which estimator was used.
     */
    DecouplingReport verify_decoupling(const Scenario &scenario, const NominalPlan &plan,
                                       const DecouplingSpec &spec);

    struct HighNoiseEntry
    {
        int H_c = 0;
        Stat cost;
        Stat ratio;
        Stat plan_ms;
        int failures = 0;
    };

    struct HighNoiseReport
    {
        double eps = 0.0;
        double nominal_cost = 0.0;
        std::vector<HighNoiseEntry> entries;  ///< in H_c order; H_c == T is full MPC

        std::string to_json() const;
    };

    /// Full-horizon MPC against MPC-SH over a control-horizon grid. Reports
    /// only; nothing is asserted.
    HighNoiseReport high_noise_check(const Scenario &scenario, double eps, std::vector<int> horizons,
                                     int seeds, std::uint64_t base_seed = 0, int workers = 1,
                                     const SolverOptions &solver = {});
} // namespace stochplan
