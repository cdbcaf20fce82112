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

#include "stochplan/costs.hpp"
#include "stochplan/feedback.hpp"
#include "stochplan/models.hpp"
#include "stochplan/noise.hpp"
#include "stochplan/trajopt.hpp"

#include <limits>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace stochplan
{
    enum class PolicyKind
    {
        TLQR,
        TLQR2,
        MPC,
        MPCSH
    };

    enum class GainSource
    {
        SurrogateLqr,
        Tpfc
    };

    std::string_view to_string(PolicyKind kind);
    std::string_view to_string(GainSource source);
    /// Accepts "TLQR", "TLQR2", "MPC", "MPCSH" (also "T-LQR", "T-LQR2", "MPC-SH").
    PolicyKind parse_policy_kind(std::string_view name);
    /// "surrogate_lqr" | "tpfc".
    GainSource parse_gain_source(std::string_view name);

    inline constexpr double kNoReplan = std::numeric_limits<double>::infinity();

    struct PolicyConfig
    {
        PolicyKind kind = PolicyKind::TLQR2;
        double J_thresh = 0.02;  ///< ignored for TLQR, which never replans
        int H_c = 0;             ///< MPC-SH control horizon; 0 means the full horizon
        GainSource gain_source = GainSource::SurrogateLqr;
        std::string label;       ///< report name; defaults to the kind

        void validate(int horizon) const;
        double threshold() const { return kind == PolicyKind::TLQR ? kNoReplan : J_thresh; }
        std::string name() const { return label.empty() ? std::string(to_string(kind)) : label; }
    };

    /**
     * A planning problem bound to its feedback design. Multi-agent problems use
     * a stacked joint model and a JointCost; `agent_state_dims` and
     * `agent_control_dims` record the partition (a single entry for one agent).
     */
    struct Scenario
    {
        std::string name;
        ModelSpec model;
        std::shared_ptr<const Objective> objective;
        LqrWeights weights;
        State x0;
        State goal;
        int horizon = 0;
        std::vector<int> agent_state_dims;
        std::vector<int> agent_control_dims;

        void validate() const;
        int agent_count() const { return static_cast<int>(agent_control_dims.size()); }
        int state_offset(int agent) const;
        int control_offset(int agent) const;
    };

    /// Single-agent scenario with the surrogate LQR weights of `cost`.
    Scenario make_scenario(std::string name, ModelSpec model, const CostSpec &cost, State x0, int horizon);

    /// Transition-independent agents planned jointly: stacked dynamics, the
    /// sum of agent costs plus pairwise collision penalties, block-diagonal
    /// surrogate weights (decoupled per-agent LQR).
    struct MultiAgentProblem
    {
        std::vector<ModelSpec> models;
        std::vector<CostSpec> costs;
        std::vector<State> starts;
        double collision_scale = 100.0;
        double r_thresh = 0.5;

        void validate() const;
        Scenario scenario(std::string name, int horizon) const;
    };

    /// Joint disturbance: agent i draws from stream.substream(i).
    Control scenario_noise(const Scenario &scenario, const NoiseStream &stream, int t);

    struct NominalPlan
    {
        int t0 = 0;  ///< global time of xbar[0]
        std::vector<State> xbar;
        std::vector<Control> ubar;
        GainSchedule gains;
        std::vector<double> prefix_costs;  ///< stage-cost prefix sums, |ubar| entries
        double cost = 0.0;                 ///< stage sum plus terminal cost
        int iterations = 0;
        bool converged = false;
        double solve_ms = 0.0;
        double gain_ms = 0.0;

        int horizon() const { return static_cast<int>(ubar.size()); }
        double plan_ms() const { return solve_ms + gain_ms; }
    };

    /// Solver plus gain synthesis for one scenario. Owns an OcpSolver, so one
    /// Planner per thread. Plans restart the model's time index at 0.
    class Planner
    {
    public:
        Planner(const Scenario &scenario, GainSource gains, SolverOptions options = {});

        NominalPlan plan(const State &x0, int horizon, const Control &u_prev, int t0 = 0,
                         std::vector<Control> guess = {});

        /// Open-loop solve only (no gains), as used by MPC.
        OcpSolution solve(const State &x0, int horizon, const Control &u_prev,
                          std::vector<Control> guess = {});

    private:
        const Scenario &scenario_;
        GainSource source_;
        OcpSolver solver_;
    };

    /// Constrain(ubar_t - L_t (x - xbar_t)) with the box bounds only.
    Control tlqr_control(const NominalPlan &plan, int t, const State &x, const ModelSpec &model);

    struct ReplanEvent
    {
        int t = 0;              ///< global time at which the new plan starts
        double trigger = 0.0;   ///< (J - Jbar) / Jbar when fired; 0 for MPC
        double solve_ms = 0.0;
        bool succeeded = true;
    };

    struct RolloutRecord
    {
        std::string policy;
        double eps = 0.0;
        std::uint64_t seed = 0;
        std::vector<State> states;
        std::vector<Control> controls;
        double cost = 0.0;          ///< realized J
        double nominal_cost = 0.0;  ///< Jbar of the full-horizon plan from x0
        double ratio = 0.0;
        std::vector<ReplanEvent> replans;
        std::vector<double> step_ms;  ///< planning time charged to each step, |T| entries
        double terminal_error = 0.0;  ///< |x_T - goal|
        std::vector<State> nominal_states;     ///< full-horizon plan from x0
        std::vector<Control> nominal_controls;
        int failed_solves = 0;
        bool diverged = false;        ///< the state became non-finite

        int replan_count() const { return static_cast<int>(replans.size()); }
        double total_plan_ms() const;
    };

    struct ExecutionOptions
    {
        SolverOptions solver;
        /// Reused full-horizon plan from x0 (same scenario and gain source).
        /// Its recorded planning time is charged to step 0.
        const NominalPlan *initial = nullptr;
    };

    /// Full-horizon plan from the scenario start.
    NominalPlan initial_plan(const Scenario &scenario, GainSource gains, const SolverOptions &options = {});

    /// T-LQR and T-LQR2: track the plan; after step t, replan from x_{t+1}
    /// over T - t - 1 steps when (J_{0:t} - Jbar_{0:t}) / Jbar_{0:t} > J_thresh.
    /// After a replan both prefixes restart from the realized cost so far.
    RolloutRecord execute_tlqr2(const Scenario &scenario, const PolicyConfig &cfg, double eps,
                                const NoiseStream &noise, const ExecutionOptions &options = {});

    /// MPC and MPC-SH: re-solve from the measured state at every step,
    /// warm-started from the shifted previous solution.
    RolloutRecord execute_mpc(const Scenario &scenario, const PolicyConfig &cfg, double eps,
                              const NoiseStream &noise, const ExecutionOptions &options = {});

    RolloutRecord execute_policy(const Scenario &scenario, const PolicyConfig &cfg, double eps,
                                 const NoiseStream &noise, const ExecutionOptions &options = {});

    /// Joint plan split into per-agent plans with the diagonal gain blocks.
    std::vector<NominalPlan> plan_joint(const Scenario &joint, const SolverOptions &options = {});
    std::vector<NominalPlan> split_plan(const Scenario &joint, const NominalPlan &plan);

    struct MultiAgentRecord
    {
        RolloutRecord joint;
        std::vector<RolloutRecord> agents;  ///< own-cost view per agent, no collision terms
        int communication_events = 0;       ///< 1 + joint replans for MT-LQR2; every solve for MPC
    };

    /// MT-LQR2 (kind TLQR/TLQR2) or joint MPC (kind MPC/MPCSH) with a
    /// centralized trigger on the joint cost.
    MultiAgentRecord execute_multi_agent(const Scenario &joint, const std::vector<CostSpec> &agent_costs,
                                         const PolicyConfig &cfg, double eps, const NoiseStream &noise,
                                         const ExecutionOptions &options = {});
} // namespace stochplan
