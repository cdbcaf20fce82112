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

#include "stochplan/policies.hpp"

#include "stochplan/errors.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

namespace stochplan
{
    namespace
    {
        using Clock = std::chrono::steady_clock;

        double elapsed_ms(Clock::time_point since)
        {
            return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
        }

        State concat(const std::vector<State> &parts)
        {
            Eigen::Index n = 0;
            for (const auto &p : parts)
                n += p.size();
            State out(n);
            Eigen::Index o = 0;
            for (const auto &p : parts)
            {
                out.segment(o, p.size()) = p;
                o += p.size();
            }
            return out;
        }

        void finish_record(const Scenario &sc, RolloutRecord &rec, double realized)
        {
            if (!rec.diverged)
            {
                rec.cost = realized + sc.objective->terminal(rec.states.back());
                rec.terminal_error = (rec.states.back() - sc.goal).norm();
                if (!std::isfinite(rec.cost))
                    rec.diverged = true;
            }
            if (rec.diverged)
            {
                rec.cost = std::numeric_limits<double>::infinity();
                rec.terminal_error = std::numeric_limits<double>::infinity();
            }
            if (rec.nominal_cost > 0.0)
                rec.ratio = rec.cost / rec.nominal_cost;
            else
                rec.ratio = rec.cost == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
        }

        RolloutRecord start_record(const Scenario &sc, const PolicyConfig &cfg, double eps,
                                   const NoiseStream &noise)
        {
            RolloutRecord rec;
            rec.policy = cfg.name();
            rec.eps = eps;
            rec.seed = noise.seed();
            rec.step_ms.assign(static_cast<std::size_t>(sc.horizon), 0.0);
            rec.states.reserve(static_cast<std::size_t>(sc.horizon) + 1);
            rec.controls.reserve(static_cast<std::size_t>(sc.horizon));
            rec.states.push_back(sc.x0);
            return rec;
        }

        State advance(const Scenario &sc, const State &x, const Control &u, double eps,
                      const NoiseStream &noise, int t)
        {
            if (eps == 0.0)
                return step_nominal(sc.model, x, u, t);
            return step(sc.model, x, u, scenario_noise(sc, noise, t), eps, t);
        }
    } // namespace

    std::string_view to_string(PolicyKind kind)
    {
        switch (kind)
        {
        case PolicyKind::TLQR:
            return "TLQR";
        case PolicyKind::TLQR2:
            return "TLQR2";
        case PolicyKind::MPC:
            return "MPC";
        case PolicyKind::MPCSH:
            return "MPCSH";
        }
        return "?";
    }

    std::string_view to_string(GainSource source)
    {
        return source == GainSource::Tpfc ? "tpfc" : "surrogate_lqr";
    }

    PolicyKind parse_policy_kind(std::string_view name)
    {
        if (name == "TLQR" || name == "T-LQR")
            return PolicyKind::TLQR;
        if (name == "TLQR2" || name == "T-LQR2")
            return PolicyKind::TLQR2;
        if (name == "MPC")
            return PolicyKind::MPC;
        if (name == "MPCSH" || name == "MPC-SH")
            return PolicyKind::MPCSH;
        throw ContractViolation("unknown policy kind '" + std::string(name) + "'");
    }

    GainSource parse_gain_source(std::string_view name)
    {
        if (name == "surrogate_lqr")
            return GainSource::SurrogateLqr;
        if (name == "tpfc")
            return GainSource::Tpfc;
        throw ContractViolation("unknown gain source '" + std::string(name) + "'");
    }

    void PolicyConfig::validate(int horizon) const
    {
        if (!(J_thresh >= 0.0))
            throw ContractViolation("policy: J_thresh must be non-negative");
        if (H_c < 0 || H_c > horizon)
            throw ContractViolation("policy: H_c must lie in [1, T] (0 selects T)");
    }

    double RolloutRecord::total_plan_ms() const
    {
        return std::accumulate(step_ms.begin(), step_ms.end(), 0.0);
    }

    void Scenario::validate() const
    {
        model.validate();
        if (!objective)
            throw ContractViolation("scenario " + name + ": missing objective");
        if (objective->state_dim() != model.n_x || objective->control_dim() != model.n_u)
            throw ContractViolation("scenario " + name + ": objective does not match the model");
        weights.validate(model.n_x, model.n_u);
        if (x0.size() != model.n_x || goal.size() != model.n_x)
            throw ContractViolation("scenario " + name + ": x0 and goal must have n_x entries");
        if (horizon < 1)
            throw ContractViolation("scenario " + name + ": horizon must be at least 1");
        if (std::accumulate(agent_state_dims.begin(), agent_state_dims.end(), 0) != model.n_x ||
            std::accumulate(agent_control_dims.begin(), agent_control_dims.end(), 0) != model.n_u ||
            agent_state_dims.size() != agent_control_dims.size() || agent_state_dims.empty())
            throw ContractViolation("scenario " + name + ": agent partition does not cover the model");
    }

    int Scenario::state_offset(int agent) const
    {
        return std::accumulate(agent_state_dims.begin(), agent_state_dims.begin() + agent, 0);
    }

    int Scenario::control_offset(int agent) const
    {
        return std::accumulate(agent_control_dims.begin(), agent_control_dims.begin() + agent, 0);
    }

    Scenario make_scenario(std::string name, ModelSpec model, const CostSpec &cost, State x0, int horizon)
    {
        Scenario sc;
        sc.name = std::move(name);
        sc.objective = std::make_shared<QuadraticCost>(cost);
        sc.weights = LqrWeights::surrogate(cost);
        sc.goal = cost.goal;
        sc.x0 = std::move(x0);
        sc.horizon = horizon;
        sc.agent_state_dims = {model.n_x};
        sc.agent_control_dims = {model.n_u};
        sc.model = std::move(model);
        sc.validate();
        return sc;
    }

    void MultiAgentProblem::validate() const
    {
        if (models.empty() || models.size() != costs.size() || models.size() != starts.size())
            throw ContractViolation("multi-agent problem: need matching models, costs and starts");
        for (std::size_t i = 0; i < models.size(); ++i)
        {
            models[i].validate();
            costs[i].validate();
            if (costs[i].state_dim() != models[i].n_x || starts[i].size() != models[i].n_x)
                throw ContractViolation("multi-agent problem: agent " + std::to_string(i) + " has mismatched dimensions");
        }
    }

    Scenario MultiAgentProblem::scenario(std::string name, int horizon) const
    {
        validate();
        auto joint = std::make_shared<JointCost>(costs, collision_scale, r_thresh);
        Scenario sc;
        sc.name = std::move(name);
        sc.model = stack_models(models);
        sc.weights = LqrWeights::surrogate(*joint);
        sc.objective = joint;
        sc.x0 = concat(starts);
        std::vector<State> goals;
        for (const auto &c : costs)
            goals.push_back(c.goal);
        sc.goal = concat(goals);
        sc.horizon = horizon;
        for (const auto &m : models)
        {
            sc.agent_state_dims.push_back(m.n_x);
            sc.agent_control_dims.push_back(m.n_u);
        }
        sc.validate();
        return sc;
    }

    Control scenario_noise(const Scenario &scenario, const NoiseStream &stream, int t)
    {
        if (scenario.agent_count() == 1)
            return sample_noise(stream, t, scenario.model.u_max);
        Control w(scenario.model.n_u);
        for (int i = 0; i < scenario.agent_count(); ++i)
        {
            const int o = scenario.control_offset(i);
            const int n = scenario.agent_control_dims[static_cast<std::size_t>(i)];
            w.segment(o, n) = sample_noise(stream.substream(static_cast<std::uint64_t>(i)), t,
                                           scenario.model.u_max.segment(o, n));
        }
        return w;
    }

    Planner::Planner(const Scenario &scenario, GainSource gains, SolverOptions options)
        : scenario_(scenario), source_(gains), solver_(options)
    {
    }

    OcpSolution Planner::solve(const State &x0, int horizon, const Control &u_prev,
                               std::vector<Control> guess)
    {
        OcpProblem problem{scenario_.model, *scenario_.objective, x0, horizon, u_prev, std::move(guess)};
        return solver_.solve(problem);
    }

    NominalPlan Planner::plan(const State &x0, int horizon, const Control &u_prev, int t0,
                              std::vector<Control> guess)
    {
        OcpSolution sol = solve(x0, horizon, u_prev, std::move(guess));
        const auto g0 = Clock::now();
        NominalPlan plan;
        plan.t0 = t0;
        plan.gains = source_ == GainSource::Tpfc
                         ? tpfc_gains(scenario_.model, *scenario_.objective, sol.states, sol.controls)
                         : surrogate_lqr_gains(scenario_.model, scenario_.weights, sol.states, sol.controls);
        plan.gain_ms = elapsed_ms(g0);
        plan.solve_ms = sol.solve_ms;
        plan.cost = sol.cost;
        plan.iterations = sol.iterations;
        plan.converged = sol.converged;
        plan.prefix_costs.reserve(sol.controls.size());
        double acc = 0.0;
        for (std::size_t t = 0; t < sol.controls.size(); ++t)
        {
            acc += scenario_.objective->stage(sol.states[t], sol.controls[t]);
            plan.prefix_costs.push_back(acc);
        }
        plan.xbar = std::move(sol.states);
        plan.ubar = std::move(sol.controls);
        return plan;
    }

    NominalPlan initial_plan(const Scenario &scenario, GainSource gains, const SolverOptions &options)
    {
        scenario.validate();
        Planner planner(scenario, gains, options);
        return planner.plan(scenario.x0, scenario.horizon, Control::Zero(scenario.model.n_u));
    }

    Control tlqr_control(const NominalPlan &plan, int t, const State &x, const ModelSpec &model)
    {
        const int k = t - plan.t0;
        if (k < 0 || k >= plan.horizon())
            throw ContractViolation("tlqr_control: time " + std::to_string(t) + " outside the plan");
        const auto ks = static_cast<std::size_t>(k);
        return clamp_to_bounds(model, plan.ubar[ks] - plan.gains.L[ks] * (x - plan.xbar[ks]));
    }

    RolloutRecord execute_tlqr2(const Scenario &sc, const PolicyConfig &cfg, double eps,
                                const NoiseStream &noise, const ExecutionOptions &options)
    {
        if (cfg.kind != PolicyKind::TLQR && cfg.kind != PolicyKind::TLQR2)
            throw ContractViolation("execute_tlqr2: policy must be TLQR or TLQR2");
        if (!(eps >= 0.0))
            throw ContractViolation("execute_tlqr2: eps must be non-negative");
        cfg.validate(sc.horizon);
        const int T = sc.horizon;
        Planner planner(sc, cfg.gain_source, options.solver);
        NominalPlan plan = options.initial ? *options.initial
                                           : planner.plan(sc.x0, T, Control::Zero(sc.model.n_u));

        RolloutRecord rec = start_record(sc, cfg, eps, noise);
        rec.nominal_cost = plan.cost;
        rec.nominal_states = plan.xbar;
        rec.nominal_controls = plan.ubar;
        rec.step_ms[0] = plan.plan_ms();

        const double thr = cfg.threshold();
        double realized = 0.0;
        double base = 0.0;  // realized prefix at the last re-anchor
        State x = sc.x0;
        try
        {
            for (int t = 0; t < T; ++t)
            {
                const Control u = tlqr_control(plan, t, x, sc.model);
                realized += sc.objective->stage(x, u);
                x = advance(sc, x, u, eps, noise, t);
                rec.controls.push_back(u);
                rec.states.push_back(x);

                const int remaining = T - t - 1;
                if (!std::isfinite(thr) || remaining < 1)
                    continue;
                const double nominal = base + plan.prefix_costs[static_cast<std::size_t>(t - plan.t0)];
                const double excess = realized - nominal;
                if (!(excess > thr * nominal))
                    continue;

                ReplanEvent ev;
                ev.t = t + 1;
                ev.trigger = nominal > 0.0 ? excess / nominal : std::numeric_limits<double>::infinity();
                const auto k = static_cast<std::size_t>(t + 1 - plan.t0);
                std::vector<Control> guess(plan.ubar.begin() + static_cast<std::ptrdiff_t>(k), plan.ubar.end());
                const auto s0 = Clock::now();
                try
                {
                    NominalPlan next = planner.plan(x, remaining, u, t + 1, std::move(guess));
                    ev.solve_ms = next.plan_ms();
                    plan = std::move(next);
                    base = realized;
                }
                catch (const SolverError &)
                {
                    ev.solve_ms = elapsed_ms(s0);
                    ev.succeeded = false;
                    ++rec.failed_solves;
                }
                rec.step_ms[static_cast<std::size_t>(t + 1)] += ev.solve_ms;
                rec.replans.push_back(ev);
            }
        }
        catch (const NumericError &)
        {
            rec.diverged = true;
        }
        finish_record(sc, rec, realized);
        return rec;
    }

    RolloutRecord execute_mpc(const Scenario &sc, const PolicyConfig &cfg, double eps,
                              const NoiseStream &noise, const ExecutionOptions &options)
    {
        if (cfg.kind != PolicyKind::MPC && cfg.kind != PolicyKind::MPCSH)
            throw ContractViolation("execute_mpc: policy must be MPC or MPCSH");
        if (!(eps >= 0.0))
            throw ContractViolation("execute_mpc: eps must be non-negative");
        cfg.validate(sc.horizon);
        const int T = sc.horizon;
        const int Hc = cfg.kind == PolicyKind::MPCSH && cfg.H_c > 0 ? cfg.H_c : T;
        Planner planner(sc, cfg.gain_source, options.solver);

        RolloutRecord rec = start_record(sc, cfg, eps, noise);
        double full_ms = 0.0;
        if (options.initial)
        {
            rec.nominal_cost = options.initial->cost;
            rec.nominal_states = options.initial->xbar;
            rec.nominal_controls = options.initial->ubar;
            full_ms = options.initial->solve_ms;
        }
        else
        {
            // Reference nominal. It doubles as the first MPC solve; MPC-SH
            // is not charged for it.
            OcpSolution full = planner.solve(sc.x0, T, Control::Zero(sc.model.n_u));
            rec.nominal_cost = full.cost;
            rec.nominal_states = std::move(full.states);
            rec.nominal_controls = std::move(full.controls);
            full_ms = full.solve_ms;
        }

        double realized = 0.0;
        State x = sc.x0;
        Control u_prev = Control::Zero(sc.model.n_u);
        std::vector<Control> previous;
        try
        {
            for (int t = 0; t < T; ++t)
            {
                const int H = std::min(Hc, T - t);
                std::vector<Control> first;
                double ms = 0.0;
                bool ok = true;
                if (t == 0 && H == T)
                {
                    first = rec.nominal_controls;
                    ms = full_ms;
                }
                else
                {
                    const auto s0 = Clock::now();
                    try
                    {
                        auto guess = previous.empty() ? std::vector<Control>{} : shift_controls(previous, H);
                        OcpSolution sol = planner.solve(x, H, u_prev, std::move(guess));
                        first = std::move(sol.controls);
                    }
                    catch (const SolverError &)
                    {
                        if (previous.size() < 2)
                            throw;
                        ok = false;
                        ++rec.failed_solves;
                        first = shift_controls(previous, H);
                    }
                    ms = elapsed_ms(s0);
                }
                rec.step_ms[static_cast<std::size_t>(t)] = ms;
                if (t > 0)
                    rec.replans.push_back({t, 0.0, ms, ok});

                const Control u = clamp_to_bounds(sc.model, first.front());
                realized += sc.objective->stage(x, u);
                x = advance(sc, x, u, eps, noise, t);
                rec.controls.push_back(u);
                rec.states.push_back(x);
                previous = std::move(first);
                u_prev = u;
            }
        }
        catch (const NumericError &)
        {
            rec.diverged = true;
        }
        finish_record(sc, rec, realized);
        return rec;
    }

    RolloutRecord execute_policy(const Scenario &scenario, const PolicyConfig &cfg, double eps,
                                 const NoiseStream &noise, const ExecutionOptions &options)
    {
        if (cfg.kind == PolicyKind::MPC || cfg.kind == PolicyKind::MPCSH)
            return execute_mpc(scenario, cfg, eps, noise, options);
        return execute_tlqr2(scenario, cfg, eps, noise, options);
    }

    std::vector<NominalPlan> split_plan(const Scenario &joint, const NominalPlan &plan)
    {
        const auto *cost = dynamic_cast<const JointCost *>(joint.objective.get());
        std::vector<NominalPlan> out;
        for (int i = 0; i < joint.agent_count(); ++i)
        {
            const int xo = joint.state_offset(i), nx = joint.agent_state_dims[static_cast<std::size_t>(i)];
            const int uo = joint.control_offset(i), nu = joint.agent_control_dims[static_cast<std::size_t>(i)];
            NominalPlan p;
            p.t0 = plan.t0;
            p.iterations = plan.iterations;
            p.converged = plan.converged;
            p.solve_ms = plan.solve_ms;
            p.gain_ms = plan.gain_ms;
            for (const auto &x : plan.xbar)
                p.xbar.push_back(x.segment(xo, nx));
            for (const auto &u : plan.ubar)
                p.ubar.push_back(u.segment(uo, nu));
            for (const auto &L : plan.gains.L)
                p.gains.L.push_back(L.block(uo, xo, nu, nx));
            for (const auto &P : plan.gains.P)
                p.gains.P.push_back(P.block(xo, xo, nx, nx));
            for (const auto &G : plan.gains.G)
                p.gains.G.push_back(G.segment(xo, nx));
            double acc = 0.0;
            for (std::size_t t = 0; t < p.ubar.size(); ++t)
            {
                acc += cost ? stage_cost(cost->agent(i), p.xbar[t], p.ubar[t]) : 0.0;
                p.prefix_costs.push_back(acc);
            }
            p.cost = cost ? acc + terminal_cost(cost->agent(i), p.xbar.back()) : plan.cost;
            out.push_back(std::move(p));
        }
        return out;
    }

    std::vector<NominalPlan> plan_joint(const Scenario &joint, const SolverOptions &options)
    {
        return split_plan(joint, initial_plan(joint, GainSource::SurrogateLqr, options));
    }

    MultiAgentRecord execute_multi_agent(const Scenario &joint, const std::vector<CostSpec> &agent_costs,
                                         const PolicyConfig &cfg, double eps, const NoiseStream &noise,
                                         const ExecutionOptions &options)
    {
        if (agent_costs.size() != static_cast<std::size_t>(joint.agent_count()))
            throw ContractViolation("execute_multi_agent: one cost per agent required");
        MultiAgentRecord out;
        out.joint = execute_policy(joint, cfg, eps, noise, options);
        out.communication_events = 1 + out.joint.replan_count();
        for (int i = 0; i < joint.agent_count(); ++i)
        {
            const auto is = static_cast<std::size_t>(i);
            const int xo = joint.state_offset(i), nx = joint.agent_state_dims[is];
            const int uo = joint.control_offset(i), nu = joint.agent_control_dims[is];
            const CostSpec &c = agent_costs[is];
            RolloutRecord r;
            r.policy = out.joint.policy;
            r.eps = eps;
            r.seed = out.joint.seed;
            r.replans = out.joint.replans;
            r.step_ms = out.joint.step_ms;
            r.failed_solves = out.joint.failed_solves;
            r.diverged = out.joint.diverged;
            for (const auto &x : out.joint.states)
                r.states.push_back(x.segment(xo, nx));
            for (const auto &u : out.joint.controls)
                r.controls.push_back(u.segment(uo, nu));
            for (const auto &x : out.joint.nominal_states)
                r.nominal_states.push_back(x.segment(xo, nx));
            for (const auto &u : out.joint.nominal_controls)
                r.nominal_controls.push_back(u.segment(uo, nu));
            auto own = [&](const std::vector<State> &xs, const std::vector<Control> &us) {
                double acc = 0.0;
                for (std::size_t t = 0; t < us.size(); ++t)
                    acc += stage_cost(c, xs[t], us[t]);
                return acc + terminal_cost(c, xs.back());
            };
            r.nominal_cost = own(r.nominal_states, r.nominal_controls);
            if (r.diverged || r.controls.size() + 1 != r.states.size())
            {
                r.diverged = true;
                r.cost = std::numeric_limits<double>::infinity();
                r.terminal_error = std::numeric_limits<double>::infinity();
            }
            else
            {
                r.cost = own(r.states, r.controls);
                r.terminal_error = (r.states.back() - c.goal).norm();
            }
            r.ratio = r.nominal_cost > 0.0 ? r.cost / r.nominal_cost : 1.0;
            out.agents.push_back(std::move(r));
        }
        return out;
    }
} // namespace stochplan
