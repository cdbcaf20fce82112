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

#include "stochplan/montecarlo.hpp"

#include "stochplan/errors.hpp"

#include "json.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <limits>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

namespace stochplan
{
    namespace
    {
        constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

        // Runs body(i) for i in [0, n) on up to `workers` threads. The first
        // exception is rethrown after all threads join.
        template <typename Body>
        void parallel_for(std::size_t n, int workers, Body &&body)
        {
            const auto threads = static_cast<std::size_t>(std::max(1, workers));
            if (threads == 1 || n < 2)
            {
                for (std::size_t i = 0; i < n; ++i)
                    body(i);
                return;
            }
            std::atomic<std::size_t> next{0};
            std::exception_ptr error;
            std::mutex error_mutex;
            auto run = [&] {
                for (;;)
                {
                    const std::size_t i = next.fetch_add(1);
                    if (i >= n)
                        return;
                    try
                    {
                        body(i);
                    }
                    catch (...)
                    {
                        std::lock_guard lock(error_mutex);
                        if (!error)
                            error = std::current_exception();
                        next.store(n);
                    }
                }
            };
            std::vector<std::thread> pool;
            for (std::size_t k = 0; k < std::min(threads, n); ++k)
                pool.emplace_back(run);
            for (auto &th : pool)
                th.join();
            if (error)
                std::rethrow_exception(error);
        }

        nlohmann::json fit_json(const ScalingFit &f)
        {
            return {{"slope", f.slope}, {"intercept", f.intercept}, {"r2", f.r2},
                    {"points", f.points}, {"low_confidence", f.low_confidence}};
        }

        nlohmann::json stat_json(const Stat &s) { return {{"mean", s.mean}, {"std", s.std}}; }

        bool plausible_quadratic(const ScalingFit &f)
        {
            return !f.low_confidence && f.slope >= 1.5 && f.slope <= 2.5;
        }

        // Central-difference gradient of g at v.
        template <typename F>
        Vector fd_gradient(F &&g, Vector v, double h = 1e-6)
        {
            Vector out(v.size());
            for (Eigen::Index i = 0; i < v.size(); ++i)
            {
                const double v0 = v(i);
                v(i) = v0 + h;
                const double fp = g(v);
                v(i) = v0 - h;
                const double fm = g(v);
                v(i) = v0;
                out(i) = (fp - fm) / (2.0 * h);
            }
            return out;
        }
    } // namespace

    std::string format_number(double v)
    {
        char buf[64];
        const auto res = std::to_chars(buf, buf + sizeof buf, v);
        return std::string(buf, res.ptr);
    }

    void SweepSpec::validate() const
    {
        scenario.validate();
        if (policies.empty())
            throw ConfigError("policies", "at least one policy is required");
        for (std::size_t i = 0; i < policies.size(); ++i)
        {
            try
            {
                policies[i].validate(scenario.horizon);
            }
            catch (const ContractViolation &e)
            {
                throw ConfigError("policies[" + std::to_string(i) + "]", e.what());
            }
        }
        if (eps_grid.empty())
            throw ConfigError("eps", "noise grid is empty");
        for (std::size_t i = 0; i < eps_grid.size(); ++i)
            if (!(eps_grid[i] >= 0.0) || !std::isfinite(eps_grid[i]))
                throw ConfigError("eps[" + std::to_string(i) + "]", "must be finite and non-negative");
        if (seeds < 1)
            throw ConfigError("seeds", "must be at least 1");
        if (workers < 1)
            throw ConfigError("workers", "must be at least 1");
        if (!(divergence_cap > 0.0))
            throw ConfigError("divergence_cap", "must be positive");
        if (multi_agent() && agent_costs.size() != static_cast<std::size_t>(scenario.agent_count()))
            throw ConfigError("agents", "one cost per agent required");
    }

    Stat sample_stat(const std::vector<double> &values)
    {
        if (values.empty())
            return {kNaN, kNaN};
        double sum = 0.0;
        for (double v : values)
            sum += v;
        const double mean = sum / static_cast<double>(values.size());
        if (values.size() == 1)
            return {mean, 0.0};
        double ss = 0.0;
        for (double v : values)
            ss += (v - mean) * (v - mean);
        return {mean, std::sqrt(ss / static_cast<double>(values.size() - 1))};
    }

    int SweepSummary::failures() const
    {
        int n = 0;
        for (const auto &c : cells)
            n += c.failures;
        return n;
    }

    const CellSummary &SweepSummary::cell(const std::string &policy, double eps) const
    {
        for (const auto &c : cells)
            if (c.policy == policy && c.eps == eps)
                return c;
        throw ContractViolation("SweepSummary: no cell for " + policy + " at eps " + format_number(eps));
    }

    SweepSummary run_sweep(const SweepSpec &spec)
    {
        spec.validate();
        const Scenario &sc = spec.scenario;

        // One cached initial plan per gain source.
        std::map<GainSource, NominalPlan> initial;
        for (const auto &p : spec.policies)
            if (!initial.count(p.gain_source))
                initial.emplace(p.gain_source, initial_plan(sc, p.gain_source, spec.solver));

        const std::size_t n_eps = spec.eps_grid.size();
        const auto n_seed = static_cast<std::size_t>(spec.seeds);
        const std::size_t total = spec.policies.size() * n_eps * n_seed;

        SweepSummary out;
        out.experiment = spec.experiment;
        out.model = sc.model.name;
        out.horizon = sc.horizon;
        out.nominal_cost = initial.begin()->second.cost;
        out.rows.resize(total);

        parallel_for(total, spec.workers, [&](std::size_t idx) {
            const std::size_t p = idx / (n_eps * n_seed);
            const std::size_t e = (idx / n_seed) % n_eps;
            const std::size_t s = idx % n_seed;
            const PolicyConfig &cfg = spec.policies[p];
            const double eps = spec.eps_grid[e];
            const NoiseStream noise(spec.base_seed + s);
            ExecutionOptions opts{spec.solver, &initial.at(cfg.gain_source)};

            RolloutRow &row = out.rows[idx];
            RolloutRecord rec;
            if (spec.multi_agent())
            {
                MultiAgentRecord m = execute_multi_agent(sc, spec.agent_costs, cfg, eps, noise, opts);
                row.communication = m.communication_events;
                rec = std::move(m.joint);
            }
            else
            {
                rec = execute_policy(sc, cfg, eps, noise, opts);
            }
            row.policy = cfg.name();
            row.model = sc.model.name;
            row.eps = eps;
            row.seed = noise.seed();
            row.J = rec.cost;
            row.J_bar = rec.nominal_cost;
            row.ratio = rec.ratio;
            row.replans = rec.replan_count();
            row.total_plan_ms = rec.total_plan_ms();
            row.failed_solves = rec.failed_solves;
            row.failed = rec.diverged || !std::isfinite(rec.cost) || rec.cost > spec.divergence_cap * rec.nominal_cost;
            row.step_ms = std::move(rec.step_ms);
        });

        for (std::size_t p = 0; p < spec.policies.size(); ++p)
            for (std::size_t e = 0; e < n_eps; ++e)
            {
                CellSummary cell;
                cell.policy = spec.policies[p].name();
                cell.eps = spec.eps_grid[e];
                cell.mean_step_ms.assign(static_cast<std::size_t>(sc.horizon), 0.0);
                std::vector<double> ratio, cost, replans, plan_ms, step_ms;
                for (std::size_t s = 0; s < n_seed; ++s)
                {
                    const RolloutRow &row = out.rows[(p * n_eps + e) * n_seed + s];
                    if (row.failed)
                    {
                        ++cell.failures;
                        continue;
                    }
                    ratio.push_back(row.ratio);
                    cost.push_back(row.J);
                    replans.push_back(row.replans);
                    plan_ms.push_back(row.total_plan_ms);
                    step_ms.push_back(row.total_plan_ms / sc.horizon);
                    for (std::size_t t = 0; t < row.step_ms.size(); ++t)
                        cell.mean_step_ms[t] += row.step_ms[t];
                }
                cell.samples = static_cast<int>(ratio.size());
                for (double &v : cell.mean_step_ms)
                    v = cell.samples > 0 ? v / cell.samples : kNaN;
                cell.ratio = sample_stat(ratio);
                cell.cost = sample_stat(cost);
                cell.replans = sample_stat(replans);
                cell.plan_ms = sample_stat(plan_ms);
                cell.step_plan_ms = sample_stat(step_ms);
                out.cells.push_back(std::move(cell));
            }
        return out;
    }

    void write_rollouts_csv(std::ostream &os, const SweepSummary &summary)
    {
        const bool multi = std::any_of(summary.rows.begin(), summary.rows.end(),
                                       [](const RolloutRow &r) { return r.communication > 0; });
        os << "policy,model,eps,seed,J,J_bar,ratio,replans,total_plan_ms,failed" << (multi ? ",communication" : "")
           << '\n';
        for (const auto &r : summary.rows)
        {
            os << r.policy << ',' << r.model << ',' << format_number(r.eps) << ',' << r.seed << ','
               << format_number(r.J) << ',' << format_number(r.J_bar) << ',' << format_number(r.ratio) << ','
               << r.replans << ',' << format_number(r.total_plan_ms) << ',' << (r.failed ? 1 : 0);
            if (multi)
                os << ',' << r.communication;
            os << '\n';
        }
    }

    void write_summary_csv(std::ostream &os, const SweepSummary &summary)
    {
        os << "policy,model,eps,samples,failures,ratio_mean,ratio_std,cost_mean,cost_std,"
              "replans_mean,replans_std,plan_ms_mean,plan_ms_std,step_ms_mean,step_ms_std\n";
        for (const auto &c : summary.cells)
            os << c.policy << ',' << summary.model << ',' << format_number(c.eps) << ',' << c.samples << ','
               << c.failures << ',' << format_number(c.ratio.mean) << ',' << format_number(c.ratio.std) << ','
               << format_number(c.cost.mean) << ',' << format_number(c.cost.std) << ','
               << format_number(c.replans.mean) << ',' << format_number(c.replans.std) << ','
               << format_number(c.plan_ms.mean) << ',' << format_number(c.plan_ms.std) << ','
               << format_number(c.step_plan_ms.mean) << ',' << format_number(c.step_plan_ms.std) << '\n';
    }

    void write_timing_csv(std::ostream &os, const SweepSummary &summary)
    {
        os << "policy,eps,t,mean_step_ms\n";
        for (const auto &c : summary.cells)
            for (std::size_t t = 0; t < c.mean_step_ms.size(); ++t)
                os << c.policy << ',' << format_number(c.eps) << ',' << t << ',' << format_number(c.mean_step_ms[t]) << '\n';
    }

    ScalingFit loglog_fit(const std::vector<double> &x, const std::vector<double> &y)
    {
        if (x.size() != y.size())
            throw ContractViolation("loglog_fit: size mismatch");
        std::vector<double> lx, ly;
        for (std::size_t i = 0; i < x.size(); ++i)
            if (x[i] > 0.0 && y[i] > 0.0 && std::isfinite(x[i]) && std::isfinite(y[i]))
            {
                lx.push_back(std::log(x[i]));
                ly.push_back(std::log(y[i]));
            }
        ScalingFit f;
        f.points = static_cast<int>(lx.size());
        if (f.points < 2)
            return f;
        const double n = f.points;
        double mx = 0.0, my = 0.0;
        for (std::size_t i = 0; i < lx.size(); ++i)
        {
            mx += lx[i];
            my += ly[i];
        }
        mx /= n;
        my /= n;
        double sxx = 0.0, sxy = 0.0, syy = 0.0;
        for (std::size_t i = 0; i < lx.size(); ++i)
        {
            sxx += (lx[i] - mx) * (lx[i] - mx);
            sxy += (lx[i] - mx) * (ly[i] - my);
            syy += (ly[i] - my) * (ly[i] - my);
        }
        if (sxx == 0.0)
            return f;
        f.slope = sxy / sxx;
        f.intercept = my - f.slope * mx;
        f.r2 = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
        f.low_confidence = f.points < 3 || f.r2 < 0.9;
        return f;
    }

    DecouplingReport verify_decoupling(const Scenario &sc, const NominalPlan &plan, const DecouplingSpec &spec)
    {
        sc.validate();
        if (plan.t0 != 0 || plan.horizon() != sc.horizon || plan.gains.L.size() != plan.ubar.size())
            throw ContractViolation("verify_decoupling: plan must cover the full horizon with gains");
        if (spec.seeds < 2 || spec.eps_grid.empty())
            throw ContractViolation("verify_decoupling: need at least two seeds and one noise level");
        for (double e : spec.eps_grid)
            if (!(e > 0.0))
                throw ContractViolation("verify_decoupling: noise levels must be positive");

        const int T = plan.horizon();
        const auto Ts = static_cast<std::size_t>(T);
        const LinearizedSystem lin = linearize(sc.model, plan.xbar, plan.ubar);
        std::vector<Matrix> Acl(Ts);
        std::vector<Vector> c(Ts + 1);
        for (std::size_t t = 0; t < Ts; ++t)
        {
            const Matrix &L = plan.gains.L[t];
            Acl[t] = lin.A[t] - lin.B[t] * L;
            const Control &u = plan.ubar[t];
            const Vector lx = fd_gradient([&](const Vector &x) { return sc.objective->stage(x, u); }, plan.xbar[t]);
            const Vector lu = fd_gradient([&](const Vector &v) { return sc.objective->stage(plan.xbar[t], v); }, u);
            c[t] = lx - L.transpose() * lu;
        }
        c[Ts] = fd_gradient([&](const Vector &x) { return sc.objective->terminal(x); }, plan.xbar[Ts]);

        struct Sample
        {
            double J = 0.0;
            double J_neg = 0.0;
            double dJ1 = 0.0;
            double path = 0.0;
        };
        const std::size_t n_eps = spec.eps_grid.size();
        const auto n_seed = static_cast<std::size_t>(spec.seeds);
        std::vector<Sample> samples(n_eps * n_seed);

        auto closed_loop = [&](const NoiseStream &noise, double eps, double sign, std::vector<State> *xs) {
            double J = 0.0;
            State x = sc.x0;
            if (xs)
                xs->assign(1, x);
            for (int t = 0; t < T; ++t)
            {
                const auto ts = static_cast<std::size_t>(t);
                const Control u = plan.ubar[ts] - plan.gains.L[ts] * (x - plan.xbar[ts]);
                J += sc.objective->stage(x, u);
                x = step(sc.model, x, u, sign * scenario_noise(sc, noise, t), eps, t);
                if (xs)
                    xs->push_back(x);
            }
            return J + sc.objective->terminal(x);
        };

        parallel_for(samples.size(), spec.workers, [&](std::size_t idx) {
            const std::size_t e = idx / n_seed;
            const std::size_t s = idx % n_seed;
            const double eps = spec.eps_grid[e];
            const NoiseStream noise(spec.base_seed + s);
            Sample &out = samples[idx];
            std::vector<State> xs;
            out.J = closed_loop(noise, eps, 1.0, &xs);
            out.J_neg = closed_loop(noise, eps, -1.0, nullptr);

            Vector dxl = Vector::Zero(sc.model.n_x);
            double dJ1 = 0.0, worst = 0.0;
            for (std::size_t t = 0; t <= Ts; ++t)
            {
                dJ1 += c[t].dot(dxl);
                worst = std::max(worst, ((xs[t] - plan.xbar[t]) - dxl).norm());
                if (t < Ts)
                    dxl = Acl[t] * dxl + eps * lin.B[t] * scenario_noise(sc, noise, static_cast<int>(t));
            }
            out.dJ1 = dJ1;
            out.path = worst;
        });

        DecouplingReport rep;
        rep.model = sc.model.name;
        rep.nominal_cost = plan.cost;
        std::vector<double> eps_v, gap, paired, var_res, path;
        for (std::size_t e = 0; e < n_eps; ++e)
        {
            std::vector<double> J, pair, dJ1, pe;
            for (std::size_t s = 0; s < n_seed; ++s)
            {
                const Sample &smp = samples[e * n_seed + s];
                J.push_back(smp.J);
                pair.push_back(0.5 * (smp.J + smp.J_neg));
                dJ1.push_back(smp.dJ1);
                pe.push_back(smp.path);
            }
            DecouplingLevel lv;
            lv.eps = spec.eps_grid[e];
            lv.samples = spec.seeds;
            const Stat sJ = sample_stat(J), sd = sample_stat(dJ1);
            lv.mean_cost = sJ.mean;
            lv.cost_gap = std::abs(sJ.mean - plan.cost);
            lv.paired_cost_gap = std::abs(sample_stat(pair).mean - plan.cost);
            lv.var_cost = sJ.std * sJ.std;
            lv.var_linear = sd.std * sd.std;
            lv.var_residual = std::abs(lv.var_cost - lv.var_linear);
            lv.path_error = sample_stat(pe).mean;
            rep.levels.push_back(lv);
            eps_v.push_back(lv.eps);
            gap.push_back(lv.cost_gap);
            paired.push_back(lv.paired_cost_gap);
            var_res.push_back(lv.var_residual);
            path.push_back(lv.path_error);
        }
        rep.cost_fit = loglog_fit(eps_v, gap);
        const ScalingFit paired_fit = loglog_fit(eps_v, paired);
        if (!plausible_quadratic(rep.cost_fit) && plausible_quadratic(paired_fit))
        {
            rep.cost_fit = paired_fit;
            rep.cost_estimator = "paired";
        }
        rep.variance_fit = loglog_fit(eps_v, var_res);
        rep.path_fit = loglog_fit(eps_v, path);
        return rep;
    }

    std::string DecouplingReport::to_json() const
    {
        nlohmann::json j;
        j["model"] = model;
        j["nominal_cost"] = nominal_cost;
        auto &lv = j["levels"] = nlohmann::json::array();
        for (const auto &l : levels)
            lv.push_back({{"eps", l.eps},
                          {"samples", l.samples},
                          {"mean_cost", l.mean_cost},
                          {"cost_gap", l.cost_gap},
                          {"paired_cost_gap", l.paired_cost_gap},
                          {"var_cost", l.var_cost},
                          {"var_linear", l.var_linear},
                          {"var_residual", l.var_residual},
                          {"path_error", l.path_error}});
        j["cost_fit"] = fit_json(cost_fit);
        j["cost_estimator"] = cost_estimator;
        j["variance_fit"] = fit_json(variance_fit);
        j["path_fit"] = fit_json(path_fit);
        return j.dump(2);
    }

    HighNoiseReport high_noise_check(const Scenario &sc, double eps, std::vector<int> horizons, int seeds,
                                     std::uint64_t base_seed, int workers, const SolverOptions &solver)
    {
        sc.validate();
        if (!(eps >= 0.0) || seeds < 1 || horizons.empty())
            throw ContractViolation("high_noise_check: need eps >= 0, seeds >= 1 and a horizon grid");
        std::sort(horizons.begin(), horizons.end());
        horizons.erase(std::unique(horizons.begin(), horizons.end()), horizons.end());
        for (int h : horizons)
            if (h < 1 || h > sc.horizon)
                throw ContractViolation("high_noise_check: H_c out of range: " + std::to_string(h));

        const NominalPlan init = initial_plan(sc, GainSource::SurrogateLqr, solver);
        const auto n_seed = static_cast<std::size_t>(seeds);
        std::vector<RolloutRecord> recs(horizons.size() * n_seed);
        parallel_for(recs.size(), workers, [&](std::size_t idx) {
            const int h = horizons[idx / n_seed];
            PolicyConfig cfg;
            cfg.kind = h == sc.horizon ? PolicyKind::MPC : PolicyKind::MPCSH;
            cfg.H_c = h == sc.horizon ? 0 : h;
            ExecutionOptions opts{solver, &init};
            recs[idx] = execute_mpc(sc, cfg, eps, NoiseStream(base_seed + idx % n_seed), opts);
        });

        HighNoiseReport rep;
        rep.eps = eps;
        rep.nominal_cost = init.cost;
        for (std::size_t k = 0; k < horizons.size(); ++k)
        {
            HighNoiseEntry en;
            en.H_c = horizons[k];
            std::vector<double> cost, ratio, ms;
            for (std::size_t s = 0; s < n_seed; ++s)
            {
                const RolloutRecord &r = recs[k * n_seed + s];
                if (r.diverged || !std::isfinite(r.cost))
                {
                    ++en.failures;
                    continue;
                }
                cost.push_back(r.cost);
                ratio.push_back(r.ratio);
                ms.push_back(r.total_plan_ms());
            }
            en.cost = sample_stat(cost);
            en.ratio = sample_stat(ratio);
            en.plan_ms = sample_stat(ms);
            rep.entries.push_back(en);
        }
        return rep;
    }

    std::string HighNoiseReport::to_json() const
    {
        nlohmann::json j;
        j["eps"] = eps;
        j["nominal_cost"] = nominal_cost;
        auto &es = j["entries"] = nlohmann::json::array();
        for (const auto &e : entries)
            es.push_back({{"H_c", e.H_c}, {"cost", stat_json(e.cost)}, {"ratio", stat_json(e.ratio)},
                          {"plan_ms", stat_json(e.plan_ms)}, {"failures", e.failures}});
        return j.dump(2);
    }
} // namespace stochplan
