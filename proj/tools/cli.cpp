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

#include "cli.hpp"

#include "stochplan/config.hpp"
#include "stochplan/errors.hpp"
#include "stochplan/montecarlo.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

namespace stochplan::cli
{
    namespace
    {
        namespace fs = std::filesystem;

        struct Options
        {
            std::string config;
            std::optional<int> workers;
            std::optional<std::string> out;
            std::optional<std::uint64_t> seed;
            std::optional<std::string> policy;
            std::optional<double> eps;
            std::vector<std::string> inputs;
        };

        ExperimentConfig load(const Options &o)
        {
            ExperimentConfig c = load_config(o.config);
            if (o.workers)
                c.workers = *o.workers;
            if (o.out)
                c.out = *o.out;
            if (o.seed)
                c.base_seed = *o.seed;
            if (o.policy)
                c.run.policy = *o.policy;
            if (o.eps)
                c.run.eps = *o.eps;
            c.validate();
            return c;
        }

        fs::path experiment_dir(const ExperimentConfig &c)
        {
            fs::path dir = fs::path(c.out) / c.experiment;
            fs::create_directories(dir);
            return dir;
        }

        void write_file(const fs::path &path, const std::string &content)
        {
            std::ofstream f(path, std::ios::binary);
            if (!f)
                throw std::runtime_error("cannot write " + path.string());
            f << content;
        }

        template <typename Writer>
        void write_with(const fs::path &path, Writer &&writer)
        {
            std::ostringstream os;
            writer(os);
            write_file(path, os.str());
        }

        nlohmann::json vectors(const std::vector<Vector> &vs)
        {
            auto a = nlohmann::json::array();
            for (const auto &v : vs)
                a.push_back(std::vector<double>(v.data(), v.data() + v.size()));
            return a;
        }

        void write_trajectory(std::ostream &os, const RolloutRecord &r, int n_x, int n_u)
        {
            os << "t";
            for (int i = 0; i < n_x; ++i)
                os << ",x" << i;
            for (int i = 0; i < n_u; ++i)
                os << ",u" << i;
            for (int i = 0; i < n_x; ++i)
                os << ",xbar" << i;
            for (int i = 0; i < n_u; ++i)
                os << ",ubar" << i;
            os << ",step_ms\n";
            for (std::size_t t = 0; t < r.states.size(); ++t)
            {
                os << t;
                for (int i = 0; i < n_x; ++i)
                    os << ',' << format_number(r.states[t](i));
                for (int i = 0; i < n_u; ++i)
                    os << ',' << (t < r.controls.size() ? format_number(r.controls[t](i)) : "");
                for (int i = 0; i < n_x; ++i)
                    os << ',' << (t < r.nominal_states.size() ? format_number(r.nominal_states[t](i)) : "");
                for (int i = 0; i < n_u; ++i)
                    os << ',' << (t < r.nominal_controls.size() ? format_number(r.nominal_controls[t](i)) : "");
                os << ',' << (t < r.step_ms.size() ? format_number(r.step_ms[t]) : "") << '\n';
            }
        }

        int cmd_run(const Options &o, std::ostream &out)
        {
            const ExperimentConfig c = load(o);
            const Scenario sc = c.scenario();
            const PolicyConfig &cfg = c.policy(c.run.policy);
            const NoiseStream noise(c.base_seed);
            const NominalPlan plan = initial_plan(sc, cfg.gain_source, c.solver);
            const ExecutionOptions opts{c.solver, &plan};

            RolloutRecord rec;
            nlohmann::json extra = nlohmann::json::object();
            if (c.multi_agent())
            {
                MultiAgentRecord m = execute_multi_agent(sc, c.agent_costs(), cfg, c.run.eps, noise, opts);
                extra["communication_events"] = m.communication_events;
                auto agents = nlohmann::json::array();
                for (const auto &a : m.agents)
                    agents.push_back({{"J", a.cost}, {"J_bar", a.nominal_cost}, {"ratio", a.ratio},
                                      {"terminal_error", a.terminal_error}});
                extra["agents"] = agents;
                rec = std::move(m.joint);
            }
            else
            {
                rec = execute_policy(sc, cfg, c.run.eps, noise, opts);
            }
            const bool failed = rec.diverged || !std::isfinite(rec.cost) || rec.cost > c.divergence_cap * rec.nominal_cost;

            const fs::path dir = experiment_dir(c);
            write_with(dir / "trajectory.csv", [&](std::ostream &os) { write_trajectory(os, rec, sc.model.n_x, sc.model.n_u); });

            nlohmann::json j;
            j["preset"] = c.preset;
            j["model"] = sc.model.name;
            j["policy"] = rec.policy;
            j["eps"] = rec.eps;
            j["seed"] = rec.seed;
            j["J"] = rec.cost;
            j["J_bar"] = rec.nominal_cost;
            j["ratio"] = rec.ratio;
            j["terminal_error"] = rec.terminal_error;
            j["failed"] = failed;
            j["failed_solves"] = rec.failed_solves;
            j["total_plan_ms"] = rec.total_plan_ms();
            auto ev = nlohmann::json::array();
            for (const auto &e : rec.replans)
                ev.push_back({{"t", e.t}, {"trigger", e.trigger}, {"solve_ms", e.solve_ms}, {"succeeded", e.succeeded}});
            j["replans"] = ev;
            j["nominal"] = {{"states", vectors(plan.xbar)}, {"controls", vectors(plan.ubar)},
                            {"cost", plan.cost}, {"iterations", plan.iterations}, {"converged", plan.converged}};
            j["gains"] = nlohmann::json::parse(gain_schedule_json(plan.gains));
            j.update(extra);
            write_file(dir / "plan.json", j.dump(2) + "\n");
            write_file(dir / "config.copy", config_json(c));

            out << rec.policy << " eps=" << rec.eps << " seed=" << rec.seed << " J/Jbar=" << rec.ratio
                << " replans=" << rec.replan_count() << " terminal_error=" << rec.terminal_error << '\n'
                << "wrote " << (dir / "trajectory.csv").string() << '\n';
            return failed ? kRolloutFailures : kOk;
        }

        int cmd_sweep(const Options &o, std::ostream &out)
        {
            const ExperimentConfig c = load(o);
            const SweepSummary s = run_sweep(c.sweep());
            const fs::path dir = experiment_dir(c);
            write_with(dir / "rollouts.csv", [&](std::ostream &os) { write_rollouts_csv(os, s); });
            write_with(dir / "summary.csv", [&](std::ostream &os) { write_summary_csv(os, s); });
            write_with(dir / "timing.csv", [&](std::ostream &os) { write_timing_csv(os, s); });
            write_file(dir / "config.copy", config_json(c));
            for (const auto &cell : s.cells)
                out << cell.policy << " eps=" << cell.eps << " J/Jbar=" << cell.ratio.mean << " +- "
                    << cell.ratio.std << " replans=" << cell.replans.mean << " failures=" << cell.failures << '\n';
            out << "wrote " << s.rows.size() << " rollouts to " << dir.string() << '\n';
            return s.failures() > 0 ? kRolloutFailures : kOk;
        }

        int cmd_verify(const Options &o, std::ostream &out)
        {
            const ExperimentConfig c = load(o);
            const Scenario sc = c.scenario();
            const NominalPlan plan = initial_plan(sc, GainSource::SurrogateLqr, c.solver);
            DecouplingSpec ds;
            ds.eps_grid = c.verify.eps;
            ds.seeds = c.verify.seeds;
            ds.base_seed = c.base_seed;
            ds.workers = c.workers;
            const DecouplingReport dec = verify_decoupling(sc, plan, ds);
            const HighNoiseReport hn = high_noise_check(sc, c.verify.high_noise_eps, c.verify.high_noise_horizons,
                                                        c.verify.high_noise_seeds, c.base_seed, c.workers, c.solver);
            nlohmann::json j;
            j["decoupling"] = nlohmann::json::parse(dec.to_json());
            j["high_noise"] = nlohmann::json::parse(hn.to_json());
            const fs::path dir = experiment_dir(c);
            write_file(dir / "scaling.json", j.dump(2) + "\n");
            write_file(dir / "config.copy", config_json(c));

            out << "cost gap slope " << dec.cost_fit.slope << " (r2 " << dec.cost_fit.r2 << ", "
                << dec.cost_estimator << ")\n"
                << "variance residual slope " << dec.variance_fit.slope << " (r2 " << dec.variance_fit.r2 << ")\n"
                << "path error slope " << dec.path_fit.slope << " (r2 " << dec.path_fit.r2 << ")\n";
            int failures = 0;
            for (const auto &e : hn.entries)
            {
                out << "H_c=" << e.H_c << " cost=" << e.cost.mean << " plan_ms=" << e.plan_ms.mean
                    << " failures=" << e.failures << '\n';
                failures += e.failures;
            }
            out << "wrote " << (dir / "scaling.json").string() << '\n';
            return failures > 0 ? kRolloutFailures : kOk;
        }

        std::vector<std::string> split(const std::string &line)
        {
            std::vector<std::string> out;
            std::stringstream ss(line);
            std::string cell;
            while (std::getline(ss, cell, ','))
                out.push_back(cell);
            if (!line.empty() && line.back() == ',')
                out.emplace_back();
            return out;
        }

        // Joins summary.csv files into one wide table: one row per (model, eps),
        // one column group per policy.
        int cmd_report(const Options &o, std::ostream &out)
        {
            std::vector<fs::path> inputs(o.inputs.begin(), o.inputs.end());
            fs::path dest;
            if (!o.config.empty())
            {
                const ExperimentConfig c = load(o);
                const fs::path dir = fs::path(c.out) / c.experiment;
                if (inputs.empty())
                    inputs.push_back(dir / "summary.csv");
                dest = dir / "report.csv";
            }
            if (inputs.empty())
                throw ConfigError("", "report needs --config or summary CSV inputs");
            if (dest.empty())
                dest = (o.out ? fs::path(*o.out) : inputs.front().parent_path()) / "report.csv";

            static const std::vector<std::string> kStats{"ratio_mean", "ratio_std", "replans_mean", "replans_std",
                                                         "plan_ms_mean", "plan_ms_std", "failures"};
            std::vector<std::string> policies;
            std::map<std::pair<std::string, std::string>, std::map<std::string, std::string>> table;
            std::vector<std::pair<std::string, std::string>> keys;
            for (const auto &path : inputs)
            {
                std::ifstream in(path);
                if (!in)
                    throw ConfigError("", "cannot read " + path.string());
                std::string line;
                std::getline(in, line);
                const auto header = split(line);
                std::map<std::string, std::size_t> col;
                for (std::size_t i = 0; i < header.size(); ++i)
                    col[header[i]] = i;
                for (const char *need : {"policy", "model", "eps"})
                    if (!col.count(need))
                        throw ConfigError("", path.string() + ": missing column " + need);
                for (const auto &s : kStats)
                    if (!col.count(s))
                        throw ConfigError("", path.string() + ": missing column " + s);
                while (std::getline(in, line))
                {
                    if (line.empty())
                        continue;
                    const auto cells = split(line);
                    if (cells.size() != header.size())
                        throw ConfigError("", path.string() + ": ragged row");
                    const std::string &policy = cells[col["policy"]];
                    const auto key = std::make_pair(cells[col["model"]], cells[col["eps"]]);
                    if (std::find(policies.begin(), policies.end(), policy) == policies.end())
                        policies.push_back(policy);
                    if (!table.count(key))
                        keys.push_back(key);
                    auto &row = table[key];
                    for (const auto &s : kStats)
                        row[policy + "_" + s] = cells[col[s]];
                }
            }
            std::stable_sort(keys.begin(), keys.end(), [](const auto &a, const auto &b) {
                return a.first != b.first ? a.first < b.first : std::stod(a.second) < std::stod(b.second);
            });
            std::ostringstream os;
            os << "model,eps";
            for (const auto &p : policies)
                for (const auto &s : kStats)
                    os << ',' << p << '_' << s;
            os << '\n';
            for (const auto &k : keys)
            {
                os << k.first << ',' << k.second;
                const auto &row = table[k];
                for (const auto &p : policies)
                    for (const auto &s : kStats)
                    {
                        auto it = row.find(p + "_" + s);
                        os << ',' << (it == row.end() ? "" : it->second);
                    }
                os << '\n';
            }
            fs::create_directories(dest.parent_path().empty() ? fs::path(".") : dest.parent_path());
            write_file(dest, os.str());
            out << "wrote " << keys.size() << " rows to " << dest.string() << '\n';
            return kOk;
        }
    } // namespace

    int main(int argc, const char *const *argv, std::ostream &out, std::ostream &err)
    {
        CLI::App app{"Stochastic motion planning experiments"};
        app.require_subcommand(1);
        Options o;

        auto common = [&](CLI::App *sub, bool config_required) {
            auto *opt = sub->add_option("--config", o.config, "experiment config (JSON)");
            if (config_required)
                opt->required()->check(CLI::ExistingFile);
            sub->add_option("--workers", o.workers, "worker threads")->check(CLI::PositiveNumber);
            sub->add_option("--out", o.out, "output directory");
            sub->add_option("--seed", o.seed, "base seed");
        };
        auto *run = app.add_subcommand("run", "single rollout; writes trajectory.csv and plan.json");
        common(run, true);
        run->add_option("--policy", o.policy, "policy name from the config");
        run->add_option("--eps", o.eps, "noise scale")->check(CLI::NonNegativeNumber);
        auto *sweep = app.add_subcommand("sweep", "Monte Carlo sweep; writes rollouts.csv and summary.csv");
        common(sweep, true);
        auto *verify = app.add_subcommand("verify", "scaling-law and high-noise checks; writes scaling.json");
        common(verify, true);
        auto *report = app.add_subcommand("report", "join summary CSVs into report.csv");
        common(report, false);
        report->add_option("inputs", o.inputs, "summary.csv files");

        try
        {
            app.parse(argc, argv);
        }
        catch (const CLI::CallForHelp &)
        {
            out << app.help();
            return kOk;
        }
        catch (const CLI::CallForAllHelp &)
        {
            out << app.help("", CLI::AppFormatMode::All);
            return kOk;
        }
        catch (const CLI::ParseError &e)
        {
            err << "error: " << e.what() << '\n';
            return kError;
        }

        try
        {
            if (run->parsed())
                return cmd_run(o, out);
            if (sweep->parsed())
                return cmd_sweep(o, out);
            if (verify->parsed())
                return cmd_verify(o, out);
            return cmd_report(o, out);
        }
        catch (const ConfigError &e)
        {
            err << "config error: " << e.what() << '\n';
        }
        catch (const std::exception &e)
        {
            err << "error: " << e.what() << '\n';
        }
        return kError;
    }
} // namespace stochplan::cli
