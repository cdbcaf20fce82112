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

#include "stochplan/config.hpp"

#include "stochplan/errors.hpp"

#include "json.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace stochplan
{
    namespace
    {
        using nlohmann::json;

        std::string join(const std::string &path, const std::string &key)
        {
            return path.empty() ? key : path + "." + key;
        }

        std::string index(const std::string &path, std::size_t i)
        {
            return path + "[" + std::to_string(i) + "]";
        }

        // Object view that remembers which keys were read so the rest can be
        // reported as unknown.
        class Fields
        {
        public:
            Fields(const json &obj, std::string path) : obj_(obj), path_(std::move(path))
            {
                if (!obj_.is_object())
                    throw ConfigError(path_, "expected an object");
            }

            const json *find(const std::string &key)
            {
                seen_.insert(key);
                auto it = obj_.find(key);
                return it == obj_.end() ? nullptr : &*it;
            }

            std::string path(const std::string &key) const { return join(path_, key); }

            void reject_unknown() const
            {
                for (auto it = obj_.begin(); it != obj_.end(); ++it)
                    if (!seen_.count(it.key()))
                        throw ConfigError(join(path_, it.key()), "unknown key");
            }

        private:
            const json &obj_;
            std::string path_;
            std::set<std::string> seen_;
        };

        double as_number(const json &v, const std::string &path)
        {
            if (!v.is_number())
                throw ConfigError(path, "expected a number");
            return v.get<double>();
        }

        long long as_integer(const json &v, const std::string &path)
        {
            if (!v.is_number_integer())
                throw ConfigError(path, "expected an integer");
            return v.get<long long>();
        }

        std::string as_string(const json &v, const std::string &path)
        {
            if (!v.is_string())
                throw ConfigError(path, "expected a string");
            return v.get<std::string>();
        }

        std::vector<double> as_numbers(const json &v, const std::string &path)
        {
            if (!v.is_array())
                throw ConfigError(path, "expected an array of numbers");
            std::vector<double> out;
            for (std::size_t i = 0; i < v.size(); ++i)
                out.push_back(as_number(v[i], index(path, i)));
            return out;
        }

        std::vector<int> as_integers(const json &v, const std::string &path)
        {
            if (!v.is_array())
                throw ConfigError(path, "expected an array of integers");
            std::vector<int> out;
            for (std::size_t i = 0; i < v.size(); ++i)
                out.push_back(static_cast<int>(as_integer(v[i], index(path, i))));
            return out;
        }

        PolicyConfig parse_policy(const json &v, const std::string &path)
        {
            Fields f(v, path);
            PolicyConfig p;
            const json *kind = f.find("kind");
            if (!kind)
                throw ConfigError(f.path("kind"), "missing");
            try
            {
                p.kind = parse_policy_kind(as_string(*kind, f.path("kind")));
            }
            catch (const ContractViolation &e)
            {
                throw ConfigError(f.path("kind"), e.what());
            }
            if (const json *x = f.find("J_thresh"))
                p.J_thresh = as_number(*x, f.path("J_thresh"));
            if (const json *x = f.find("H_c"))
                p.H_c = static_cast<int>(as_integer(*x, f.path("H_c")));
            if (const json *x = f.find("gain_source"))
            {
                try
                {
                    p.gain_source = parse_gain_source(as_string(*x, f.path("gain_source")));
                }
                catch (const ContractViolation &e)
                {
                    throw ConfigError(f.path("gain_source"), e.what());
                }
            }
            if (const json *x = f.find("label"))
                p.label = as_string(*x, f.path("label"));
            f.reject_unknown();
            return p;
        }

        void apply_diag(Matrix &m, const std::vector<double> &d, const std::string &path)
        {
            if (d.empty())
                return;
            if (static_cast<Eigen::Index>(d.size()) != m.rows())
                throw ConfigError(path, "expected " + std::to_string(m.rows()) + " diagonal entries");
            for (std::size_t i = 0; i < d.size(); ++i)
                if (!(d[i] >= 0.0))
                    throw ConfigError(index(path, i), "weights must be non-negative");
            m = Eigen::Map<const Vector>(d.data(), static_cast<Eigen::Index>(d.size())).asDiagonal();
        }

        ExperimentConfig from_json(const json &root)
        {
            Fields f(root, "");
            ExperimentConfig c;
            bool run_policy_given = false;
            if (const json *x = f.find("preset"))
                c.preset = as_string(*x, "preset");
            else
                throw ConfigError("preset", "missing");
            c.experiment = c.preset;
            if (const json *x = f.find("experiment"))
                c.experiment = as_string(*x, "experiment");
            if (const json *x = f.find("weights"))
            {
                Fields w(*x, "weights");
                if (const json *y = w.find("Wx"))
                    c.weights.Wx = as_numbers(*y, "weights.Wx");
                if (const json *y = w.find("Wu"))
                    c.weights.Wu = as_numbers(*y, "weights.Wu");
                if (const json *y = w.find("Wxf"))
                    c.weights.Wxf = as_numbers(*y, "weights.Wxf");
                w.reject_unknown();
            }
            if (const json *x = f.find("horizon"))
                c.horizon = static_cast<int>(as_integer(*x, "horizon"));
            if (const json *x = f.find("policies"))
            {
                if (!x->is_array())
                    throw ConfigError("policies", "expected an array");
                for (std::size_t i = 0; i < x->size(); ++i)
                    c.policies.push_back(parse_policy((*x)[i], index("policies", i)));
            }
            else
            {
                c.policies = default_policies();
            }
            c.eps_grid = default_eps_grid();
            if (const json *x = f.find("eps"))
                c.eps_grid = as_numbers(*x, "eps");
            if (const json *x = f.find("seeds"))
                c.seeds = static_cast<int>(std::clamp<long long>(as_integer(*x, "seeds"), -1, 1LL << 30));
            if (const json *x = f.find("base_seed"))
            {
                const long long s = as_integer(*x, "base_seed");
                if (s < 0)
                    throw ConfigError("base_seed", "must be non-negative");
                c.base_seed = static_cast<std::uint64_t>(s);
            }
            if (const json *x = f.find("workers"))
                c.workers = static_cast<int>(std::clamp<long long>(as_integer(*x, "workers"), -1, 1024));
            if (const json *x = f.find("out"))
                c.out = as_string(*x, "out");
            if (const json *x = f.find("divergence_cap"))
                c.divergence_cap = as_number(*x, "divergence_cap");
            if (const json *x = f.find("solver"))
            {
                Fields s(*x, "solver");
                if (const json *y = s.find("max_iterations"))
                    c.solver.max_iterations = static_cast<int>(as_integer(*y, "solver.max_iterations"));
                if (const json *y = s.find("cost_tolerance"))
                    c.solver.cost_tolerance = as_number(*y, "solver.cost_tolerance");
                if (const json *y = s.find("control_tolerance"))
                    c.solver.control_tolerance = as_number(*y, "solver.control_tolerance");
                s.reject_unknown();
            }
            if (const json *x = f.find("run"))
            {
                Fields r(*x, "run");
                if (const json *y = r.find("policy"))
                {
                    c.run.policy = as_string(*y, "run.policy");
                    run_policy_given = true;
                }
                if (const json *y = r.find("eps"))
                    c.run.eps = as_number(*y, "run.eps");
                r.reject_unknown();
            }
            if (const json *x = f.find("verify"))
            {
                Fields v(*x, "verify");
                if (const json *y = v.find("eps"))
                    c.verify.eps = as_numbers(*y, "verify.eps");
                if (const json *y = v.find("seeds"))
                    c.verify.seeds = static_cast<int>(std::clamp<long long>(as_integer(*y, "verify.seeds"), -1, 1LL << 30));
                if (const json *y = v.find("high_noise_eps"))
                    c.verify.high_noise_eps = as_number(*y, "verify.high_noise_eps");
                if (const json *y = v.find("high_noise_horizons"))
                    c.verify.high_noise_horizons = as_integers(*y, "verify.high_noise_horizons");
                if (const json *y = v.find("high_noise_seeds"))
                    c.verify.high_noise_seeds =
                        static_cast<int>(std::clamp<long long>(as_integer(*y, "verify.high_noise_seeds"), -1, 1LL << 30));
                v.reject_unknown();
            }
            f.reject_unknown();
            c.validate();
            if (run_policy_given)
                (void)c.policy(c.run.policy);
            return c;
        }
    } // namespace

    std::vector<PolicyConfig> default_policies()
    {
        PolicyConfig mpc;
        mpc.kind = PolicyKind::MPC;
        PolicyConfig sh;
        sh.kind = PolicyKind::MPCSH;
        sh.H_c = 7;
        PolicyConfig tlqr;
        tlqr.kind = PolicyKind::TLQR;
        PolicyConfig tlqr2;
        tlqr2.kind = PolicyKind::TLQR2;
        tlqr2.J_thresh = 0.02;
        return {mpc, sh, tlqr, tlqr2};
    }

    std::vector<double> default_eps_grid()
    {
        std::vector<double> g;
        for (int i = 0; i <= 9; ++i)
            g.push_back(i / 10.0);
        return g;
    }

    void ExperimentConfig::validate() const
    {
        const auto names = preset_names();
        if (std::find(names.begin(), names.end(), preset) == names.end())
            throw ConfigError("preset", "unknown preset '" + preset + "'");
        if (experiment.empty() || experiment.find('/') != std::string::npos)
            throw ConfigError("experiment", "must be a non-empty name without '/'");
        if (multi_agent() && (!weights.Wx.empty() || !weights.Wu.empty() || !weights.Wxf.empty()))
            throw ConfigError("weights", "overrides apply to single-agent presets only");
        if (horizon && *horizon < 1)
            throw ConfigError("horizon", "must be at least 1");
        if (seeds < 1)
            throw ConfigError("seeds", "must be at least 1");
        if (workers < 1)
            throw ConfigError("workers", "must be at least 1");
        if (out.empty())
            throw ConfigError("out", "must not be empty");
        if (!(divergence_cap > 0.0))
            throw ConfigError("divergence_cap", "must be positive");
        if (solver.max_iterations < 1)
            throw ConfigError("solver.max_iterations", "must be at least 1");
        if (!(solver.cost_tolerance > 0.0))
            throw ConfigError("solver.cost_tolerance", "must be positive");
        if (!(solver.control_tolerance > 0.0))
            throw ConfigError("solver.control_tolerance", "must be positive");
        if (eps_grid.empty())
            throw ConfigError("eps", "must not be empty");
        for (std::size_t i = 0; i < eps_grid.size(); ++i)
            if (!(eps_grid[i] >= 0.0) || !std::isfinite(eps_grid[i]))
                throw ConfigError(index("eps", i), "must be finite and non-negative");
        if (policies.empty())
            throw ConfigError("policies", "must not be empty");

        const Scenario sc = scenario();
        std::set<std::string> labels;
        for (std::size_t i = 0; i < policies.size(); ++i)
        {
            try
            {
                policies[i].validate(sc.horizon);
            }
            catch (const ContractViolation &e)
            {
                throw ConfigError(index("policies", i), e.what());
            }
            if (!labels.insert(policies[i].name()).second)
                throw ConfigError(index("policies", i), "duplicate policy name '" + policies[i].name() + "'");
        }
        if (!(run.eps >= 0.0) || !std::isfinite(run.eps))
            throw ConfigError("run.eps", "must be finite and non-negative");
        for (std::size_t i = 0; i < verify.eps.size(); ++i)
            if (!(verify.eps[i] > 0.0) || !std::isfinite(verify.eps[i]))
                throw ConfigError(index("verify.eps", i), "must be finite and positive");
        if (verify.eps.empty())
            throw ConfigError("verify.eps", "must not be empty");
        if (verify.seeds < 2)
            throw ConfigError("verify.seeds", "must be at least 2");
        if (!(verify.high_noise_eps >= 0.0))
            throw ConfigError("verify.high_noise_eps", "must be non-negative");
        if (verify.high_noise_seeds < 1)
            throw ConfigError("verify.high_noise_seeds", "must be at least 1");
        if (verify.high_noise_horizons.empty())
            throw ConfigError("verify.high_noise_horizons", "must not be empty");
        for (std::size_t i = 0; i < verify.high_noise_horizons.size(); ++i)
        {
            const int h = verify.high_noise_horizons[i];
            if (h < 1 || h > sc.horizon)
                throw ConfigError(index("verify.high_noise_horizons", i),
                                  "must lie in [1, " + std::to_string(sc.horizon) + "]");
        }
    }

    bool ExperimentConfig::multi_agent() const
    {
        return is_multi_agent_preset(preset);
    }

    Scenario ExperimentConfig::scenario() const
    {
        if (multi_agent())
        {
            MultiAgentPreset p = multi_agent_preset(preset);
            return p.problem.scenario(experiment, horizon.value_or(p.horizon));
        }
        SingleAgentPreset p = single_agent_preset(preset);
        apply_diag(p.cost.Wx, weights.Wx, "weights.Wx");
        apply_diag(p.cost.Wu, weights.Wu, "weights.Wu");
        apply_diag(p.cost.Wxf, weights.Wxf, "weights.Wxf");
        try
        {
            return make_scenario(experiment, p.model, p.cost, p.x0, horizon.value_or(p.horizon));
        }
        catch (const ContractViolation &e)
        {
            throw ConfigError("weights", e.what());
        }
    }

    std::vector<CostSpec> ExperimentConfig::agent_costs() const
    {
        if (!multi_agent())
            return {};
        return multi_agent_preset(preset).problem.costs;
    }

    SweepSpec ExperimentConfig::sweep() const
    {
        SweepSpec s;
        s.experiment = experiment;
        s.scenario = scenario();
        s.agent_costs = agent_costs();
        s.policies = policies;
        s.eps_grid = eps_grid;
        s.seeds = seeds;
        s.base_seed = base_seed;
        s.workers = workers;
        s.solver = solver;
        s.divergence_cap = divergence_cap;
        return s;
    }

    const PolicyConfig &ExperimentConfig::policy(const std::string &name) const
    {
        for (const auto &p : policies)
            if (p.name() == name)
                return p;
        for (const auto &p : policies)
        {
            try
            {
                if (p.label.empty() && p.kind == parse_policy_kind(name))
                    return p;
            }
            catch (const ContractViolation &)
            {
                break;
            }
        }
        throw ConfigError("run.policy", "no configured policy named '" + name + "'");
    }

    ExperimentConfig parse_config(const std::string &text)
    {
        json root;
        try
        {
            root = json::parse(text);
        }
        catch (const json::parse_error &e)
        {
            // Byte offsets are 1-based and point just past the offending token.
            const std::size_t end = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
            const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(end), '\n');
            throw ConfigError("", "parse error at line " + std::to_string(line) + ": " + e.what());
        }
        return from_json(root);
    }

    ExperimentConfig load_config(const std::string &path)
    {
        std::ifstream in(path);
        if (!in)
            throw ConfigError("", "cannot open config file '" + path + "'");
        std::ostringstream ss;
        ss << in.rdbuf();
        return parse_config(ss.str());
    }

    std::string config_json(const ExperimentConfig &c)
    {
        json j;
        j["experiment"] = c.experiment;
        j["preset"] = c.preset;
        if (!c.weights.Wx.empty() || !c.weights.Wu.empty() || !c.weights.Wxf.empty())
        {
            json w = json::object();
            if (!c.weights.Wx.empty())
                w["Wx"] = c.weights.Wx;
            if (!c.weights.Wu.empty())
                w["Wu"] = c.weights.Wu;
            if (!c.weights.Wxf.empty())
                w["Wxf"] = c.weights.Wxf;
            j["weights"] = w;
        }
        if (c.horizon)
            j["horizon"] = *c.horizon;
        auto &ps = j["policies"] = json::array();
        for (const auto &p : c.policies)
        {
            json q{{"kind", std::string(to_string(p.kind))},
                   {"J_thresh", p.J_thresh},
                   {"H_c", p.H_c},
                   {"gain_source", std::string(to_string(p.gain_source))}};
            if (!p.label.empty())
                q["label"] = p.label;
            ps.push_back(q);
        }
        j["eps"] = c.eps_grid;
        j["seeds"] = c.seeds;
        j["base_seed"] = c.base_seed;
        j["workers"] = c.workers;
        j["out"] = c.out;
        j["divergence_cap"] = c.divergence_cap;
        j["solver"] = {{"max_iterations", c.solver.max_iterations},
                       {"cost_tolerance", c.solver.cost_tolerance},
                       {"control_tolerance", c.solver.control_tolerance}};
        j["run"] = {{"policy", c.run.policy}, {"eps", c.run.eps}};
        j["verify"] = {{"eps", c.verify.eps},
                       {"seeds", c.verify.seeds},
                       {"high_noise_eps", c.verify.high_noise_eps},
                       {"high_noise_horizons", c.verify.high_noise_horizons},
                       {"high_noise_seeds", c.verify.high_noise_seeds}};
        return j.dump(2) + "\n";
    }
} // namespace stochplan
