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

#include "stochplan/montecarlo.hpp"
#include "stochplan/presets.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace stochplan
{
    /// Diagonal weight overrides for single-agent presets; empty keeps the preset value.
    struct WeightOverride
    {
        std::vector<double> Wx;
        std::vector<double> Wu;
        std::vector<double> Wxf;
    };

    struct RunSection
    {
        std::string policy = "TLQR2";  ///< label or kind of one of the configured policies
        double eps = 0.0;
    };

    struct VerifySection
    {
        std::vector<double> eps{0.05, 0.1, 0.2, 0.4};
        int seeds = 2000;
        double high_noise_eps = 0.9;
        std::vector<int> high_noise_horizons{3, 7, 14, 21, 35};
        int high_noise_seeds = 20;
    };

    /**
     * One file fully determines an experiment. JSON object with keys
     *
     *   experiment  string, default: the preset name
     *   preset      string, required ("car_single", "trailers_single",
     *               "quadrotor_single", "car_obstacles", "car_multi3")
     *   weights     {"Wx": [...], "Wu": [...], "Wxf": [...]} diagonal overrides
     *   horizon     int, default: the preset horizon
     *   policies    [{"kind", "J_thresh", "H_c", "gain_source", "label"}],
     *               default: MPC, MPC-SH (H_c = 7), TLQR, TLQR2 (J_thresh = 0.02)
     *   eps         [...], default 0.0, 0.1, ..., 0.9
     *   seeds       int >= 1, default 100
     *   base_seed   int >= 0, default 0
     *   workers     int >= 1, default 1
     *   out         string, default "results"
     *   divergence_cap  default 1e6
     *   solver      {"max_iterations", "cost_tolerance", "control_tolerance"}
     *   run         {"policy", "eps"}
     *   verify      {"eps", "seeds", "high_noise_eps", "high_noise_horizons", "high_noise_seeds"}
     *
     * Unknown keys are rejected.
     */
    struct ExperimentConfig
    {
        std::string experiment;
        std::string preset;
        WeightOverride weights;
        std::optional<int> horizon;
        std::vector<PolicyConfig> policies;
        std::vector<double> eps_grid;
        int seeds = 100;
        std::uint64_t base_seed = 0;
        int workers = 1;
        std::string out = "results";
        double divergence_cap = 1e6;
        SolverOptions solver;
        RunSection run;
        VerifySection verify;

        /// Throws ConfigError with the field path of the first problem.
        void validate() const;

        bool multi_agent() const;
        /// Preset with overrides applied.
        Scenario scenario() const;
        /// Per-agent costs for multi-agent presets, empty otherwise.
        std::vector<CostSpec> agent_costs() const;
        SweepSpec sweep() const;
        const PolicyConfig &policy(const std::string &name) const;
    };

    std::vector<PolicyConfig> default_policies();
    std::vector<double> default_eps_grid();

    /// Parses and validates; parse errors carry line and column.
    ExperimentConfig parse_config(const std::string &text);
    ExperimentConfig load_config(const std::string &path);

    /// Canonical JSON of a config with defaults filled (config.copy).
    std::string config_json(const ExperimentConfig &config);
} // namespace stochplan
