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
#include "stochplan/models.hpp"
#include "stochplan/policies.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace stochplan
{
    struct SingleAgentPreset
    {
        std::string name;
        ModelSpec model;
        CostSpec cost;
        State x0;
        int horizon = 0;

        Scenario scenario() const;
    };

    struct MultiAgentPreset
    {
        std::string name;
        MultiAgentProblem problem;
        int horizon = 0;

        Scenario scenario() const;
    };

    /// Car, car with two trailers and quadrotor reach tasks (single agent).
    SingleAgentPreset car_single();
    SingleAgentPreset trailers_single();
    SingleAgentPreset quadrotor_single();

    /// Car task with two elliptical obstacles between start and goal. The
    /// geometry is illustrative: centers (2.4, 4.0) and (4.6, 4.2), semi-axes
    /// 0.6 x 0.9 and 0.7 x 0.5.
    SingleAgentPreset car_obstacles();

    /// Three cars crossing paths, joint cost with collision penalty.
    MultiAgentPreset car_multi3();

    /// "car_single", "trailers_single", "quadrotor_single", "car_obstacles", "car_multi3".
    std::vector<std::string> preset_names();
    bool is_multi_agent_preset(std::string_view name);
    SingleAgentPreset single_agent_preset(std::string_view name);
    MultiAgentPreset multi_agent_preset(std::string_view name);
} // namespace stochplan
