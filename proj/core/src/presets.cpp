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

#include "stochplan/presets.hpp"

#include "stochplan/errors.hpp"

#include <numbers>

namespace stochplan
{
    namespace
    {
        using std::numbers::pi;

        Vector vec(std::initializer_list<double> values)
        {
            Vector out(static_cast<Eigen::Index>(values.size()));
            Eigen::Index i = 0;
            for (double v : values)
                out(i++) = v;
            return out;
        }

        Matrix diag(std::initializer_list<double> values, double scale = 1.0)
        {
            return (scale * vec(values)).asDiagonal();
        }

        CostSpec car_cost(State goal)
        {
            CostSpec c;
            c.Wx = diag({20, 20, 0, 0});
            c.Wu = diag({20, 200});
            c.Wxf = diag({7, 7, 10, 1}, 1e3);
            c.goal = std::move(goal);
            return c;
        }

        Obstacle ellipse(double cx, double cy, double ax, double ay)
        {
            Obstacle o;
            o.center = Eigen::Vector2d(cx, cy);
            o.shape = Eigen::Vector2d(1.0 / (ax * ax), 1.0 / (ay * ay)).asDiagonal();
            return o;
        }
    } // namespace

    Scenario SingleAgentPreset::scenario() const
    {
        return make_scenario(name, model, cost, x0, horizon);
    }

    Scenario MultiAgentPreset::scenario() const
    {
        return problem.scenario(name, horizon);
    }

    SingleAgentPreset car_single()
    {
        return {"car_single", car4d(), car_cost(vec({3.5, 7.0, pi / 2.0, 0.0})), vec({3.0, 1.0, 0.0, 0.0}), 35};
    }

    SingleAgentPreset trailers_single()
    {
        CostSpec c;
        c.Wx = diag({10, 10, 1, 1, 1, 1});
        c.Wu = diag({5, 5});
        c.Wxf = diag({1, 1, 1, 0.1, 0.1, 0.1}, 1e3);
        c.goal = vec({2, 2, 0, 0, 0, 0});
        return {"trailers_single", car_trailers6d(), c, vec({0, 0, pi / 3.0, 0, 0, 0}), 40};
    }

    SingleAgentPreset quadrotor_single()
    {
        CostSpec c;
        c.Wx = diag({10, 10, 10, 1, 1, 1, 1, 1, 1, 1, 1, 1});
        c.Wu = diag({5, 10, 10, 10});
        c.Wxf = 1e3 * Matrix::Identity(12, 12);
        c.goal = Vector::Zero(12);
        c.goal.head<3>() << 2, 2, 2;
        return {"quadrotor_single", quadrotor12d(), c, Vector::Zero(12), 30};
    }

    SingleAgentPreset car_obstacles()
    {
        SingleAgentPreset p = car_single();
        p.name = "car_obstacles";
        p.cost.obstacles = {ellipse(2.4, 4.0, 0.6, 0.9), ellipse(4.6, 4.2, 0.7, 0.5)};
        return p;
    }

    MultiAgentPreset car_multi3()
    {
        MultiAgentPreset p;
        p.name = "car_multi3";
        p.horizon = 35;
        p.problem.models = {car4d(), car4d(), car4d()};
        p.problem.starts = {vec({3, 1, pi / 2.0, 0}), vec({5, 1, 0, 0}), vec({6, 8, 0, 0})};
        p.problem.costs = {car_cost(vec({3.5, 7, 0, 0})), car_cost(vec({2, 8, 0, 0})),
                           car_cost(vec({8, 1.5, 0, 0}))};
        p.problem.collision_scale = 100.0;
        p.problem.r_thresh = 0.5;
        return p;
    }

    std::vector<std::string> preset_names()
    {
        return {"car_single", "trailers_single", "quadrotor_single", "car_obstacles", "car_multi3"};
    }

    bool is_multi_agent_preset(std::string_view name)
    {
        return name == "car_multi3";
    }

    SingleAgentPreset single_agent_preset(std::string_view name)
    {
        if (name == "car_single")
            return car_single();
        if (name == "trailers_single")
            return trailers_single();
        if (name == "quadrotor_single")
            return quadrotor_single();
        if (name == "car_obstacles")
            return car_obstacles();
        throw ContractViolation("unknown single-agent preset '" + std::string(name) + "'");
    }

    MultiAgentPreset multi_agent_preset(std::string_view name)
    {
        if (name == "car_multi3")
            return car_multi3();
        throw ContractViolation("unknown multi-agent preset '" + std::string(name) + "'");
    }
} // namespace stochplan
