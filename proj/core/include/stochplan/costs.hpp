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

#include "stochplan/models.hpp"

#include <span>
#include <vector>

namespace stochplan
{
    /// Ellipsoidal obstacle {p : (p - center)' shape (p - center) <= 1}.
    struct Obstacle
    {
        Eigen::Vector2d center = Eigen::Vector2d::Zero();
        Eigen::Matrix2d shape = Eigen::Matrix2d::Identity();
    };

    /**
     * Quadratic tracking cost about a goal state plus soft obstacle penalties.
     *
     *   stage(x, u)  = e' Wx e + u' Wu u + sum_k M exp(-(d_k' E_k d_k - 1))
     *   terminal(x)  = e' Wxf e
     *
     * with e = x - goal and d_k the planar offset from obstacle k.
     * `collision_scale` (M) and `r_thresh` also parameterize the inter-agent
     * penalty used by joint costs.
     */
    struct CostSpec
    {
        Matrix Wx;
        Matrix Wu;
        Matrix Wxf;
        State goal;
        std::vector<Obstacle> obstacles;
        double collision_scale = 100.0;
        double r_thresh = 0.5;

        void validate() const;
        int state_dim() const { return static_cast<int>(goal.size()); }
        int control_dim() const { return static_cast<int>(Wu.rows()); }
    };

    /// Planar position (first two state components).
    inline Eigen::Vector2d planar_position(const State &x) { return x.head<2>(); }

    double stage_cost(const CostSpec &spec, const State &x, const Control &u);
    double terminal_cost(const CostSpec &spec, const State &x);
    double obstacle_penalty(const CostSpec &spec, const Eigen::Vector2d &p);
    double collision_penalty(const CostSpec &spec, const Eigen::Vector2d &p_i,
                             const Eigen::Vector2d &p_j);

    /// Sum of stage costs plus the terminal cost; requires |xs| == |us| + 1.
    double trajectory_cost(const CostSpec &spec, const ModelSpec &model,
                           std::span<const State> xs, std::span<const Control> us);

    /// Running prefix J_{0:t} = sum_{s<=t} stage(x_s, u_s), t = 0..T-1.
    /// The terminal cost is not part of any prefix.
    std::vector<double> running_costs(const CostSpec &spec, std::span<const State> xs,
                                      std::span<const Control> us);

    /// Value, gradient and Hessian of a stage cost at (x, u).
    struct StageExpansion
    {
        double value = 0.0;
        Vector lx;
        Vector lu;
        Matrix lxx;
        Matrix luu;
        Matrix lux;
    };

    struct TerminalExpansion
    {
        double value = 0.0;
        Vector lx;
        Matrix lxx;
    };

    /// Additive objective consumed by the trajectory optimizer and the
    /// rollout evaluators.
    class Objective
    {
    public:
        virtual ~Objective() = default;

        virtual int state_dim() const = 0;
        virtual int control_dim() const = 0;
        virtual double stage(const State &x, const Control &u) const = 0;
        virtual double terminal(const State &x) const = 0;
        virtual void expand_stage(const State &x, const Control &u, StageExpansion &out) const = 0;
        virtual void expand_terminal(const State &x, TerminalExpansion &out) const = 0;
    };

    /// Single-agent objective backed by a CostSpec.
    class QuadraticCost final : public Objective
    {
    public:
        explicit QuadraticCost(CostSpec spec);

        const CostSpec &spec() const { return spec_; }

        int state_dim() const override { return spec_.state_dim(); }
        int control_dim() const override { return spec_.control_dim(); }
        double stage(const State &x, const Control &u) const override;
        double terminal(const State &x) const override;
        void expand_stage(const State &x, const Control &u, StageExpansion &out) const override;
        void expand_terminal(const State &x, TerminalExpansion &out) const override;

    private:
        CostSpec spec_;
    };

    /// Joint objective of transition-independent agents: the sum of the
    /// per-agent costs plus a collision penalty for every unordered pair.
    class JointCost final : public Objective
    {
    public:
        JointCost(std::vector<CostSpec> agents, double collision_scale, double r_thresh);

        int state_dim() const override { return n_x_; }
        int control_dim() const override { return n_u_; }
        int agent_count() const { return static_cast<int>(agents_.size()); }
        const CostSpec &agent(int i) const { return agents_.at(static_cast<std::size_t>(i)); }
        int state_offset(int i) const { return x_off_.at(static_cast<std::size_t>(i)); }
        int control_offset(int i) const { return u_off_.at(static_cast<std::size_t>(i)); }
        double collision_scale() const { return collision_scale_; }
        double r_thresh() const { return r_thresh_; }

        /// Sum of pairwise collision penalties at joint state x.
        double collision_total(const State &x) const;

        double stage(const State &x, const Control &u) const override;
        double terminal(const State &x) const override;
        void expand_stage(const State &x, const Control &u, StageExpansion &out) const override;
        void expand_terminal(const State &x, TerminalExpansion &out) const override;

    private:
        std::vector<CostSpec> agents_;
        std::vector<QuadraticCost> parts_;
        std::vector<int> x_off_;
        std::vector<int> u_off_;
        int n_x_ = 0;
        int n_u_ = 0;
        double collision_scale_;
        double r_thresh_;
    };
} // namespace stochplan
