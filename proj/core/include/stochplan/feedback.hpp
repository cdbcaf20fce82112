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

#include <span>
#include <string>
#include <vector>

namespace stochplan
{
    /// Weights of the tracking LQR problem solved around a nominal.
    struct LqrWeights
    {
        Matrix Q;
        Matrix R;
        Matrix Qf;

        /// Throws ContractViolation unless Q, Qf are symmetric PSD and R is
        /// symmetric PD with matching sizes.
        void validate(int n_x, int n_u) const;

        /// Q = Wx + shim I, R = Wu, Qf = Wxf.
        static LqrWeights surrogate(const CostSpec &cost, double shim = 1e-3);

        /// Block-diagonal surrogate over the agents of a joint cost; the
        /// collision coupling is left out, so the design decouples per agent.
        static LqrWeights surrogate(const JointCost &cost, double shim = 1e-3);
    };

    struct GainSchedule
    {
        /// Feedback delta_u = -L[t] delta_x, t = 0..T-1.
        std::vector<Matrix> L;
        /// Value Hessians P[0..T].
        std::vector<Matrix> P;
        /// Value gradients G[0..T] (row vectors stored as columns); empty for LQR.
        std::vector<Vector> G;
        /// Largest first-order residual |l_u + B' G_{t+1}| over controls not
        /// at a bound, along the nominal (T-PFC only).
        double first_order_residual = 0.0;
        std::vector<std::string> warnings;

        std::size_t horizon() const { return L.size(); }
    };

    /// Time-varying Riccati recursion with P_T = Qf:
    ///   L_t = (R + B'PB)^{-1} B'PA,   P_t = A'PA - A'PB L_t + Q.
    GainSchedule lqr_gains(const LinearizedSystem &lin, const LqrWeights &w);

    /// Second-order perturbation-feedback gains along a nominal. Costs enter
    /// through their stage and terminal expansions; dynamics curvature is
    /// contracted with the value gradient by central differences (step 1e-4).
    /// Controls at a box bound get zero gain rows and the remaining block of
    /// S_t = l_uu + B'PB is floored at the smallest eigenvalue of l_uu. A
    /// residual above `residual_tol * (1 + |l_u|)`, a floored step or a
    /// clamped step each add a warning.
    GainSchedule tpfc_gains(const ModelSpec &model, const Objective &objective,
                            std::span<const State> xbar, std::span<const Control> ubar,
                            double residual_tol = 1e-3);

    /// Tracking gains for a nominal according to `surrogate` weights.
    GainSchedule surrogate_lqr_gains(const ModelSpec &model, const LqrWeights &w,
                                     std::span<const State> xbar, std::span<const Control> ubar);

    /// JSON record {"L": [...], "P": [...], "G": [...], "first_order_residual", "warnings"}.
    std::string gain_schedule_json(const GainSchedule &gains);
} // namespace stochplan
