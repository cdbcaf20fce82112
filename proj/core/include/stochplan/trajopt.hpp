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
#include <vector>

namespace stochplan
{
    struct SolverOptions
    {
        int max_iterations = 200;
        double cost_tolerance = 1e-10;    ///< relative predicted decrease that ends a Gauss-Newton solve
        double control_tolerance = 1e-7;  ///< infinity norm of the control update
        double line_search_factor = 0.5;
        double armijo = 1e-4;
        int max_line_search = 30;
        double regularization_init = 1e-6;
        double regularization_growth = 10.0;
        double regularization_max = 1e10;
        /// Near convergence, include the dynamics curvature (contracted with
        /// the value gradient) in the backward pass; false keeps Gauss-Newton
        /// iLQR throughout.
        bool second_order = true;
        /// Relative predicted decrease below which the curvature terms are used.
        double second_order_switch = 1e-4;
        /// Relative predicted decrease that ends the solve once Newton steps
        /// are in use; near the roundoff of the objective.
        double newton_tolerance = 1e-16;
    };

    /// Deterministic open-loop problem: minimize the objective over controls
    /// subject to the noise-free dynamics, u_min <= u_t <= u_max and
    /// |u_t - u_{t-1}| <= du_max with u_{-1} = u_prev.
    struct OcpProblem
    {
        const ModelSpec &model;
        const Objective &objective;
        State x0;
        int horizon = 0;
        Control u_prev = {};                ///< empty means zero
        std::vector<Control> u_guess = {};  ///< empty or exactly `horizon` controls
    };

    struct OcpSolution
    {
        std::vector<Control> controls;
        std::vector<State> states;
        double cost = 0.0;
        int iterations = 0;
        bool converged = false;
        std::vector<double> trace;  ///< objective of the initial guess and each accepted iterate
        double solve_ms = 0.0;
    };

    /// Control-limited iterative LQR. The previous control is carried as an
    /// extra state so each stage sees the slew window as a box on u_t; every
    /// stage subproblem is a box-constrained QP and the forward pass projects
    /// onto the same window, so iterates are always feasible.
    ///
    /// An instance owns its scratch buffers and is not reentrant; use one
    /// instance per thread.
    class OcpSolver
    {
    public:
        explicit OcpSolver(SolverOptions options = {});

        /// Throws SolverError when the objective is non-finite at the initial
        /// guess; returns the best iterate with converged == false when the
        /// iteration cap is hit.
        OcpSolution solve(const OcpProblem &problem);

        const SolverOptions &options() const { return options_; }

    private:
        SolverOptions options_;
        std::vector<Matrix> K_;
        std::vector<Vector> k_;
        std::vector<Control> u_trial_;
        std::vector<State> x_trial_;
    };

    OcpSolution solve_ocp(const OcpProblem &problem, const SolverOptions &options = {});

    /// Noise-free forward simulation; returns |controls| + 1 states.
    std::vector<State> rollout_nominal(const ModelSpec &model, const State &x0,
                                       std::span<const Control> controls);

    /// Admissible interval for u_t given the previous control: the box
    /// intersected with the slew window. Collapses to the box point nearest
    /// `u_prev` if the two do not overlap.
    void control_window(const ModelSpec &model, const Control &u_prev, Control &lo, Control &hi);

    /// Sequentially clamp each control into its window.
    std::vector<Control> project_feasible(const ModelSpec &model, const Control &u_prev,
                                          std::span<const Control> controls);

    /// Receding-horizon warm start: drop the first control and pad with the
    /// last one (or truncate) to `horizon` entries.
    std::vector<Control> shift_controls(std::span<const Control> controls, int horizon);

    /// Result of a box-constrained QP  min 0.5 x'Hx + g'x  s.t. lo <= x <= hi.
    struct BoxQpResult
    {
        Vector x;
        std::vector<bool> free;  ///< components not held at a bound
        bool ok = false;         ///< false when the free Hessian is not positive definite
    };

    /// Projected-Newton solver for small dense box QPs, warm-started at x0.
    BoxQpResult solve_box_qp(const Matrix &H, const Vector &g, const Vector &lo, const Vector &hi,
                             const Vector &x0);
} // namespace stochplan
