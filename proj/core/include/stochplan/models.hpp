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

#include <Eigen/Dense>

#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace stochplan
{
    using Vector = Eigen::VectorXd;
    using Matrix = Eigen::MatrixXd;

    /// Full robot state. Units are model specific (m, rad, m/s, rad/s).
    using State = Eigen::VectorXd;
    /// Actuator command, same length as the model's input dimension.
    using Control = Eigen::VectorXd;

    /// Drift term f(x) of the control-affine update.
    using DriftMap = std::function<State(const State &)>;
    /// Input matrix B_t(x), n_x by n_u.
    using InputMap = std::function<Matrix(const State &, int)>;

    /**
     * Discrete-time control-affine dynamics
     *
     *     x_{t+1} = f(x_t) + B_t(x_t) (u_t + eps w_t)
     *
     * together with box bounds on the command and a per-step slew limit.
     * A ModelSpec is immutable once built and can be shared by concurrent
     * rollouts.
     */
    struct ModelSpec
    {
        std::string name;
        int n_x = 0;
        int n_u = 0;
        double dt = 0.1;
        DriftMap drift;
        InputMap input_matrix;
        Control u_min;
        Control u_max;
        Control du_max;
        /// Named physical constants (wheelbase, mass, ...), for reports.
        std::vector<std::pair<std::string, double>> constants;

        /// Throws ContractViolation when the bounds or dimensions are malformed.
        void validate() const;
        double constant(std::string_view key) const;
    };

    /// Trajectory linearization; A[t], B[t] for t = 0..T-1.
    struct LinearizedSystem
    {
        std::vector<Matrix> A;
        std::vector<Matrix> B;

        std::size_t horizon() const { return A.size(); }
    };

    inline constexpr double kWheelbase = 1.0;

    struct QuadrotorParams
    {
        double mass = 0.1;
        Eigen::Vector3d inertia{1e-2, 1e-2, 1e-2};
        Eigen::Vector3d gravity{0.0, 0.0, -9.81};
        double dt = 0.1;
    };

    /// Noisy update f(x) + B_t(x)(u + eps w). `w` may be empty when eps == 0.
    State step(const ModelSpec &model, const State &x, const Control &u,
               const Control &w, double eps, int t = 0);

    /// Noise-free update f(x) + B_t(x) u.
    State step_nominal(const ModelSpec &model, const State &x, const Control &u, int t = 0);

    /// Kinematic car (x, y, theta, phi) driven by speed and steering rate.
    ModelSpec car4d(double wheelbase = kWheelbase);

    /// Car with two trailers: car state extended by trailer headings theta1, theta2.
    ModelSpec car_trailers6d(double wheelbase = kWheelbase);

    /// Rigid-body quadrotor: position, ZYX Euler angles, velocity, body rates.
    /// Inputs are body-z thrust and three body torques.
    ModelSpec quadrotor12d(const QuadrotorParams &params = {});

    /// "car4d" | "car_trailers6d" | "quadrotor12d".
    ModelSpec model_by_name(std::string_view name);

    /// Block-diagonal stacking of transition-independent agents.
    ModelSpec stack_models(const std::vector<ModelSpec> &agents);

    /// Componentwise clamp of `u` to [u_min, u_max].
    Control clamp_to_bounds(const ModelSpec &model, const Control &u);

    /// Jacobian of x -> f(x) + B_t(x) u at (x, u) by central differences.
    Matrix state_jacobian(const ModelSpec &model, const State &x, const Control &u, int t = 0);

    /// Hessian in x of lambda' (f(x) + B_t(x) u) by four-point central differences.
    Matrix contracted_state_hessian(const ModelSpec &model, const Vector &lambda, const State &x,
                                    const Control &u, int t = 0, double h = 1e-4);

    /// Jacobian in x of B_t(x)' lambda (n_u by n_x). The update is affine in u,
    /// so this is the whole mixed second derivative of lambda' F.
    Matrix contracted_mixed_hessian(const ModelSpec &model, const Vector &lambda, const State &x,
                                    int t = 0, double h = 1e-4);

    /// Linearize about a nominal; requires |xbar| == |ubar| + 1.
    LinearizedSystem linearize(const ModelSpec &model, std::span<const State> xbar,
                               std::span<const Control> ubar);
} // namespace stochplan
