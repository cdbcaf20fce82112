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

#include "stochplan/models.hpp"

#include "stochplan/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace stochplan
{
    namespace
    {
        void require_dims(const ModelSpec &model, const State &x, const Control &u)
        {
            if (x.size() != model.n_x || u.size() != model.n_u)
            {
                std::ostringstream os;
                os << model.name << ": expected state/control of size " << model.n_x << "/"
                   << model.n_u << ", got " << x.size() << "/" << u.size();
                throw ContractViolation(os.str());
            }
        }

        Control vec(std::initializer_list<double> values)
        {
            Control out(static_cast<Eigen::Index>(values.size()));
            Eigen::Index i = 0;
            for (double v : values)
                out(i++) = v;
            return out;
        }
    } // namespace

    void ModelSpec::validate() const
    {
        if (n_x <= 0 || n_u <= 0)
            throw ContractViolation(name + ": dimensions must be positive");
        if (!(dt > 0.0))
            throw ContractViolation(name + ": dt must be positive");
        if (!drift || !input_matrix)
            throw ContractViolation(name + ": drift and input map are required");
        if (u_min.size() != n_u || u_max.size() != n_u || du_max.size() != n_u)
            throw ContractViolation(name + ": bound vectors must have length n_u");
        for (int i = 0; i < n_u; ++i)
        {
            if (!(u_min(i) < u_max(i)))
                throw ContractViolation(name + ": u_min must be below u_max componentwise");
            if (!(du_max(i) >= 0.0))
                throw ContractViolation(name + ": du_max must be non-negative");
        }
    }

    double ModelSpec::constant(std::string_view key) const
    {
        for (const auto &[k, v] : constants)
            if (k == key)
                return v;
        throw ContractViolation(name + ": no constant named " + std::string(key));
    }

    State step(const ModelSpec &model, const State &x, const Control &u, const Control &w,
               double eps, int t)
    {
        require_dims(model, x, u);
        State next;
        if (eps == 0.0)
        {
            next = model.drift(x) + model.input_matrix(x, t) * u;
        }
        else
        {
            if (w.size() != model.n_u)
                throw ContractViolation(model.name + ": noise vector must have length n_u");
            next = model.drift(x) + model.input_matrix(x, t) * (u + eps * w);
        }
        if (!next.allFinite())
            throw NumericError(model.name + ": non-finite state after step " + std::to_string(t));
        return next;
    }

    State step_nominal(const ModelSpec &model, const State &x, const Control &u, int t)
    {
        return step(model, x, u, Control(), 0.0, t);
    }

    ModelSpec car4d(double wheelbase)
    {
        ModelSpec m;
        m.name = "car4d";
        m.n_x = 4;
        m.n_u = 2;
        m.dt = 0.1;
        const double dt = m.dt;
        m.drift = [](const State &x) { return x; };
        m.input_matrix = [dt, wheelbase](const State &x, int) {
            Matrix b = Matrix::Zero(4, 2);
            b(0, 0) = std::cos(x(2)) * dt;
            b(1, 0) = std::sin(x(2)) * dt;
            b(2, 0) = std::tan(x(3)) / wheelbase * dt;
            b(3, 1) = dt;
            return b;
        };
        m.u_min = vec({-4.0, -std::numbers::pi / 12.0});
        m.u_max = vec({4.0, std::numbers::pi / 12.0});
        m.du_max = vec({2.0, std::numbers::pi / 12.0});
        m.constants = {{"wheelbase", wheelbase}};
        return m;
    }

    ModelSpec car_trailers6d(double wheelbase)
    {
        ModelSpec m;
        m.name = "car_trailers6d";
        m.n_x = 6;
        m.n_u = 2;
        m.dt = 0.1;
        const double dt = m.dt;
        m.drift = [](const State &x) { return x; };
        // The same hitch length is used for both trailers.
        m.input_matrix = [dt, wheelbase](const State &x, int) {
            Matrix b = Matrix::Zero(6, 2);
            const double theta = x(2);
            const double theta1 = x(4);
            const double theta2 = x(5);
            b(0, 0) = std::cos(theta) * dt;
            b(1, 0) = std::sin(theta) * dt;
            b(2, 0) = std::tan(x(3)) / wheelbase * dt;
            b(3, 1) = dt;
            b(4, 0) = std::sin(theta - theta1) / wheelbase * dt;
            b(5, 0) = std::cos(theta - theta1) * std::sin(theta1 - theta2) / wheelbase * dt;
            return b;
        };
        m.u_min = vec({-0.8, -std::numbers::pi / 6.0});
        m.u_max = vec({0.8, std::numbers::pi / 6.0});
        m.du_max = vec({0.2, std::numbers::pi / 12.0});
        m.constants = {{"wheelbase", wheelbase}, {"hitch_length", wheelbase}};
        return m;
    }

    ModelSpec quadrotor12d(const QuadrotorParams &params)
    {
        ModelSpec m;
        m.name = "quadrotor12d";
        m.n_x = 12;
        m.n_u = 4;
        m.dt = params.dt;
        const double dt = params.dt;
        const Eigen::Vector3d g = params.gravity;

        // State layout: position(0..2), roll/pitch/yaw (3..5), velocity (6..8),
        // body rates (9..11).
        m.drift = [dt, g](const State &x) {
            State next = x;
            const double roll = x(3), pitch = x(4);
            const double sr = std::sin(roll), cr = std::cos(roll);
            const double tp = std::tan(pitch), cp = std::cos(pitch);
            Eigen::Matrix3d w_inv;
            w_inv << 1.0, sr * tp, cr * tp,
                0.0, cr, -sr,
                0.0, sr / cp, cr / cp;
            next.segment<3>(0) += x.segment<3>(6) * dt;
            next.segment<3>(3) += w_inv * x.segment<3>(9) * dt;
            next.segment<3>(6) += g * dt;
            return next;
        };
        const double mass = params.mass;
        const Eigen::Vector3d inertia = params.inertia;
        m.input_matrix = [dt, mass, inertia](const State &x, int) {
            const double sr = std::sin(x(3)), cr = std::cos(x(3));
            const double sp = std::sin(x(4)), cp = std::cos(x(4));
            const double sy = std::sin(x(5)), cy = std::cos(x(5));
            // Third column of R = Rz(yaw) Ry(pitch) Rx(roll).
            const Eigen::Vector3d body_z(cr * sp * cy + sr * sy, cr * sp * sy - sr * cy, cr * cp);
            Matrix b = Matrix::Zero(12, 4);
            b.block<3, 1>(6, 0) = body_z / mass * dt;
            for (int i = 0; i < 3; ++i)
                b(9 + i, 1 + i) = dt / inertia(i);
            return b;
        };
        m.u_min = vec({0.0, -0.05, -0.05, -0.05});
        m.u_max = vec({1.5, 0.05, 0.05, 0.05});
        m.du_max = vec({0.5, 0.02, 0.02, 0.02});
        m.constants = {{"mass", mass},
                       {"inertia_xx", inertia(0)},
                       {"inertia_yy", inertia(1)},
                       {"inertia_zz", inertia(2)},
                       {"gravity_z", g(2)}};
        return m;
    }

    ModelSpec model_by_name(std::string_view name)
    {
        if (name == "car4d")
            return car4d();
        if (name == "car_trailers6d")
            return car_trailers6d();
        if (name == "quadrotor12d")
            return quadrotor12d();
        throw ContractViolation("unknown model '" + std::string(name) + "'");
    }

    ModelSpec stack_models(const std::vector<ModelSpec> &agents)
    {
        if (agents.empty())
            throw ContractViolation("stack_models: no agents");
        if (agents.size() == 1)
            return agents.front();

        ModelSpec joint;
        joint.name = "joint";
        joint.dt = agents.front().dt;
        std::vector<int> x_off, u_off;
        for (const auto &a : agents)
        {
            a.validate();
            if (a.dt != joint.dt)
                throw ContractViolation("stack_models: agents must share dt");
            x_off.push_back(joint.n_x);
            u_off.push_back(joint.n_u);
            joint.name += "_" + a.name;
            joint.n_x += a.n_x;
            joint.n_u += a.n_u;
        }
        joint.u_min.resize(joint.n_u);
        joint.u_max.resize(joint.n_u);
        joint.du_max.resize(joint.n_u);
        for (std::size_t i = 0; i < agents.size(); ++i)
        {
            joint.u_min.segment(u_off[i], agents[i].n_u) = agents[i].u_min;
            joint.u_max.segment(u_off[i], agents[i].n_u) = agents[i].u_max;
            joint.du_max.segment(u_off[i], agents[i].n_u) = agents[i].du_max;
        }
        const int n_x = joint.n_x, n_u = joint.n_u;
        joint.drift = [agents, x_off, n_x](const State &x) {
            State next(n_x);
            for (std::size_t i = 0; i < agents.size(); ++i)
                next.segment(x_off[i], agents[i].n_x) =
                    agents[i].drift(x.segment(x_off[i], agents[i].n_x));
            return next;
        };
        joint.input_matrix = [agents, x_off, u_off, n_x, n_u](const State &x, int t) {
            Matrix b = Matrix::Zero(n_x, n_u);
            for (std::size_t i = 0; i < agents.size(); ++i)
                b.block(x_off[i], u_off[i], agents[i].n_x, agents[i].n_u) =
                    agents[i].input_matrix(x.segment(x_off[i], agents[i].n_x), t);
            return b;
        };
        return joint;
    }

    Control clamp_to_bounds(const ModelSpec &model, const Control &u)
    {
        return u.cwiseMax(model.u_min).cwiseMin(model.u_max);
    }

    Matrix state_jacobian(const ModelSpec &model, const State &x, const Control &u, int t)
    {
        require_dims(model, x, u);
        Matrix jac(model.n_x, model.n_x);
        State xp = x, xm = x;
        for (int i = 0; i < model.n_x; ++i)
        {
            const double h = std::max(1e-6, 1e-6 * std::abs(x(i)));
            xp(i) = x(i) + h;
            xm(i) = x(i) - h;
            const State fp = model.drift(xp) + model.input_matrix(xp, t) * u;
            const State fm = model.drift(xm) + model.input_matrix(xm, t) * u;
            jac.col(i) = (fp - fm) / (xp(i) - xm(i));
            xp(i) = x(i);
            xm(i) = x(i);
        }
        if (!jac.allFinite())
        {
            for (int r = 0; r < jac.rows(); ++r)
                for (int c = 0; c < jac.cols(); ++c)
                    if (!std::isfinite(jac(r, c)))
                    {
                        std::ostringstream os;
                        os << model.name << ": non-finite Jacobian entry (" << r << "," << c
                           << ") at t=" << t;
                        throw NumericError(os.str());
                    }
        }
        return jac;
    }

    Matrix contracted_state_hessian(const ModelSpec &model, const Vector &lambda, const State &x,
                                    const Control &u, int t, double h)
    {
        require_dims(model, x, u);
        const int n = model.n_x;
        auto phi = [&](const State &z) { return lambda.dot(model.drift(z) + model.input_matrix(z, t) * u); };
        Matrix H(n, n);
        State z = x;
        for (int i = 0; i < n; ++i)
            for (int j = i; j < n; ++j)
            {
                double acc = 0.0;
                for (int si : {1, -1})
                    for (int sj : {1, -1})
                    {
                        z = x;
                        z(i) += si * h;
                        z(j) += sj * h;
                        acc += si * sj * phi(z);
                    }
                H(i, j) = H(j, i) = acc / (4.0 * h * h);
            }
        return H;
    }

    Matrix contracted_mixed_hessian(const ModelSpec &model, const Vector &lambda, const State &x, int t,
                                    double h)
    {
        Matrix H(model.n_u, model.n_x);
        State z = x;
        for (int i = 0; i < model.n_x; ++i)
        {
            z(i) = x(i) + h;
            const Vector gp = model.input_matrix(z, t).transpose() * lambda;
            z(i) = x(i) - h;
            const Vector gm = model.input_matrix(z, t).transpose() * lambda;
            z(i) = x(i);
            H.col(i) = (gp - gm) / (2.0 * h);
        }
        return H;
    }

    LinearizedSystem linearize(const ModelSpec &model, std::span<const State> xbar,
                               std::span<const Control> ubar)
    {
        if (xbar.size() != ubar.size() + 1)
            throw ContractViolation("linearize: |xbar| must equal |ubar| + 1");
        LinearizedSystem lin;
        lin.A.reserve(ubar.size());
        lin.B.reserve(ubar.size());
        for (std::size_t t = 0; t < ubar.size(); ++t)
        {
            const int ti = static_cast<int>(t);
            lin.A.push_back(state_jacobian(model, xbar[t], ubar[t], ti));
            Matrix b = model.input_matrix(xbar[t], ti);
            if (!b.allFinite())
                throw NumericError(model.name + ": non-finite input matrix at t=" + std::to_string(t));
            lin.B.push_back(std::move(b));
        }
        return lin;
    }
} // namespace stochplan
