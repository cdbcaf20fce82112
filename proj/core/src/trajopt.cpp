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

#include "stochplan/trajopt.hpp"

#include "stochplan/errors.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace stochplan
{
    namespace
    {
        double objective_total(const Objective &objective, const std::vector<State> &xs,
                               const std::vector<Control> &us)
        {
            double total = 0.0;
            for (std::size_t t = 0; t < us.size(); ++t)
                total += objective.stage(xs[t], us[t]);
            return total + objective.terminal(xs.back());
        }

        void check_problem(const OcpProblem &p)
        {
            p.model.validate();
            if (p.horizon < 1)
                throw ContractViolation("solve_ocp: horizon must be at least 1");
            if (p.x0.size() != p.model.n_x || !p.x0.allFinite())
                throw ContractViolation("solve_ocp: x0 has wrong dimension or is not finite");
            if (p.objective.state_dim() != p.model.n_x || p.objective.control_dim() != p.model.n_u)
                throw ContractViolation("solve_ocp: objective dimensions do not match the model");
            if (p.u_prev.size() != 0 && p.u_prev.size() != p.model.n_u)
                throw ContractViolation("solve_ocp: u_prev has wrong dimension");
            if (!p.u_guess.empty())
            {
                if (p.u_guess.size() != static_cast<std::size_t>(p.horizon))
                    throw ContractViolation("solve_ocp: u_guess must be empty or have horizon entries");
                for (const auto &u : p.u_guess)
                    if (u.size() != p.model.n_u || !u.allFinite())
                        throw ContractViolation("solve_ocp: malformed u_guess entry");
            }
        }

        double qp_value(const Matrix &H, const Vector &g, const Vector &x)
        {
            return x.dot(g + 0.5 * (H * x));
        }

        Matrix select(const Matrix &m, const std::vector<int> &rows, const std::vector<int> &cols)
        {
            Matrix out(rows.size(), cols.size());
            for (std::size_t r = 0; r < rows.size(); ++r)
                for (std::size_t c = 0; c < cols.size(); ++c)
                    out(r, c) = m(rows[r], cols[c]);
            return out;
        }
    } // namespace

    void control_window(const ModelSpec &model, const Control &u_prev, Control &lo, Control &hi)
    {
        lo = model.u_min.cwiseMax(u_prev - model.du_max);
        hi = model.u_max.cwiseMin(u_prev + model.du_max);
        for (int i = 0; i < model.n_u; ++i)
            if (lo(i) > hi(i))
            {
                const double p = std::clamp(u_prev(i), model.u_min(i), model.u_max(i));
                lo(i) = p;
                hi(i) = p;
            }
    }

    std::vector<Control> project_feasible(const ModelSpec &model, const Control &u_prev,
                                          std::span<const Control> controls)
    {
        std::vector<Control> out;
        out.reserve(controls.size());
        Control lo, hi;
        Control prev = u_prev;
        for (const auto &u : controls)
        {
            control_window(model, prev, lo, hi);
            out.push_back(u.cwiseMax(lo).cwiseMin(hi));
            prev = out.back();
        }
        return out;
    }

    BoxQpResult solve_box_qp(const Matrix &H, const Vector &g, const Vector &lo, const Vector &hi,
                             const Vector &x0)
    {
        const auto n = g.size();
        BoxQpResult res;
        res.x = x0.size() == n ? x0.cwiseMax(lo).cwiseMin(hi) : Vector(Vector::Zero(n).cwiseMax(lo).cwiseMin(hi));
        res.free.assign(static_cast<std::size_t>(n), true);

        Vector grad(n);
        std::vector<int> fi, ci;
        double value = qp_value(H, g, res.x);
        for (int it = 0; it < 100; ++it)
        {
            grad = g + H * res.x;
            fi.clear();
            ci.clear();
            for (int i = 0; i < n; ++i)
            {
                const bool clamped = (res.x(i) <= lo(i) && grad(i) > 0.0) || (res.x(i) >= hi(i) && grad(i) < 0.0);
                res.free[static_cast<std::size_t>(i)] = !clamped;
                (clamped ? ci : fi).push_back(i);
            }
            if (fi.empty())
                break;

            Eigen::LLT<Matrix> llt(select(H, fi, fi));
            if (llt.info() != Eigen::Success)
                return res;

            // Newton step on the free block with the clamped block held fixed.
            Vector rhs(fi.size());
            for (std::size_t a = 0; a < fi.size(); ++a)
            {
                rhs(a) = g(fi[a]);
                for (int c : ci)
                    rhs(a) += H(fi[a], c) * res.x(c);
            }
            const Vector target = -llt.solve(rhs);
            Vector dx = Vector::Zero(n);
            for (std::size_t a = 0; a < fi.size(); ++a)
                dx(fi[a]) = target(a) - res.x(fi[a]);
            const double sdotg = dx.dot(grad);
            if (sdotg >= -1e-15 * (1.0 + std::abs(value)))
                break;

            double step = 1.0;
            bool moved = false;
            Vector trial(n);
            double trial_value = value;
            while (step > 1e-12)
            {
                trial = (res.x + step * dx).cwiseMax(lo).cwiseMin(hi);
                trial_value = qp_value(H, g, trial);
                if ((trial_value - value) / (step * sdotg) >= 0.1)
                {
                    moved = true;
                    break;
                }
                step *= 0.6;
            }
            if (!moved)
                break;
            const double improvement = value - trial_value;
            res.x = trial;
            value = trial_value;
            if (improvement < 1e-15 * (1.0 + std::abs(value)))
                break;
        }

        // Final classification and definiteness of the free block.
        grad = g + H * res.x;
        fi.clear();
        for (int i = 0; i < n; ++i)
        {
            const bool clamped = (res.x(i) <= lo(i) && grad(i) > 0.0) || (res.x(i) >= hi(i) && grad(i) < 0.0);
            res.free[static_cast<std::size_t>(i)] = !clamped;
            if (!clamped)
                fi.push_back(i);
        }
        res.ok = fi.empty() || Eigen::LLT<Matrix>(select(H, fi, fi)).info() == Eigen::Success;
        return res;
    }

    OcpSolver::OcpSolver(SolverOptions options) : options_(options)
    {
        if (options_.max_iterations < 1)
            throw ContractViolation("SolverOptions: max_iterations must be positive");
        if (!(options_.line_search_factor > 0.0 && options_.line_search_factor < 1.0))
            throw ContractViolation("SolverOptions: line_search_factor must lie in (0, 1)");
        if (!(options_.regularization_init > 0.0) || !(options_.regularization_growth > 1.0))
            throw ContractViolation("SolverOptions: regularization must start positive and grow");
    }

    OcpSolution OcpSolver::solve(const OcpProblem &problem)
    {
        const auto wall0 = std::chrono::steady_clock::now();
        check_problem(problem);

        const ModelSpec &model = problem.model;
        const Objective &objective = problem.objective;
        const int T = problem.horizon;
        const int nx = model.n_x;
        const int nu = model.n_u;
        const int nz = nx + nu;
        const auto Ts = static_cast<std::size_t>(T);
        const Control up0 = problem.u_prev.size() ? problem.u_prev : Control::Zero(nu);

        OcpSolution sol;
        sol.controls = project_feasible(model, up0,
                                        problem.u_guess.empty() ? std::vector<Control>(Ts, Control::Zero(nu))
                                                                : problem.u_guess);
        try
        {
            sol.states = rollout_nominal(model, problem.x0, sol.controls);
        }
        catch (const NumericError &e)
        {
            throw SolverError(std::string("solve_ocp: initial rollout diverged: ") + e.what(), {});
        }
        double cost = objective_total(objective, sol.states, sol.controls);
        if (!std::isfinite(cost))
            throw SolverError("solve_ocp: non-finite objective at the initial guess", {});
        sol.trace.push_back(cost);

        K_.assign(Ts, Matrix::Zero(nu, nz));
        k_.assign(Ts, Vector::Zero(nu));
        u_trial_.resize(Ts);
        x_trial_.resize(Ts + 1);

        StageExpansion se;
        TerminalExpansion te;
        Vector vz(nz), qz(nz), qu(nu);
        Matrix Vz(nz, nz), Qzz(nz, nz), Quz(nu, nz), Quu(nu, nu);
        Control lo, hi;
        std::vector<int> fi, ci;

        // Gauss-Newton until the predicted decrease is small, then Newton
        // steps for fast local convergence. A failed Newton iteration drops
        // back to Gauss-Newton for the rest of the solve.
        bool polish = false;
        bool polish_allowed = options_.second_order;
        auto leave_polish = [&] {
            if (!polish)
                return false;
            polish = false;
            polish_allowed = false;
            return true;
        };

        double reg = 0.0;
        for (int it = 0; it < options_.max_iterations; ++it)
        {
            ++sol.iterations;

            // Backward pass on z = (x, u_prev). The previous-control block has
            // linear dynamics, so only the x block picks up curvature terms.
            objective.expand_terminal(sol.states.back(), te);
            Vz.setZero();
            Vz.topLeftCorner(nx, nx) = te.lxx;
            vz.setZero();
            vz.head(nx) = te.lx;
            double dv1 = 0.0, dv2 = 0.0;
            bool ok = true;
            for (int t = T - 1; t >= 0; --t)
            {
                const auto ts = static_cast<std::size_t>(t);
                const State &x = sol.states[ts];
                const Control &u = sol.controls[ts];
                const Control &up = t == 0 ? up0 : sol.controls[ts - 1];
                const Matrix A = state_jacobian(model, x, u, t);
                const Matrix B = model.input_matrix(x, t);
                objective.expand_stage(x, u, se);

                const auto Vxx = Vz.topLeftCorner(nx, nx);
                const auto Vpx = Vz.bottomLeftCorner(nu, nx);
                const auto Vpp = Vz.bottomRightCorner(nu, nu);
                const Matrix BtVxx = B.transpose() * Vxx;

                qz.head(nx) = se.lx + A.transpose() * vz.head(nx);
                qz.tail(nu).setZero();
                qu = se.lu + B.transpose() * vz.head(nx) + vz.tail(nu);
                Qzz.setZero();
                Qzz.topLeftCorner(nx, nx) = se.lxx + A.transpose() * Vxx * A;
                Quz.leftCols(nx) = se.lux + (BtVxx + Vpx) * A;
                Quz.rightCols(nu).setZero();
                if (polish)
                {
                    const Vector lam = vz.head(nx);
                    Qzz.topLeftCorner(nx, nx) += contracted_state_hessian(model, lam, x, u, t);
                    Quz.leftCols(nx) += contracted_mixed_hessian(model, lam, x, t);
                }
                Quu = se.luu + BtVxx * B + B.transpose() * Vpx.transpose() + Vpx * B + Vpp;
                Quu = 0.5 * (Quu + Quu.transpose());
                if (reg > 0.0)
                    Quu.diagonal().array() += reg;

                control_window(model, up, lo, hi);
                const BoxQpResult qp = solve_box_qp(Quu, qu, lo - u, hi - u, k_[ts]);
                if (!qp.ok)
                {
                    ok = false;
                    break;
                }
                Vector &k = k_[ts];
                Matrix &K = K_[ts];
                k = qp.x;
                K.setZero();

                // A component held at a slew bound follows the previous control.
                fi.clear();
                ci.clear();
                for (int i = 0; i < nu; ++i)
                {
                    if (qp.free[static_cast<std::size_t>(i)])
                    {
                        fi.push_back(i);
                        continue;
                    }
                    ci.push_back(i);
                    const double ui = u(i) + k(i);
                    const bool at_slew_lo = ui <= lo(i) && up(i) - model.du_max(i) > model.u_min(i);
                    const bool at_slew_hi = ui >= hi(i) && up(i) + model.du_max(i) < model.u_max(i);
                    if (at_slew_lo || at_slew_hi)
                        K(i, nx + i) = 1.0;
                }
                if (!fi.empty())
                {
                    Eigen::LLT<Matrix> llt(select(Quu, fi, fi));
                    Matrix rhs(fi.size(), nz);
                    for (std::size_t a = 0; a < fi.size(); ++a)
                    {
                        rhs.row(a) = Quz.row(fi[a]);
                        for (int c : ci)
                            rhs.row(a) += Quu(fi[a], c) * K.row(c);
                    }
                    const Matrix Kf = -llt.solve(rhs);
                    for (std::size_t a = 0; a < fi.size(); ++a)
                        K.row(fi[a]) = Kf.row(a);
                }

                const Vector Quu_k = Quu * k;
                dv1 += k.dot(qu);
                dv2 += 0.5 * k.dot(Quu_k);
                vz = qz + K.transpose() * Quu_k + K.transpose() * qu + Quz.transpose() * k;
                Vz = Qzz + K.transpose() * Quu * K + K.transpose() * Quz + Quz.transpose() * K;
                Vz = 0.5 * (Vz + Vz.transpose());
            }

            if (!ok)
            {
                if (leave_polish())
                    continue;
                reg = std::max(reg * options_.regularization_growth, options_.regularization_init);
                if (reg > options_.regularization_max)
                    break;
                continue;
            }

            double step_inf = 0.0;
            for (const auto &k : k_)
                step_inf = std::max(step_inf, k.cwiseAbs().maxCoeff());
            const double scale = std::max(1.0, std::abs(cost));
            const double predicted = -(dv1 + dv2);
            if (!polish && polish_allowed &&
                (predicted < options_.second_order_switch * scale || predicted < options_.cost_tolerance * scale))
            {
                polish = true;
                continue;
            }
            const double tol = polish ? options_.newton_tolerance : options_.cost_tolerance;
            if (step_inf < options_.control_tolerance || predicted < tol * scale)
            {
                sol.converged = true;
                break;
            }

            // Backtracking forward pass, projected onto the slew window.
            bool accepted = false;
            double alpha = 1.0;
            double new_cost = cost;
            for (int ls = 0; ls < options_.max_line_search; ++ls, alpha *= options_.line_search_factor)
            {
                const double expected = -(alpha * dv1 + alpha * alpha * dv2);
                try
                {
                    State x = problem.x0;
                    Control up_new = up0;
                    Vector dz(nz);
                    for (int t = 0; t < T; ++t)
                    {
                        const auto ts = static_cast<std::size_t>(t);
                        dz.head(nx) = x - sol.states[ts];
                        dz.tail(nu) = up_new - (t == 0 ? up0 : sol.controls[ts - 1]);
                        control_window(model, up_new, lo, hi);
                        u_trial_[ts] = (sol.controls[ts] + alpha * k_[ts] + K_[ts] * dz).cwiseMax(lo).cwiseMin(hi);
                        x_trial_[ts] = x;
                        x = step_nominal(model, x, u_trial_[ts], t);
                        up_new = u_trial_[ts];
                    }
                    x_trial_[Ts] = x;
                }
                catch (const NumericError &)
                {
                    continue;
                }
                new_cost = objective_total(objective, x_trial_, u_trial_);
                if (std::isfinite(new_cost) && new_cost <= cost && cost - new_cost >= options_.armijo * expected)
                {
                    accepted = true;
                    break;
                }
            }

            if (!accepted)
            {
                if (leave_polish())
                    continue;
                reg = std::max(reg * options_.regularization_growth, options_.regularization_init);
                if (reg > options_.regularization_max)
                    break;
                continue;
            }

            double du_inf = 0.0;
            for (std::size_t t = 0; t < Ts; ++t)
                du_inf = std::max(du_inf, (u_trial_[t] - sol.controls[t]).cwiseAbs().maxCoeff());
            std::swap(sol.controls, u_trial_);
            std::swap(sol.states, x_trial_);
            cost = new_cost;
            sol.trace.push_back(cost);
            reg /= options_.regularization_growth;
            if (reg < options_.regularization_init)
                reg = 0.0;
            if (du_inf < options_.control_tolerance)
            {
                sol.converged = true;
                break;
            }
        }

        if (!std::isfinite(cost))
            throw SolverError("solve_ocp: objective diverged", sol.trace);
        sol.cost = cost;
        sol.solve_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - wall0).count();
        return sol;
    }

    OcpSolution solve_ocp(const OcpProblem &problem, const SolverOptions &options)
    {
        OcpSolver solver(options);
        return solver.solve(problem);
    }

    std::vector<State> rollout_nominal(const ModelSpec &model, const State &x0,
                                       std::span<const Control> controls)
    {
        std::vector<State> xs;
        xs.reserve(controls.size() + 1);
        xs.push_back(x0);
        for (std::size_t t = 0; t < controls.size(); ++t)
            xs.push_back(step_nominal(model, xs.back(), controls[t], static_cast<int>(t)));
        return xs;
    }

    std::vector<Control> shift_controls(std::span<const Control> controls, int horizon)
    {
        if (controls.empty() || horizon < 1)
            throw ContractViolation("shift_controls: need a non-empty sequence and positive horizon");
        const auto h = static_cast<std::size_t>(horizon);
        std::vector<Control> out;
        out.reserve(h);
        for (std::size_t t = 1; t < controls.size() && out.size() < h; ++t)
            out.push_back(controls[t]);
        while (out.size() < h)
            out.push_back(controls.back());
        return out;
    }
} // namespace stochplan
