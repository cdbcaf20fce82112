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

#include "stochplan/costs.hpp"

#include "stochplan/errors.hpp"

#include <cmath>

namespace stochplan
{
    namespace
    {
        bool symmetric(const Matrix &m)
        {
            return m.rows() == m.cols() && (m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + m.cwiseAbs().maxCoeff());
        }

        double min_eigenvalue(const Matrix &m)
        {
            Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
            return es.eigenvalues().minCoeff();
        }

        // Accumulates the obstacle penalty derivatives into the planar block.
        double add_obstacles(const CostSpec &spec, const State &x, Vector *lx, Matrix *lxx)
        {
            double total = 0.0;
            const Eigen::Vector2d p = planar_position(x);
            for (const auto &ob : spec.obstacles)
            {
                const Eigen::Vector2d d = p - ob.center;
                const Eigen::Vector2d ed = ob.shape * d;
                const double phi = spec.collision_scale * std::exp(-(d.dot(ed) - 1.0));
                total += phi;
                if (lx)
                    lx->head<2>() += -2.0 * phi * ed;
                if (lxx)
                    lxx->topLeftCorner<2, 2>() += phi * (4.0 * ed * ed.transpose() - 2.0 * ob.shape);
            }
            return total;
        }
    } // namespace

    void CostSpec::validate() const
    {
        const auto n = goal.size();
        if (Wx.rows() != n || Wxf.rows() != n || !symmetric(Wx) || !symmetric(Wxf))
            throw ContractViolation("cost: Wx and Wxf must be symmetric n_x x n_x");
        if (Wu.rows() == 0 || !symmetric(Wu))
            throw ContractViolation("cost: Wu must be symmetric n_u x n_u");
        if (min_eigenvalue(Wx) < -1e-12 || min_eigenvalue(Wxf) < -1e-12)
            throw ContractViolation("cost: Wx and Wxf must be positive semidefinite");
        if (min_eigenvalue(Wu) <= 0.0)
            throw ContractViolation("cost: Wu must be positive definite");
        if (!(collision_scale > 0.0) || !(r_thresh > 0.0))
            throw ContractViolation("cost: collision scale and r_thresh must be positive");
        for (const auto &ob : obstacles)
        {
            if ((ob.shape - ob.shape.transpose()).cwiseAbs().maxCoeff() > 1e-12 ||
                min_eigenvalue(ob.shape) <= 0.0)
                throw ContractViolation("cost: obstacle shape must be symmetric positive definite");
        }
    }

    double obstacle_penalty(const CostSpec &spec, const Eigen::Vector2d &p)
    {
        double total = 0.0;
        for (const auto &ob : spec.obstacles)
        {
            const Eigen::Vector2d d = p - ob.center;
            total += spec.collision_scale * std::exp(-(d.dot(ob.shape * d) - 1.0));
        }
        return total;
    }

    double collision_penalty(const CostSpec &spec, const Eigen::Vector2d &p_i,
                             const Eigen::Vector2d &p_j)
    {
        const double r2 = spec.r_thresh * spec.r_thresh;
        return spec.collision_scale * std::exp(-((p_i - p_j).squaredNorm() - r2));
    }

    double stage_cost(const CostSpec &spec, const State &x, const Control &u)
    {
        const Vector e = x - spec.goal;
        double c = e.dot(spec.Wx * e) + u.dot(spec.Wu * u);
        if (!spec.obstacles.empty())
            c += obstacle_penalty(spec, planar_position(x));
        return c;
    }

    double terminal_cost(const CostSpec &spec, const State &x)
    {
        const Vector e = x - spec.goal;
        return e.dot(spec.Wxf * e);
    }

    double trajectory_cost(const CostSpec &spec, const ModelSpec &model,
                           std::span<const State> xs, std::span<const Control> us)
    {
        if (xs.size() != us.size() + 1)
            throw ContractViolation("trajectory_cost: |xs| must equal |us| + 1");
        if (!xs.empty() && xs.front().size() != model.n_x)
            throw ContractViolation("trajectory_cost: state dimension mismatch");
        double total = 0.0;
        for (std::size_t t = 0; t < us.size(); ++t)
            total += stage_cost(spec, xs[t], us[t]);
        return total + terminal_cost(spec, xs.back());
    }

    std::vector<double> running_costs(const CostSpec &spec, std::span<const State> xs,
                                      std::span<const Control> us)
    {
        if (xs.size() < us.size())
            throw ContractViolation("running_costs: fewer states than controls");
        std::vector<double> prefix;
        prefix.reserve(us.size());
        double acc = 0.0;
        for (std::size_t t = 0; t < us.size(); ++t)
        {
            acc += stage_cost(spec, xs[t], us[t]);
            prefix.push_back(acc);
        }
        return prefix;
    }

    QuadraticCost::QuadraticCost(CostSpec spec) : spec_(std::move(spec))
    {
        spec_.validate();
    }

    double QuadraticCost::stage(const State &x, const Control &u) const
    {
        return stage_cost(spec_, x, u);
    }

    double QuadraticCost::terminal(const State &x) const { return terminal_cost(spec_, x); }

    void QuadraticCost::expand_stage(const State &x, const Control &u, StageExpansion &out) const
    {
        const Vector e = x - spec_.goal;
        const Vector wx_e = spec_.Wx * e;
        const Vector wu_u = spec_.Wu * u;
        out.lx = 2.0 * wx_e;
        out.lu = 2.0 * wu_u;
        out.lxx = 2.0 * spec_.Wx;
        out.luu = 2.0 * spec_.Wu;
        out.lux = Matrix::Zero(u.size(), x.size());
        out.value = e.dot(wx_e) + u.dot(wu_u);
        if (!spec_.obstacles.empty())
            out.value += add_obstacles(spec_, x, &out.lx, &out.lxx);
    }

    void QuadraticCost::expand_terminal(const State &x, TerminalExpansion &out) const
    {
        const Vector e = x - spec_.goal;
        const Vector w_e = spec_.Wxf * e;
        out.value = e.dot(w_e);
        out.lx = 2.0 * w_e;
        out.lxx = 2.0 * spec_.Wxf;
    }

    JointCost::JointCost(std::vector<CostSpec> agents, double collision_scale, double r_thresh)
        : agents_(std::move(agents)), collision_scale_(collision_scale), r_thresh_(r_thresh)
    {
        if (agents_.empty())
            throw ContractViolation("JointCost: no agents");
        if (!(collision_scale > 0.0) || !(r_thresh > 0.0))
            throw ContractViolation("JointCost: collision scale and r_thresh must be positive");
        for (const auto &a : agents_)
        {
            parts_.emplace_back(a);
            x_off_.push_back(n_x_);
            u_off_.push_back(n_u_);
            n_x_ += a.state_dim();
            n_u_ += a.control_dim();
        }
    }

    double JointCost::collision_total(const State &x) const
    {
        const double r2 = r_thresh_ * r_thresh_;
        double total = 0.0;
        for (std::size_t i = 0; i < agents_.size(); ++i)
            for (std::size_t j = i + 1; j < agents_.size(); ++j)
            {
                const Eigen::Vector2d d = x.segment<2>(x_off_[i]) - x.segment<2>(x_off_[j]);
                total += collision_scale_ * std::exp(-(d.squaredNorm() - r2));
            }
        return total;
    }

    double JointCost::stage(const State &x, const Control &u) const
    {
        double total = 0.0;
        for (std::size_t i = 0; i < agents_.size(); ++i)
        {
            const auto &a = agents_[i];
            total += stage_cost(a, x.segment(x_off_[i], a.state_dim()),
                                u.segment(u_off_[i], a.control_dim()));
        }
        return total + collision_total(x);
    }

    double JointCost::terminal(const State &x) const
    {
        double total = 0.0;
        for (std::size_t i = 0; i < agents_.size(); ++i)
            total += terminal_cost(agents_[i], x.segment(x_off_[i], agents_[i].state_dim()));
        return total;
    }

    void JointCost::expand_stage(const State &x, const Control &u, StageExpansion &out) const
    {
        out.value = 0.0;
        out.lx = Vector::Zero(n_x_);
        out.lu = Vector::Zero(n_u_);
        out.lxx = Matrix::Zero(n_x_, n_x_);
        out.luu = Matrix::Zero(n_u_, n_u_);
        out.lux = Matrix::Zero(n_u_, n_x_);

        StageExpansion part;
        for (std::size_t i = 0; i < agents_.size(); ++i)
        {
            const auto &a = agents_[i];
            const int nx = a.state_dim(), nu = a.control_dim();
            parts_[i].expand_stage(x.segment(x_off_[i], nx), u.segment(u_off_[i], nu), part);
            out.value += part.value;
            out.lx.segment(x_off_[i], nx) += part.lx;
            out.lu.segment(u_off_[i], nu) += part.lu;
            out.lxx.block(x_off_[i], x_off_[i], nx, nx) += part.lxx;
            out.luu.block(u_off_[i], u_off_[i], nu, nu) += part.luu;
        }

        const double r2 = r_thresh_ * r_thresh_;
        const Eigen::Matrix2d eye = Eigen::Matrix2d::Identity();
        for (std::size_t i = 0; i < agents_.size(); ++i)
            for (std::size_t j = i + 1; j < agents_.size(); ++j)
            {
                const int oi = x_off_[i], oj = x_off_[j];
                const Eigen::Vector2d d = x.segment<2>(oi) - x.segment<2>(oj);
                const double psi = collision_scale_ * std::exp(-(d.squaredNorm() - r2));
                out.value += psi;
                const Eigen::Vector2d g = -2.0 * psi * d;
                out.lx.segment<2>(oi) += g;
                out.lx.segment<2>(oj) -= g;
                const Eigen::Matrix2d h = psi * (4.0 * d * d.transpose() - 2.0 * eye);
                out.lxx.block<2, 2>(oi, oi) += h;
                out.lxx.block<2, 2>(oj, oj) += h;
                out.lxx.block<2, 2>(oi, oj) -= h;
                out.lxx.block<2, 2>(oj, oi) -= h;
            }
    }

    void JointCost::expand_terminal(const State &x, TerminalExpansion &out) const
    {
        out.value = 0.0;
        out.lx = Vector::Zero(n_x_);
        out.lxx = Matrix::Zero(n_x_, n_x_);
        for (std::size_t i = 0; i < agents_.size(); ++i)
        {
            const auto &a = agents_[i];
            const int nx = a.state_dim();
            const Vector e = x.segment(x_off_[i], nx) - a.goal;
            const Vector w_e = a.Wxf * e;
            out.value += e.dot(w_e);
            out.lx.segment(x_off_[i], nx) = 2.0 * w_e;
            out.lxx.block(x_off_[i], x_off_[i], nx, nx) = 2.0 * a.Wxf;
        }
    }
} // namespace stochplan
