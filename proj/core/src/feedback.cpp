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

#include "stochplan/feedback.hpp"

#include "stochplan/errors.hpp"

#include "json.hpp"

#include <cmath>
#include <sstream>
#include <vector>

namespace stochplan
{
    namespace
    {
        void require_square_sym(const Matrix &m, int n, const char *what)
        {
            if (m.rows() != n || m.cols() != n)
                throw ContractViolation(std::string("LqrWeights: ") + what + " has wrong size");
            if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + m.cwiseAbs().maxCoeff()))
                throw ContractViolation(std::string("LqrWeights: ") + what + " is not symmetric");
        }

        double min_eig(const Matrix &m)
        {
            return Eigen::SelfAdjointEigenSolver<Matrix>(m, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
        }

        nlohmann::json to_json(const Matrix &m)
        {
            auto rows = nlohmann::json::array();
            for (Eigen::Index r = 0; r < m.rows(); ++r)
            {
                auto row = nlohmann::json::array();
                for (Eigen::Index c = 0; c < m.cols(); ++c)
                    row.push_back(m(r, c));
                rows.push_back(std::move(row));
            }
            return rows;
        }
    } // namespace

    void LqrWeights::validate(int n_x, int n_u) const
    {
        require_square_sym(Q, n_x, "Q");
        require_square_sym(Qf, n_x, "Qf");
        require_square_sym(R, n_u, "R");
        if (min_eig(Q) < -1e-12 || min_eig(Qf) < -1e-12)
            throw ContractViolation("LqrWeights: Q and Qf must be positive semidefinite");
        if (min_eig(R) <= 0.0)
            throw ContractViolation("LqrWeights: R must be positive definite");
    }

    LqrWeights LqrWeights::surrogate(const CostSpec &cost, double shim)
    {
        const auto n = cost.Wx.rows();
        return {cost.Wx + shim * Matrix::Identity(n, n), cost.Wu, cost.Wxf};
    }

    LqrWeights LqrWeights::surrogate(const JointCost &cost, double shim)
    {
        const int nx = cost.state_dim();
        const int nu = cost.control_dim();
        LqrWeights w{Matrix::Zero(nx, nx), Matrix::Zero(nu, nu), Matrix::Zero(nx, nx)};
        for (int i = 0; i < cost.agent_count(); ++i)
        {
            const LqrWeights part = surrogate(cost.agent(i), shim);
            const int xo = cost.state_offset(i);
            const int uo = cost.control_offset(i);
            w.Q.block(xo, xo, part.Q.rows(), part.Q.cols()) = part.Q;
            w.Qf.block(xo, xo, part.Qf.rows(), part.Qf.cols()) = part.Qf;
            w.R.block(uo, uo, part.R.rows(), part.R.cols()) = part.R;
        }
        return w;
    }

    GainSchedule lqr_gains(const LinearizedSystem &lin, const LqrWeights &w)
    {
        const std::size_t T = lin.horizon();
        if (T == 0 || lin.B.size() != T)
            throw ContractViolation("lqr_gains: empty or inconsistent linearization");
        const auto nx = lin.A.front().rows();
        const auto nu = lin.B.front().cols();
        w.validate(static_cast<int>(nx), static_cast<int>(nu));

        GainSchedule out;
        out.L.resize(T);
        out.P.resize(T + 1);
        out.P[T] = w.Qf;
        Eigen::LLT<Matrix> llt;
        for (std::size_t s = T; s-- > 0;)
        {
            const Matrix &A = lin.A[s];
            const Matrix &B = lin.B[s];
            if (A.rows() != nx || A.cols() != nx || B.rows() != nx || B.cols() != nu)
                throw ContractViolation("lqr_gains: dimension mismatch at t=" + std::to_string(s));
            const Matrix &P = out.P[s + 1];
            const Matrix PB = P * B;
            const Matrix S = w.R + B.transpose() * PB;
            llt.compute(S);
            if (llt.info() != Eigen::Success)
                throw NumericError("lqr_gains: R + B'PB is not positive definite at t=" + std::to_string(s));
            out.L[s] = llt.solve(PB.transpose() * A);
            Matrix Pn = A.transpose() * P * A - A.transpose() * PB * out.L[s] + w.Q;
            out.P[s] = 0.5 * (Pn + Pn.transpose());
            if (!out.P[s].allFinite())
                throw NumericError("lqr_gains: non-finite value Hessian at t=" + std::to_string(s));
        }
        return out;
    }

    GainSchedule surrogate_lqr_gains(const ModelSpec &model, const LqrWeights &w,
                                     std::span<const State> xbar, std::span<const Control> ubar)
    {
        return lqr_gains(linearize(model, xbar, ubar), w);
    }

    GainSchedule tpfc_gains(const ModelSpec &model, const Objective &objective,
                            std::span<const State> xbar, std::span<const Control> ubar,
                            double residual_tol)
    {
        if (xbar.size() != ubar.size() + 1 || ubar.empty())
            throw ContractViolation("tpfc_gains: need |xbar| == |ubar| + 1 >= 2");
        constexpr double h = 1e-4;
        const std::size_t T = ubar.size();

        GainSchedule out;
        out.L.resize(T);
        out.P.resize(T + 1);
        out.G.resize(T + 1);
        TerminalExpansion te;
        objective.expand_terminal(xbar[T], te);
        out.P[T] = te.lxx;
        out.G[T] = te.lx;

        StageExpansion se;
        Eigen::LLT<Matrix> llt;
        double worst = 0.0;
        std::size_t worst_t = 0;
        int floored = 0;
        int clamped = 0;
        std::size_t last_floored_t = 0;
        for (std::size_t s = T; s-- > 0;)
        {
            const int t = static_cast<int>(s);
            const State &x = xbar[s];
            const Control &u = ubar[s];
            const Matrix A = state_jacobian(model, x, u, t);
            const Matrix B = model.input_matrix(x, t);
            objective.expand_stage(x, u, se);
            const Matrix &P = out.P[s + 1];
            const Vector &G = out.G[s + 1];

            const Matrix Hxx = contracted_state_hessian(model, G, x, u, t, h);
            const Matrix Hux = contracted_mixed_hessian(model, G, x, t, h);
            const Matrix S = se.luu + B.transpose() * P * B;
            const Matrix Qux = B.transpose() * P * A + se.lux + Hux;
            if (!S.allFinite() || !Qux.allFinite())
                throw NumericError("tpfc_gains: non-finite expansion at t=" + std::to_string(s));

            // Controls held at a box bound get no feedback, as in
            // control-limited DDP; the gain acts on the free block only.
            std::vector<int> free;
            for (int i = 0; i < model.n_u; ++i)
            {
                const double tol = 1e-8 * (1.0 + std::abs(u(i)));
                if (u(i) > model.u_min(i) + tol && u(i) < model.u_max(i) - tol)
                    free.push_back(i);
            }
            clamped += static_cast<int>(free.size()) < model.n_u;

            // Stationarity holds only in the free directions.
            const Vector grad = se.lu + B.transpose() * G;
            double residual = 0.0;
            for (int i : free)
                residual = std::max(residual, std::abs(grad(i)));
            const double relative = residual / (1.0 + se.lu.cwiseAbs().maxCoeff());
            if (relative > worst)
            {
                worst = relative;
                worst_t = s;
            }
            out.first_order_residual = std::max(out.first_order_residual, residual);
            Matrix K = Matrix::Zero(model.n_u, model.n_x);
            Matrix Pn = se.lxx + A.transpose() * P * A + Hxx;
            if (!free.empty())
            {
                const auto nf = static_cast<Eigen::Index>(free.size());
                Matrix Sf(nf, nf), Rf(nf, nf), Qf(nf, model.n_x);
                for (Eigen::Index i = 0; i < nf; ++i)
                {
                    Qf.row(i) = Qux.row(free[i]);
                    for (Eigen::Index j = 0; j < nf; ++j)
                    {
                        Sf(i, j) = S(free[i], free[j]);
                        Rf(i, j) = se.luu(free[i], free[j]);
                    }
                }
                // With P PSD, S >= l_uu. Otherwise eigenvalues are replaced by
                // max(|lambda|, min eig l_uu) so the gain stays bounded.
                const double lo = min_eig(Rf);
                const Eigen::SelfAdjointEigenSolver<Matrix> eig(Sf);
                if (eig.eigenvalues().minCoeff() < lo * (1.0 - 1e-9))
                {
                    Sf = eig.eigenvectors() * eig.eigenvalues().cwiseAbs().cwiseMax(lo).asDiagonal() *
                         eig.eigenvectors().transpose();
                    ++floored;
                    last_floored_t = s;
                }
                llt.compute(Sf);
                if (llt.info() != Eigen::Success)
                    throw NumericError("tpfc_gains: S_t is not positive definite at t=" + std::to_string(s));
                const Matrix Kf = -llt.solve(Qf);
                for (Eigen::Index i = 0; i < nf; ++i)
                    K.row(free[i]) = Kf.row(i);
                Pn -= Kf.transpose() * Sf * Kf;
            }
            out.P[s] = 0.5 * (Pn + Pn.transpose());
            if (!out.P[s].allFinite())
                throw NumericError("tpfc_gains: non-finite value Hessian at t=" + std::to_string(s));
            out.G[s] = se.lx + A.transpose() * G;
            out.L[s] = -K;
        }
        if (worst > residual_tol)
        {
            std::ostringstream os;
            os << "first-order condition residual " << worst << " (relative) at t=" << worst_t
               << "; nominal is not an unconstrained stationary point";
            out.warnings.push_back(os.str());
        }
        if (floored > 0)
        {
            std::ostringstream os;
            os << "S_t eigenvalues floored at " << floored << " step(s), earliest t=" << last_floored_t;
            out.warnings.push_back(os.str());
        }
        if (clamped > 0)
            out.warnings.push_back("feedback zeroed for bound controls at " + std::to_string(clamped) + " step(s)");
        return out;
    }

    std::string gain_schedule_json(const GainSchedule &gains)
    {
        nlohmann::json j;
        j["horizon"] = gains.horizon();
        auto &L = j["L"] = nlohmann::json::array();
        for (const auto &m : gains.L)
            L.push_back(to_json(m));
        auto &P = j["P"] = nlohmann::json::array();
        for (const auto &m : gains.P)
            P.push_back(to_json(m));
        auto &G = j["G"] = nlohmann::json::array();
        for (const auto &g : gains.G)
            G.push_back(std::vector<double>(g.data(), g.data() + g.size()));
        j["first_order_residual"] = gains.first_order_residual;
        j["warnings"] = gains.warnings;
        return j.dump();
    }
} // namespace stochplan
