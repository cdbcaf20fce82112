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

#include "stochplan/errors.hpp"
#include "stochplan/models.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace stochplan;
using std::numbers::pi;

namespace
{
    State vec(std::initializer_list<double> v)
    {
        State s(static_cast<Eigen::Index>(v.size()));
        Eigen::Index i = 0;
        for (double x : v)
            s(i++) = x;
        return s;
    }

    // Hand-derived Jacobian of the car update in x.
    Matrix car_jacobian(const State &x, const Control &u, double dt, double L)
    {
        Matrix A = Matrix::Identity(4, 4);
        A(0, 2) = -u(0) * std::sin(x(2)) * dt;
        A(1, 2) = u(0) * std::cos(x(2)) * dt;
        const double c = std::cos(x(3));
        A(2, 3) = u(0) / (L * c * c) * dt;
        return A;
    }
} // namespace

TEST(Car, DimensionsAndBounds)
{
    const ModelSpec m = car4d();
    EXPECT_EQ(m.n_x, 4);
    EXPECT_EQ(m.n_u, 2);
    EXPECT_DOUBLE_EQ(m.dt, 0.1);
    EXPECT_DOUBLE_EQ(m.u_min(0), -4.0);
    EXPECT_DOUBLE_EQ(m.u_max(0), 4.0);
    EXPECT_DOUBLE_EQ(m.u_min(1), -pi / 12.0);
    EXPECT_DOUBLE_EQ(m.u_max(1), pi / 12.0);
    EXPECT_DOUBLE_EQ(m.constant("wheelbase"), 1.0);
    EXPECT_NO_THROW(m.validate());
}

TEST(Car, StraightSteeringKeepsHeading)
{
    const ModelSpec m = car4d();
    const State x = vec({1.0, 2.0, 0.3, 0.0});
    const State next = step_nominal(m, x, vec({2.5, 0.0}));
    EXPECT_DOUBLE_EQ(next(2), 0.3);
    EXPECT_DOUBLE_EQ(next(3), 0.0);
    EXPECT_NEAR(next(0), 1.0 + 2.5 * std::cos(0.3) * 0.1, 1e-15);
    EXPECT_NEAR(next(1), 2.0 + 2.5 * std::sin(0.3) * 0.1, 1e-15);
}

TEST(Car, NoiseEntersThroughInputMatrix)
{
    const ModelSpec m = car4d();
    const State x = vec({0.0, 0.0, 0.5, 0.1});
    const Control u = vec({1.0, 0.1});
    const Control w = vec({0.5, -0.2});
    const State a = step(m, x, u, w, 0.4);
    const State b = step_nominal(m, x, u + 0.4 * w);
    EXPECT_TRUE(a.isApprox(b, 1e-15));
}

TEST(Car, DeterministicAtZeroNoise)
{
    const ModelSpec m = car4d();
    const State x = vec({0.1, -0.3, 1.2, 0.2});
    const Control u = vec({-1.3, 0.05});
    const State a = step(m, x, u, Control(), 0.0);
    const State b = step(m, x, u, Control(), 0.0);
    EXPECT_EQ(a, b);
}

TEST(Trailers, DimensionsAndBounds)
{
    const ModelSpec m = car_trailers6d();
    EXPECT_EQ(m.n_x, 6);
    EXPECT_EQ(m.n_u, 2);
    EXPECT_DOUBLE_EQ(m.u_max(0), 0.8);
    EXPECT_DOUBLE_EQ(m.u_max(1), pi / 6.0);
    EXPECT_DOUBLE_EQ(m.u_min(1), -pi / 6.0);
}

TEST(Trailers, AlignedTrailersKeepHeadings)
{
    const ModelSpec m = car_trailers6d();
    const State x = vec({0.0, 0.0, 0.7, 0.0, 0.7, 0.7});
    const State next = step_nominal(m, x, vec({0.8, 0.0}));
    EXPECT_DOUBLE_EQ(next(4), 0.7);
    EXPECT_DOUBLE_EQ(next(5), 0.7);
}

TEST(Trailers, OneStepFromStart)
{
    const ModelSpec m = car_trailers6d();
    const State x = vec({0, 0, pi / 3.0, 0, 0, 0});
    const State next = step_nominal(m, x, vec({0.8, 0.0}));
    EXPECT_NEAR(next(4), 0.8 / 1.0 * std::sin(pi / 3.0) * 0.1, 1e-15);
    // theta1 == theta2 at the start, so the second trailer does not turn yet.
    EXPECT_DOUBLE_EQ(next(5), 0.0);
    EXPECT_NEAR(next(0), 0.8 * 0.5 * 0.1, 1e-15);
}

TEST(Quadrotor, DimensionsAndBounds)
{
    const ModelSpec m = quadrotor12d();
    EXPECT_EQ(m.n_x, 12);
    EXPECT_EQ(m.n_u, 4);
    EXPECT_DOUBLE_EQ(m.u_min(0), 0.0);
    EXPECT_DOUBLE_EQ(m.u_max(0), 1.5);
    for (int i = 1; i < 4; ++i)
    {
        EXPECT_DOUBLE_EQ(m.u_min(i), -0.05);
        EXPECT_DOUBLE_EQ(m.u_max(i), 0.05);
    }
}

TEST(Quadrotor, HoverIsAnEquilibrium)
{
    const QuadrotorParams p;
    const ModelSpec m = quadrotor12d(p);
    State x = State::Zero(12);
    x.head<3>() << 1.0, -2.0, 3.0;
    Control u = Control::Zero(4);
    u(0) = p.mass * 9.81;
    const State next = step_nominal(m, x, u);
    EXPECT_TRUE(next.isApprox(x, 1e-14)) << next.transpose();
}

TEST(Quadrotor, FreeFall)
{
    const ModelSpec m = quadrotor12d();
    const State x = State::Zero(12);
    const State next = step_nominal(m, x, Control::Zero(4));
    State expected = State::Zero(12);
    expected(8) = -9.81 * 0.1;
    EXPECT_TRUE(next.isApprox(expected, 1e-14)) << next.transpose();
}

TEST(Quadrotor, HoverThrustWithinBounds)
{
    const QuadrotorParams p;
    EXPECT_LE(p.mass * 9.81, quadrotor12d(p).u_max(0));
}

TEST(ModelByName, KnownAndUnknown)
{
    EXPECT_EQ(model_by_name("car4d").n_x, 4);
    EXPECT_EQ(model_by_name("car_trailers6d").n_x, 6);
    EXPECT_EQ(model_by_name("quadrotor12d").n_x, 12);
    EXPECT_THROW(model_by_name("boat"), ContractViolation);
}

TEST(Step, RejectsWrongDimensions)
{
    const ModelSpec m = car4d();
    EXPECT_THROW(step_nominal(m, State::Zero(3), Control::Zero(2)), ContractViolation);
    EXPECT_THROW(step(m, State::Zero(4), Control::Zero(2), Control::Zero(1), 0.5), ContractViolation);
}

TEST(Linearize, LinearModelIsExact)
{
    std::mt19937_64 rng(7);
    const Matrix A = oracle::random_matrix(rng, 3, 3);
    const Matrix B = oracle::random_matrix(rng, 3, 2);
    const ModelSpec m = oracle::linear_model(A, B);
    std::vector<State> xs{vec({1, 2, 3}), vec({-4, 0.5, 2})};
    std::vector<Control> us{vec({0.3, -0.1})};
    const LinearizedSystem lin = linearize(m, xs, us);
    ASSERT_EQ(lin.horizon(), 1u);
    EXPECT_LE((lin.A[0] - A).cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_EQ(lin.B[0], B);
}

TEST(Linearize, CarHeadingColumn)
{
    const ModelSpec m = car4d();
    {
        std::vector<State> xs{vec({0, 0, 0, 0}), vec({0, 0, 0, 0})};
        std::vector<Control> us{vec({1.0, 0.0})};
        const LinearizedSystem lin = linearize(m, xs, us);
        EXPECT_NEAR(lin.A[0](0, 2), 0.0, 1e-9);
    }
    {
        std::vector<State> xs{vec({0, 0, pi / 4.0, 0}), vec({0, 0, 0, 0})};
        std::vector<Control> us{vec({2.0, 0.0})};
        const LinearizedSystem lin = linearize(m, xs, us);
        EXPECT_NEAR(lin.A[0](0, 2), -0.1414213562373095, 1e-6);
    }
}

TEST(Linearize, CarMatchesAnalyticJacobian)
{
    const ModelSpec m = car4d();
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    for (int k = 0; k < 20; ++k)
    {
        const State x = vec({5 * d(rng), 5 * d(rng), pi * d(rng), 0.25 * d(rng)});
        const Control u = vec({4 * d(rng), 0.2 * d(rng)});
        std::vector<State> xs{x, x};
        std::vector<Control> us{u};
        const Matrix A = linearize(m, xs, us).A[0];
        const Matrix ref = car_jacobian(x, u, 0.1, 1.0);
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j)
                EXPECT_LE(std::abs(A(i, j) - ref(i, j)), 1e-5 * std::max(1.0, std::abs(ref(i, j))))
                    << "entry " << i << "," << j;
    }
}

TEST(Linearize, ShapesAndPrecondition)
{
    const ModelSpec m = car_trailers6d();
    std::vector<State> xs(6, State::Zero(6));
    std::vector<Control> us(5, Control::Zero(2));
    const LinearizedSystem lin = linearize(m, xs, us);
    EXPECT_EQ(lin.A.size(), 5u);
    EXPECT_EQ(lin.B.size(), 5u);
    EXPECT_EQ(lin.A[0].rows(), 6);
    EXPECT_EQ(lin.B[0].cols(), 2);
    xs.pop_back();
    EXPECT_THROW(linearize(m, xs, us), ContractViolation);
}

TEST(Linearize, NonFiniteJacobianIsReported)
{
    ModelSpec m = oracle::linear_model(Matrix::Identity(2, 2), Matrix::Identity(2, 1));
    m.drift = [](const State &x) -> State {
        State y = x;
        y(1) = std::sqrt(x(1));  // undefined for negative x(1)
        return y;
    };
    std::vector<State> xs{vec({0.0, -1.0}), vec({0.0, 0.0})};
    std::vector<Control> us{vec({0.0})};
    EXPECT_THROW(linearize(m, xs, us), NumericError);
}

TEST(StackModels, BlockDiagonal)
{
    const ModelSpec joint = stack_models({car4d(), car4d()});
    EXPECT_EQ(joint.n_x, 8);
    EXPECT_EQ(joint.n_u, 4);
    const State x = vec({0, 0, 0.3, 0.1, 1, 1, -0.4, 0});
    const Control u = vec({1, 0.1, -2, 0});
    const State next = step_nominal(joint, x, u);
    EXPECT_TRUE(next.head(4).isApprox(step_nominal(car4d(), x.head(4), u.head(2))));
    EXPECT_TRUE(next.tail(4).isApprox(step_nominal(car4d(), x.tail(4), u.tail(2))));
}

TEST(ClampToBounds, Componentwise)
{
    const ModelSpec m = car4d();
    const Control c = clamp_to_bounds(m, vec({9.0, -1.0}));
    EXPECT_DOUBLE_EQ(c(0), 4.0);
    EXPECT_DOUBLE_EQ(c(1), -pi / 12.0);
}
