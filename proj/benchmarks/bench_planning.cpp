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
#include "stochplan/noise.hpp"
#include "stochplan/policies.hpp"
#include "stochplan/presets.hpp"
#include "stochplan/trajopt.hpp"

#include <benchmark/benchmark.h>

using namespace stochplan;

namespace
{
    SingleAgentPreset preset_for(int index)
    {
        switch (index)
        {
        case 0:
            return car_single();
        case 1:
            return trailers_single();
        default:
            return quadrotor_single();
        }
    }

    PolicyConfig policy(PolicyKind kind)
    {
        PolicyConfig p;
        p.kind = kind;
        return p;
    }
} // namespace

static void BM_SolveOcp(benchmark::State &state)
{
    const SingleAgentPreset p = preset_for(static_cast<int>(state.range(0)));
    const QuadraticCost cost(p.cost);
    state.SetLabel(p.name);
    for (auto _ : state)
        benchmark::DoNotOptimize(solve_ocp({p.model, cost, p.x0, p.horizon}));
}
BENCHMARK(BM_SolveOcp)->DenseRange(0, 2)->Unit(benchmark::kMillisecond);

static void BM_LqrGains(benchmark::State &state)
{
    const SingleAgentPreset p = car_single();
    const QuadraticCost cost(p.cost);
    const OcpSolution sol = solve_ocp({p.model, cost, p.x0, p.horizon});
    const LinearizedSystem lin = linearize(p.model, sol.states, sol.controls);
    const LqrWeights w = LqrWeights::surrogate(p.cost);
    for (auto _ : state)
        benchmark::DoNotOptimize(lqr_gains(lin, w));
}
BENCHMARK(BM_LqrGains)->Unit(benchmark::kMicrosecond);

static void BM_Rollout(benchmark::State &state)
{
    const SingleAgentPreset p = car_single();
    const Scenario sc = p.scenario();
    const NominalPlan plan = initial_plan(sc, GainSource::SurrogateLqr);
    const ExecutionOptions opts{SolverOptions{}, &plan};
    const PolicyConfig cfg = policy(static_cast<PolicyKind>(state.range(0)));
    state.SetLabel(std::string(to_string(cfg.kind)));
    std::uint64_t seed = 0;
    for (auto _ : state)
        benchmark::DoNotOptimize(execute_policy(sc, cfg, 0.4, NoiseStream(seed++), opts));
}
BENCHMARK(BM_Rollout)
    ->Arg(static_cast<int>(PolicyKind::TLQR))
    ->Arg(static_cast<int>(PolicyKind::TLQR2))
    ->Arg(static_cast<int>(PolicyKind::MPC))
    ->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
