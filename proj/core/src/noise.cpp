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

#include "stochplan/noise.hpp"

#include "stochplan/errors.hpp"

#include <random>

namespace stochplan
{
    std::uint64_t mix64(std::uint64_t x)
    {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    Vector NoiseStream::standard_normal(int t, int n) const
    {
        if (t < 0 || n < 0)
            throw ContractViolation("NoiseStream: negative step or size");
        const std::uint64_t key = mix64(mix64(mix64(seed_) ^ stream_) ^ static_cast<std::uint64_t>(t));
        std::mt19937_64 engine(key);
        std::normal_distribution<double> normal(0.0, 1.0);
        Vector nu(n);
        for (int i = 0; i < n; ++i)
            nu(i) = normal(engine);
        return nu;
    }

    Control sample_noise(const NoiseStream &stream, int t, const Control &u_max)
    {
        return u_max.cwiseProduct(stream.standard_normal(t, static_cast<int>(u_max.size())));
    }
} // namespace stochplan
