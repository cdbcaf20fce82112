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

#include "stochplan/models.hpp"

#include <cstdint>

namespace stochplan
{
    /// Counter-based Gaussian source: the draw for step t depends only on
    /// (seed, stream, t), never on how many draws were taken before. Rollouts
    /// that share a seed therefore see the same disturbance sequence.
    class NoiseStream
    {
    public:
        explicit NoiseStream(std::uint64_t seed, std::uint64_t stream = 0) : seed_(seed), stream_(stream) {}

        std::uint64_t seed() const { return seed_; }
        std::uint64_t stream() const { return stream_; }

        /// nu_t ~ N(0, I_n).
        Vector standard_normal(int t, int n) const;

        /// Same seed, different stream id (one per agent).
        NoiseStream substream(std::uint64_t stream) const { return NoiseStream(seed_, stream); }

    private:
        std::uint64_t seed_;
        std::uint64_t stream_;
    };

    /// w_t = u_max .* nu_t; the caller applies the eps scale at the dynamics step.
    Control sample_noise(const NoiseStream &stream, int t, const Control &u_max);

    /// SplitMix64 finalizer.
    std::uint64_t mix64(std::uint64_t x);
} // namespace stochplan
