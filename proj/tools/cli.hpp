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

#include <iosfwd>

namespace stochplan::cli
{
    enum ExitCode : int
    {
        kOk = 0,
        kRolloutFailures = 1,  ///< artifacts written, but some rollouts failed
        kError = 2             ///< bad arguments, invalid config or a module error
    };

    /// Entry point for `stochplan <run|sweep|verify|report> [options]`.
    /// Diagnostics go to `err`, progress lines to `out`.
    int main(int argc, const char *const *argv, std::ostream &out, std::ostream &err);
} // namespace stochplan::cli
