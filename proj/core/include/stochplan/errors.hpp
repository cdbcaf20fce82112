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

#include <stdexcept>
#include <string>
#include <vector>

namespace stochplan
{
    /// Raised when a caller breaks a documented precondition (dimension
    /// mismatch, malformed horizon, invalid weights).
    class ContractViolation : public std::invalid_argument
    {
    public:
        using std::invalid_argument::invalid_argument;
    };

    /// Raised when a computation produces a non-finite value.
    class NumericError : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    /// Raised by the trajectory optimizer when the objective diverges.
    class SolverError : public std::runtime_error
    {
    public:
        SolverError(const std::string &what, std::vector<double> trace)
            : std::runtime_error(what), trace_(std::move(trace)) {}

        /// Objective values of the accepted iterations before the failure.
        const std::vector<double> &trace() const noexcept { return trace_; }

    private:
        std::vector<double> trace_;
    };

    /// Configuration problems, tagged with the offending field path
    /// (e.g. "policies[1].J_thresh").
    class ConfigError : public std::runtime_error
    {
    public:
        ConfigError(std::string path, const std::string &message)
            : std::runtime_error(path.empty() ? message : path + ": " + message),
              path_(std::move(path)) {}

        const std::string &path() const noexcept { return path_; }

    private:
        std::string path_;
    };
} // namespace stochplan
