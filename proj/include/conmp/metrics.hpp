// Copyright 2026 The conmp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef CONMP_METRICS_HPP
#define CONMP_METRICS_HPP

#include <map>
#include <string>
#include <vector>

#include "conmp/models.hpp"

namespace conmp {

// Beliefs the harness records per iteration for metric computation.
std::vector<std::string> trackedVariables(const ModelSpec& spec);

std::vector<std::string> metricNames(const ModelSpec& spec);

// Errors of posterior means against the sampler's ground truth:
// center/colour errors are Euclidean distances, side length and radius are
// absolute errors, light error is the cosine angle distance of unit vectors,
// reflectance error is the RMSE over pixels.
std::map<std::string, double> computeMetrics(
    const ModelSpec& spec, const std::map<std::string, Message>& beliefs,
    const std::map<std::string, Eigen::VectorXd>& truth);

}  // namespace conmp

#endif  // CONMP_METRICS_HPP
