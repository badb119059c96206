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

#ifndef CONMP_SERIALIZE_HPP
#define CONMP_SERIALIZE_HPP

#include <json.hpp>
#include <string>

#include "conmp/models.hpp"

namespace conmp {

using Json = nlohmann::json;

Json toJson(const Eigen::VectorXd& v);
Json toJson(const Eigen::MatrixXd& m);
Eigen::VectorXd vectorFromJson(const Json& j);
Eigen::MatrixXd matrixFromJson(const Json& j);

// Messages serialize as tagged records {family, ...natural parameters}.
Json toJson(const Message& m);
Message messageFromJson(const Json& j);

// Model config schema: {"model": "circle"|"square"|"face"|"chain", ...fields}.
Json toJson(const ModelSpec& spec);
ModelSpec modelSpecFromJson(const Json& j);

// Graph structure dump (ids, kinds, edges, layers) for determinism checks.
Json graphToJson(const FactorGraph& g);

// Sampled datasets persist as JSON lines {seed, latents, observations}.
std::string sampleToJsonLine(std::uint64_t seed, const SampleResult& sample);
std::pair<std::uint64_t, SampleResult> sampleFromJsonLine(const std::string& line);

// Grayscale PGM dump of per-pixel values in [lo, hi], row-major.
void writePgm(const std::string& path, const Eigen::MatrixXd& image, double lo = 0.0,
              double hi = 1.0);

}  // namespace conmp

#endif  // CONMP_SERIALIZE_HPP
