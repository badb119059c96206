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

#ifndef CONMP_EXPERIMENT_HPP
#define CONMP_EXPERIMENT_HPP

#include <string>
#include <vector>

#include "conmp/consensus.hpp"
#include "conmp/metrics.hpp"
#include "conmp/serialize.hpp"

namespace conmp {

enum class Arm { MP, CMP, CMP1Stage, CMP2Stage, ForestOnly };

const char* armName(Arm a);
Arm armFromName(const std::string& name);

enum class TrainSource { Convergence, Samples, Labels };

struct ExperimentConfig {
  ModelSpec model;
  TrainSource trainSource = TrainSource::Samples;
  int trainProblems = 500;   // D
  int trainIterations = 100; // long runs for the convergence source
  int trials = 50;
  int iterations = 50;
  EngineConfig engine;
  ForestConfig forest;
  std::vector<Arm> arms;
  std::uint64_t seed = 0;
};

struct MetricRow {
  std::string arm;
  int problem = 0;
  int iteration = 0;
  std::string metric;
  double value = 0;
};

struct ExperimentResult {
  std::vector<MetricRow> rows;
  Json summary;
  // Ground truth per trial, for downstream analyses on the same problems.
  std::vector<std::map<std::string, Eigen::VectorXd>> truths;
  // Trained forests, serialized per attachment name (empty for MP-only runs).
  std::map<std::string, Json> forests;
  int scheduleViolations = 0;
  int failedRuns = 0;
};

// Trains predictors once (when any arm needs them), runs every arm on the
// same test problems, and emits one row per (arm, problem, iteration, metric).
// Failed runs contribute sentinel rows of value 1e10 and are counted.
ExperimentResult runExperiment(const ExperimentConfig& cfg);

std::string metricsCsv(const std::vector<MetricRow>& rows);

Json toJson(const ExperimentConfig& cfg);
ExperimentConfig experimentConfigFromJson(const Json& j);

}  // namespace conmp

#endif  // CONMP_EXPERIMENT_HPP
