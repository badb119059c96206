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

#ifndef CONMP_ENGINE_HPP
#define CONMP_ENGINE_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "conmp/graph.hpp"

namespace conmp {

struct DampingRule {
  FactorType kind;
  std::string target;  // variable id
  double alpha;        // step size in (0, 1]
};

struct EngineConfig {
  int iterations = 50;
  InferenceMode mode = InferenceMode::VMP;
  std::vector<DampingRule> damping;
  double convergenceTol = 0.0;  // max natural-parameter change; 0 disables
  std::uint64_t seed = 0;
  QuadratureSpec quad;
  std::vector<std::string> tracked;  // beliefs recorded per iteration
  bool consensusEnabled = true;      // false drops all consensus actions
};

enum class Phase { Consensus, Standard };

struct ScheduleAction {
  Phase phase = Phase::Standard;
  int factor = -1;      // standard actions
  int slot = -1;        // target slot within the factor
  int attachment = -1;  // consensus actions
  int target = -1;      // variable index
  int layer = 0;        // target layer
  bool bottomUp = true;
};

// One inference iteration = bottom-up sweep then top-down sweep. Consensus
// actions appear only in the first iteration, at the head of their layer's
// bottom-up segment, after the layer below has been updated.
struct Schedule {
  std::vector<ScheduleAction> firstIteration;
  std::vector<ScheduleAction> steadyState;
};

Schedule makeSchedule(const FactorGraph& g, const EngineConfig& cfg);

// Checks the scheduling invariants (consensus-first-within-layer, bottom-up
// layer order, no consensus outside iteration one); returns violations.
std::vector<std::string> validateSchedule(const FactorGraph& g, const Schedule& s);

struct IterationRecord {
  std::map<std::string, Message> beliefs;  // tracked variables only
  double maxDelta = 0;                     // largest natural-parameter change
  double wallMs = 0;
};

struct InferenceTrace {
  // Index 0 holds the initial (prior) beliefs; entry i the state after sweep i.
  std::vector<IterationRecord> iterations;
  std::map<std::string, Message> finalBeliefs;  // every unobserved variable
  std::vector<std::string> events;              // skipped updates, fallbacks
  int scheduleViolations = 0;
  int consensusEmitted = 0;
  bool earlyStopped = false;
};

// Supplies consensus messages at consensus actions. Training-data capture and
// live prediction implement the same interface so the context is gathered by
// one code path.
class ConsensusSource {
 public:
  virtual ~ConsensusSource() = default;
  // `context` holds the current marginals of the attachment's context
  // variables in canonical order. Returning nullopt skips the emission.
  virtual std::optional<Message> consensusMessage(const PredictorAttachment& att,
                                                  const std::string& targetId,
                                                  const std::vector<Message>& context,
                                                  std::vector<std::string>& events) = 0;
};

InferenceTrace runInference(const FactorGraph& g, const EngineConfig& cfg,
                            const Schedule& schedule,
                            ConsensusSource* consensus = nullptr);

// Damped update: alpha * fresh + (1 - alpha) * old in natural parameters.
Message dampMessage(const Message& old, const Message& fresh, double alpha);

bool traceEquals(const InferenceTrace& a, const InferenceTrace& b);

}  // namespace conmp

#endif  // CONMP_ENGINE_HPP
