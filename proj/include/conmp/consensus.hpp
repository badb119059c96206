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

#ifndef CONMP_CONSENSUS_HPP
#define CONMP_CONSENSUS_HPP

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "conmp/engine.hpp"
#include "conmp/forest.hpp"
#include "conmp/models.hpp"

namespace conmp {

// One (context, oracle message) pair. Contexts are shared between the
// examples of a problem (type-B attachments emit one example per target).
struct TrainingExample {
  std::shared_ptr<const std::vector<Message>> context;  // canonical order
  std::string targetId;
  Message oracle;
};

struct TrainingSet {
  std::map<std::string, std::vector<TrainingExample>> perAttachment;
  int discarded = 0;  // problems dropped for non-finite results
  int skippedTargets = 0;  // labelled targets without labels
};

// Captures contextual marginals at the consensus points of iteration one
// without emitting anything; the code path matches live emission exactly.
class ContextCapture : public ConsensusSource {
 public:
  std::optional<Message> consensusMessage(const PredictorAttachment& att,
                                          const std::string& targetId,
                                          const std::vector<Message>& context,
                                          std::vector<std::string>& events) override;

  std::map<std::string, std::shared_ptr<const std::vector<Message>>> captured;
};

// Source 1: contexts at iteration one, oracles from beliefs at convergence of
// long standard message-passing runs.
TrainingSet genTrainingFromConvergence(const ModelSpec& spec, int problems,
                                       int longIterations, const EngineConfig& engineCfg,
                                       std::uint64_t seed);

// Source 2: contexts at iteration one of a single standard sweep, oracles as
// point masses at the sampled latent values.
TrainingSet genTrainingFromSamples(const ModelSpec& spec, int problems,
                                   const EngineConfig& engineCfg, std::uint64_t seed);

struct LabelledProblem {
  std::map<std::string, Eigen::VectorXd> observations;
  std::map<std::string, Eigen::VectorXd> labels;  // keyed by target variable id
};

// Source 3: as source 2, but oracles are point masses at provided labels.
TrainingSet genTrainingFromLabels(const ModelSpec& spec,
                                  const std::vector<LabelledProblem>& dataset,
                                  const EngineConfig& engineCfg);

// JSON-lines persistence of a training set (one example per line).
std::string trainingExampleToJsonLine(const std::string& attachment,
                                      const TrainingExample& ex);
std::pair<std::string, TrainingExample> trainingExampleFromJsonLine(
    const std::string& line);

Eigen::VectorXd regressionTarget(const Message& oracle);

std::vector<TrainRow> featurizeExamples(const std::vector<TrainingExample>& examples,
                                        const ContextFeaturizer& featurizer);

// Trained predictors plus live emission. Prediction variances are floored so
// a degenerate leaf cannot freeze the target belief.
class ConsensusBank : public ConsensusSource {
 public:
  struct Entry {
    Forest forest;
    std::shared_ptr<const ContextFeaturizer> featurizer;
    int stage = 1;
  };

  std::map<std::string, Entry> entries;
  std::set<std::string> enabled;  // attachment names active for this run
  double varianceFloor = 1e-9;

  // Contexts seen at the last emission per attachment (capture-parity tests).
  mutable std::map<std::string, std::vector<Message>> lastContext;

  std::optional<Message> consensusMessage(const PredictorAttachment& att,
                                          const std::string& targetId,
                                          const std::vector<Message>& context,
                                          std::vector<std::string>& events) override;

  // Direct prediction without message passing (the forest-only baseline).
  Message predictOnly(const PredictorAttachment& att, const std::string& targetId,
                      const std::vector<Message>& context) const;

  void enableStagesUpTo(int stage);
  void enableAll();
};

ConsensusBank trainPredictors(const ModelSpec& spec, const TrainingSet& data,
                              const ForestConfig& forestCfg);

}  // namespace conmp

#endif  // CONMP_CONSENSUS_HPP
