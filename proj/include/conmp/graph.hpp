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

#ifndef CONMP_GRAPH_HPP
#define CONMP_GRAPH_HPP

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "conmp/factors.hpp"
#include "conmp/message.hpp"

namespace conmp {

struct VariableNode {
  std::string id;
  Family family = Family::Gaussian;
  Eigen::Index dim = 1;
  int layer = 0;      // 0 = observation layer, increasing upward
  bool isGlobal = false;
  std::optional<Eigen::VectorXd> observedValue;

  bool observed() const { return observedValue.has_value(); }
};

struct FactorNode {
  std::string id;
  FactorKind kind;
  std::vector<int> edges;           // variable indices in slot order
  std::vector<std::string> roles;   // role labels, parallel to edges
};

// A trained-predictor attachment point. Targets live one layer above the
// context variables; type-B attachments target every variable of a layer.
struct PredictorAttachment {
  std::string name;            // e.g. "center", "fg", "reflectance"
  bool typeB = false;
  std::vector<std::string> targets;     // canonical order; size 1 for type A
  std::vector<std::string> contextIds;  // canonical order
  std::string featurizerId;
  int stage = 1;               // 1 = lowest predictor layer
  Family outputFamily = Family::Gaussian;
  Eigen::Index outputDim = 1;
};

struct FactorGraph {
  std::vector<VariableNode> variables;   // sorted by natural id order
  std::vector<FactorNode> factors;       // sorted by natural id order
  std::vector<std::vector<int>> layers;  // variable indices per layer
  std::vector<PredictorAttachment> predictors;

  int variableIndex(const std::string& id) const;
  const VariableNode& variable(const std::string& id) const;
  int layerCount() const { return static_cast<int>(layers.size()); }

  // (factor, slot) pairs incident to each variable; built by finalize().
  const std::vector<std::vector<std::pair<int, int>>>& incidence() const {
    return incidence_;
  }

  // Sorts variables/factors canonically, rebuilds indices, and checks the
  // structural invariants (edge references, family signatures, layer
  // consistency, adjacency of inter-layer factors, attachment context layers).
  void finalize();

 private:
  std::map<std::string, int> index_;
  std::vector<std::vector<std::pair<int, int>>> incidence_;
};

// Marks observation-layer variables with point masses. Every layer-0 variable
// must receive a value; unknown keys are rejected.
void conditionObservations(FactorGraph& g,
                           const std::map<std::string, Eigen::VectorXd>& data);

}  // namespace conmp

#endif  // CONMP_GRAPH_HPP
