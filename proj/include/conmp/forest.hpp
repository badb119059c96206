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

#ifndef CONMP_FOREST_HPP
#define CONMP_FOREST_HPP

#include <cstdint>
#include <json.hpp>
#include <vector>

#include "conmp/message.hpp"

namespace conmp {

// Random regression forest mapping contextual-message features to the
// parameters of a consensus message. Trees split on the tree parameterization
// t and regress the target from the regression parameterization r with a
// ridge linear model at each leaf. Tree predictions are combined by moment
// averaging.

struct ForestConfig {
  int treeCount = 8;
  int maxDepth = 12;
  int minLeafCount = 10;
  int candidatesPerNode = 64;
  double ridge = 1e-6;
  // Leaf coefficients below this magnitude are zeroed (sparse leaf models).
  double coeffPrune = 1e-4;
  // Candidates test |t[i] - t[j]| <= tol instead of axis thresholds.
  bool pairEqualityCandidates = false;
  bool bootstrap = true;
  std::uint64_t seed = 0;
};

struct SplitCriterion {
  bool pairTest = false;
  int featureIndex = 0;
  double threshold = 0.0;
  int i = 0;
  int j = 0;
  double tol = 0.0;

  bool goesLeft(const Eigen::VectorXd& t) const {
    if (pairTest) return std::abs(t(i) - t(j)) <= tol;
    return t(featureIndex) <= threshold;
  }
};

struct LeafModel {
  Eigen::MatrixXd W;            // outputDim x (regDim + 1); bias column last
  Eigen::MatrixXd residualCov;  // outputDim x outputDim, PSD
  int count = 0;

  Eigen::VectorXd predict(const Eigen::VectorXd& r) const;
};

struct TreeNode {
  SplitCriterion split;
  // Child encoding: >= 0 is a node index, < 0 is a leaf at index ~child.
  int left = -1;
  int right = -1;
};

struct Tree {
  std::vector<TreeNode> nodes;   // empty when the tree is a single leaf
  std::vector<LeafModel> leaves;

  const LeafModel& descend(const Eigen::VectorXd& t) const;
};

struct TrainRow {
  Eigen::VectorXd t;  // tree features
  Eigen::VectorXd r;  // regression features
  Eigen::VectorXd y;  // target message parameters (moment means)
};

// Per-node record of the split search, for auditing that the chosen split
// maximizes the objective over the sampled candidate set.
struct SplitAudit {
  std::vector<SplitCriterion> candidates;
  std::vector<double> objective;  // -inf marks inadmissible candidates
  int chosen = -1;
  std::vector<int> rows;  // indices into the tree's training sample
};

struct ForestDiagnostics {
  int degenerateTrees = 0;  // forced single-leaf despite enough data
  bool collectAudits = false;
  std::vector<std::vector<SplitAudit>> audits;      // per tree
  std::vector<std::vector<int>> bootstrapIndices;   // per tree
};

class Forest {
 public:
  Family outputFamily = Family::Gaussian;
  int outputDim = 1;
  int treeDim = 0;
  int regDim = 0;
  std::vector<Tree> trees;

  // Prediction mean for a single tree; the message variance comes from the
  // leaf residual covariance.
  Message predict(const Eigen::VectorXd& t, const Eigen::VectorXd& r,
                  std::vector<std::string>* events = nullptr) const;

  nlohmann::json toJson() const;
  static Forest fromJson(const nlohmann::json& j);
};

Forest trainForest(const std::vector<TrainRow>& rows, Family outputFamily,
                   const ForestConfig& cfg, ForestDiagnostics* diag = nullptr);

// Split objective, exposed for tests: I = -E(left) - E(right) with E the
// summed squared residual of the child's ridge regression, or -inf when a
// child would fall below minLeafCount.
double splitObjective(const std::vector<TrainRow>& rows, const std::vector<int>& idx,
                      const SplitCriterion& split, double ridge, int minLeafCount);

}  // namespace conmp

#endif  // CONMP_FOREST_HPP
