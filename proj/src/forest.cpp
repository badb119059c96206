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

#include "conmp/forest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "conmp/numerics.hpp"
#include "conmp/serialize.hpp"

namespace conmp {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Sufficient statistics of a ridge regression y ~ W [r; 1].
struct FitStats {
  Eigen::MatrixXd xtx;  // (d+1) x (d+1)
  Eigen::MatrixXd xty;  // (d+1) x m
  double yty = 0;
  int count = 0;

  FitStats(int d, int m)
      : xtx(Eigen::MatrixXd::Zero(d + 1, d + 1)),
        xty(Eigen::MatrixXd::Zero(d + 1, m)) {}

  void add(const Eigen::VectorXd& r, const Eigen::VectorXd& y) {
    Eigen::VectorXd x(r.size() + 1);
    x << r, 1.0;
    xtx.noalias() += x * x.transpose();
    xty.noalias() += x * y.transpose();
    yty += y.squaredNorm();
    ++count;
  }

  Eigen::MatrixXd solve(double ridge) const {
    Eigen::MatrixXd a = xtx;
    a.diagonal().array() += ridge;
    // Coefficients in (d+1) x m layout; W is its transpose.
    return a.ldlt().solve(xty);
  }

  // Summed squared residual at the given coefficients.
  double ssr(const Eigen::MatrixXd& coef) const {
    const double fit = 2.0 * (coef.array() * xty.array()).sum() -
                       (coef.transpose() * xtx * coef).trace();
    return std::max(0.0, yty - fit);
  }
};

double childResidual(const FitStats& stats, double ridge) {
  return stats.ssr(stats.solve(ridge));
}

struct Builder {
  const std::vector<TrainRow>& rows;
  const ForestConfig& cfg;
  std::mt19937_64 rng;
  Tree tree;
  std::vector<SplitAudit>* audit;

  Builder(const std::vector<TrainRow>& rows_, const ForestConfig& cfg_,
          std::uint64_t seed, std::vector<SplitAudit>* audit_)
      : rows(rows_), cfg(cfg_), rng(seed), audit(audit_) {}

  SplitCriterion sampleCandidate(const std::vector<int>& idx) {
    SplitCriterion c;
    const int treeDim = static_cast<int>(rows[idx[0]].t.size());
    std::uniform_int_distribution<int> pickRow(0, static_cast<int>(idx.size()) - 1);
    if (cfg.pairEqualityCandidates && treeDim >= 2) {
      std::uniform_int_distribution<int> pickFeature(0, treeDim - 1);
      c.pairTest = true;
      c.i = pickFeature(rng);
      do {
        c.j = pickFeature(rng);
      } while (c.j == c.i);
      const Eigen::VectorXd& t = rows[idx[pickRow(rng)]].t;
      c.tol = std::abs(t(c.i) - t(c.j));
    } else {
      std::uniform_int_distribution<int> pickFeature(0, treeDim - 1);
      c.featureIndex = pickFeature(rng);
      c.threshold = rows[idx[pickRow(rng)]].t(c.featureIndex);
    }
    return c;
  }

  int makeLeaf(const std::vector<int>& idx) {
    const int d = static_cast<int>(rows[idx[0]].r.size());
    const int m = static_cast<int>(rows[idx[0]].y.size());
    FitStats stats(d, m);
    for (int i : idx) stats.add(rows[i].r, rows[i].y);
    Eigen::MatrixXd coef = stats.solve(cfg.ridge);
    LeafModel leaf;
    leaf.W = coef.transpose();
    for (Eigen::Index a = 0; a < leaf.W.rows(); ++a) {
      for (Eigen::Index b = 0; b < leaf.W.cols(); ++b) {
        if (std::abs(leaf.W(a, b)) < cfg.coeffPrune) leaf.W(a, b) = 0.0;
      }
    }
    // Residual covariance of the pruned model; empirical, hence PSD.
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(m, m);
    for (int i : idx) {
      const Eigen::VectorXd res = rows[i].y - leaf.predict(rows[i].r);
      acc.noalias() += res * res.transpose();
    }
    leaf.residualCov = acc / static_cast<double>(idx.size());
    leaf.count = static_cast<int>(idx.size());
    tree.leaves.push_back(std::move(leaf));
    return ~static_cast<int>(tree.leaves.size() - 1);
  }

  int build(std::vector<int> idx, int depth) {
    if (depth >= cfg.maxDepth || static_cast<int>(idx.size()) < 2 * cfg.minLeafCount) {
      return makeLeaf(idx);
    }
    const int d = static_cast<int>(rows[idx[0]].r.size());
    const int m = static_cast<int>(rows[idx[0]].y.size());

    SplitAudit record;
    double bestI = kNegInf;
    int bestCand = -1;
    SplitCriterion bestSplit;
    for (int cand = 0; cand < cfg.candidatesPerNode; ++cand) {
      const SplitCriterion c = sampleCandidate(idx);
      FitStats left(d, m), right(d, m);
      for (int i : idx) {
        (c.goesLeft(rows[i].t) ? left : right).add(rows[i].r, rows[i].y);
      }
      double objective = kNegInf;
      if (left.count >= cfg.minLeafCount && right.count >= cfg.minLeafCount) {
        objective = -childResidual(left, cfg.ridge) - childResidual(right, cfg.ridge);
      }
      if (audit) {
        record.candidates.push_back(c);
        record.objective.push_back(objective);
      }
      if (objective > bestI) {  // ties keep the lowest candidate index
        bestI = objective;
        bestCand = cand;
        bestSplit = c;
      }
    }
    if (audit) {
      record.chosen = bestCand;
      record.rows = idx;
      audit->push_back(std::move(record));
    }
    if (bestCand < 0) {
      return makeLeaf(idx);  // no admissible candidate
    }

    std::vector<int> leftIdx, rightIdx;
    for (int i : idx) {
      (bestSplit.goesLeft(rows[i].t) ? leftIdx : rightIdx).push_back(i);
    }
    const int nodeIndex = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.nodes[nodeIndex].split = bestSplit;
    const int left = build(std::move(leftIdx), depth + 1);
    tree.nodes[nodeIndex].left = left;
    const int right = build(std::move(rightIdx), depth + 1);
    tree.nodes[nodeIndex].right = right;
    return nodeIndex;
  }
};

}  // namespace

Eigen::VectorXd LeafModel::predict(const Eigen::VectorXd& r) const {
  Eigen::VectorXd x(r.size() + 1);
  x << r, 1.0;
  return W * x;
}

const LeafModel& Tree::descend(const Eigen::VectorXd& t) const {
  if (nodes.empty()) return leaves.front();
  int at = 0;
  for (;;) {
    const TreeNode& n = nodes[at];
    const int next = n.split.goesLeft(t) ? n.left : n.right;
    if (next < 0) return leaves[~next];
    at = next;
  }
}

Forest trainForest(const std::vector<TrainRow>& rows, Family outputFamily,
                   const ForestConfig& cfg, ForestDiagnostics* diag) {
  if (static_cast<int>(rows.size()) < 2 * cfg.minLeafCount) {
    throw std::invalid_argument("trainForest: need at least 2*minLeafCount examples");
  }
  Forest forest;
  forest.outputFamily = outputFamily;
  forest.outputDim = static_cast<int>(rows[0].y.size());
  forest.treeDim = static_cast<int>(rows[0].t.size());
  forest.regDim = static_cast<int>(rows[0].r.size());
  if (diag) {
    diag->audits.assign(cfg.treeCount, {});
    diag->bootstrapIndices.assign(cfg.treeCount, {});
  }

  for (int t = 0; t < cfg.treeCount; ++t) {
    std::mt19937_64 rng(mixSeed(cfg.seed, 1000 + t));
    std::vector<int> idx(rows.size());
    if (cfg.bootstrap) {
      std::uniform_int_distribution<int> pick(0, static_cast<int>(rows.size()) - 1);
      for (auto& i : idx) i = pick(rng);
    } else {
      for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
    }
    if (diag) diag->bootstrapIndices[t] = idx;
    Builder builder(rows, cfg, mixSeed(cfg.seed, 2000 + t),
                    diag && diag->collectAudits ? &diag->audits[t] : nullptr);
    const int root = builder.build(idx, 0);
    // A single-leaf tree despite depth budget and enough data means no split
    // candidate was admissible (e.g. identical tree features everywhere).
    if (root < 0 && diag && cfg.maxDepth > 0 &&
        static_cast<int>(rows.size()) >= 2 * cfg.minLeafCount) {
      ++diag->degenerateTrees;
    }
    forest.trees.push_back(std::move(builder.tree));
  }
  return forest;
}

double splitObjective(const std::vector<TrainRow>& rows, const std::vector<int>& idx,
                      const SplitCriterion& split, double ridge, int minLeafCount) {
  const int d = static_cast<int>(rows[idx[0]].r.size());
  const int m = static_cast<int>(rows[idx[0]].y.size());
  FitStats left(d, m), right(d, m);
  for (int i : idx) {
    (split.goesLeft(rows[i].t) ? left : right).add(rows[i].r, rows[i].y);
  }
  if (left.count < minLeafCount || right.count < minLeafCount) return kNegInf;
  return -childResidual(left, ridge) - childResidual(right, ridge);
}

Message Forest::predict(const Eigen::VectorXd& t, const Eigen::VectorXd& r,
                        std::vector<std::string>* events) const {
  if (t.size() != treeDim || r.size() != regDim) {
    throw std::invalid_argument("Forest::predict: feature dimension mismatch");
  }
  std::vector<Message> perTree;
  perTree.reserve(trees.size());
  for (std::size_t k = 0; k < trees.size(); ++k) {
    const LeafModel& leaf = trees[k].descend(t);
    const Eigen::VectorXd mean = leaf.predict(r);
    if (!mean.allFinite() || !leaf.residualCov.allFinite()) {
      if (events) {
        events->push_back("forest: tree " + std::to_string(k) +
                          " produced a non-finite prediction; excluded");
      }
      continue;
    }
    perTree.push_back(gaussianFromMoments<double>(mean, leaf.residualCov));
  }
  if (perTree.empty()) {
    throw std::runtime_error("Forest::predict: every tree was excluded");
  }
  return momentAverage(perTree);
}

nlohmann::json Forest::toJson() const {
  nlohmann::json j;
  j["outputFamily"] = familyName(outputFamily);
  j["outputDim"] = outputDim;
  j["featureDims"] = {{"tree", treeDim}, {"regression", regDim}};
  nlohmann::json jtrees = nlohmann::json::array();
  for (const auto& tree : trees) {
    nlohmann::json jt;
    nlohmann::json jnodes = nlohmann::json::array();
    for (const auto& n : tree.nodes) {
      nlohmann::json jn;
      if (n.split.pairTest) {
        jn["split"] = {{"i", n.split.i}, {"j", n.split.j}, {"tol", n.split.tol}};
      } else {
        jn["split"] = {{"feature", n.split.featureIndex},
                       {"threshold", n.split.threshold}};
      }
      jn["left"] = n.left;  // negative values address leaves at ~index
      jn["right"] = n.right;
      jnodes.push_back(std::move(jn));
    }
    jt["nodes"] = std::move(jnodes);
    nlohmann::json jleaves = nlohmann::json::array();
    for (const auto& leaf : tree.leaves) {
      nlohmann::json jl;
      jl["W"] = conmp::toJson(Eigen::MatrixXd(leaf.W));
      jl["residualCovariance"] = conmp::toJson(Eigen::MatrixXd(leaf.residualCov));
      jl["count"] = leaf.count;
      jleaves.push_back(std::move(jl));
    }
    jt["leaves"] = std::move(jleaves);
    jtrees.push_back(std::move(jt));
  }
  j["trees"] = std::move(jtrees);
  return j;
}

Forest Forest::fromJson(const nlohmann::json& j) {
  Forest forest;
  const std::string fam = j.at("outputFamily").get<std::string>();
  forest.outputFamily = fam == "mvgaussian" ? Family::MvGaussian : Family::Gaussian;
  forest.outputDim = j.at("outputDim").get<int>();
  forest.treeDim = j.at("featureDims").at("tree").get<int>();
  forest.regDim = j.at("featureDims").at("regression").get<int>();
  for (const auto& jt : j.at("trees")) {
    Tree tree;
    for (const auto& jn : jt.at("nodes")) {
      TreeNode n;
      const auto& js = jn.at("split");
      if (js.contains("tol")) {
        n.split.pairTest = true;
        n.split.i = js.at("i").get<int>();
        n.split.j = js.at("j").get<int>();
        n.split.tol = js.at("tol").get<double>();
      } else {
        n.split.featureIndex = js.at("feature").get<int>();
        n.split.threshold = js.at("threshold").get<double>();
      }
      n.left = jn.at("left").get<int>();
      n.right = jn.at("right").get<int>();
      tree.nodes.push_back(n);
    }
    for (const auto& jl : jt.at("leaves")) {
      LeafModel leaf;
      leaf.W = matrixFromJson(jl.at("W"));
      leaf.residualCov = matrixFromJson(jl.at("residualCovariance"));
      leaf.count = jl.at("count").get<int>();
      tree.leaves.push_back(std::move(leaf));
    }
    forest.trees.push_back(std::move(tree));
  }
  return forest;
}

}  // namespace conmp
