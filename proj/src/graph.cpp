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

#include "conmp/graph.hpp"

#include <algorithm>
#include <stdexcept>

#include "conmp/numerics.hpp"

namespace conmp {

namespace {

struct SlotSignature {
  Family family;
  Eigen::Index dim;  // 0 = any (but consistent across generic slots)
};

// Expected family/dim per slot; dim 0 means "generic, same across slots".
std::vector<SlotSignature> factorSignature(const FactorKind& kind) {
  switch (kind.type) {
    case FactorType::GaussianNoise:
      return {{Family::Gaussian, 0}, {Family::Gaussian, 0}};
    case FactorType::Sum:
      return {{Family::Gaussian, 0}, {Family::Gaussian, 0}, {Family::Gaussian, 0}};
    case FactorType::Rotation:
      return {{Family::MvGaussian, 2}, {Family::Gaussian, 1}, {Family::Gaussian, 1}};
    case FactorType::Gate:
      return {{Family::Gaussian, 1},
              {Family::Bernoulli, 1},
              {Family::Gaussian, 1},
              {Family::Gaussian, 1}};
    case FactorType::BoxMembership:
      return {{Family::Bernoulli, 1}, {Family::MvGaussian, 2}, {Family::Gaussian, 1}};
    case FactorType::InnerProduct:
      return {{Family::Gaussian, 1}, {Family::MvGaussian, 3}, {Family::MvGaussian, 3}};
    case FactorType::Product:
      return {{Family::Gaussian, 1}, {Family::Gaussian, 1}, {Family::Gaussian, 1}};
    case FactorType::SoftSymmetry:
      return {{Family::Gaussian, 0}, {Family::Gaussian, 0}};
    case FactorType::Prior: {
      const Family f = family(kind.prior);
      const Eigen::Index d = messageDim(kind.prior);
      if (f == Family::Bernoulli) return {{Family::Bernoulli, 1}};
      return {{d > 1 ? Family::MvGaussian : Family::Gaussian, d}};
    }
  }
  return {};
}

bool slotCompatible(const SlotSignature& sig, const VariableNode& v) {
  if (sig.family == Family::Bernoulli) return v.family == Family::Bernoulli;
  // Gaussian slots accept scalar Gaussians; MvGaussian slots accept vectors.
  if (sig.dim == 1 || (sig.dim == 0 && v.dim == 1)) {
    return v.family == Family::Gaussian && v.dim == 1;
  }
  if (sig.dim == 0) return v.family == Family::MvGaussian;
  return v.family == Family::MvGaussian && v.dim == sig.dim;
}

}  // namespace

int FactorGraph::variableIndex(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) {
    throw std::invalid_argument("unknown variable id: " + id);
  }
  return it->second;
}

const VariableNode& FactorGraph::variable(const std::string& id) const {
  return variables[variableIndex(id)];
}

void FactorGraph::finalize() {
  // Canonical, deterministic ordering: natural order of structured ids.
  std::vector<int> varOrder(variables.size());
  for (std::size_t i = 0; i < varOrder.size(); ++i) varOrder[i] = static_cast<int>(i);
  std::sort(varOrder.begin(), varOrder.end(), [&](int a, int b) {
    return naturalLess(variables[a].id, variables[b].id);
  });
  std::vector<int> remap(variables.size());
  std::vector<VariableNode> sorted;
  sorted.reserve(variables.size());
  for (std::size_t pos = 0; pos < varOrder.size(); ++pos) {
    remap[varOrder[pos]] = static_cast<int>(pos);
    sorted.push_back(std::move(variables[varOrder[pos]]));
  }
  variables = std::move(sorted);

  std::sort(factors.begin(), factors.end(), [](const FactorNode& a, const FactorNode& b) {
    return naturalLess(a.id, b.id);
  });

  index_.clear();
  for (std::size_t i = 0; i < variables.size(); ++i) {
    if (!index_.emplace(variables[i].id, static_cast<int>(i)).second) {
      throw std::invalid_argument("duplicate variable id: " + variables[i].id);
    }
    if (variables[i].layer < 0) {
      throw std::invalid_argument("negative layer on " + variables[i].id);
    }
  }

  int maxLayer = 0;
  for (const auto& v : variables) maxLayer = std::max(maxLayer, v.layer);
  layers.assign(maxLayer + 1, {});
  for (std::size_t i = 0; i < variables.size(); ++i) {
    layers[variables[i].layer].push_back(static_cast<int>(i));
  }

  incidence_.assign(variables.size(), {});
  for (std::size_t fi = 0; fi < factors.size(); ++fi) {
    FactorNode& f = factors[fi];
    const auto sig = factorSignature(f.kind);
    if (f.edges.size() != sig.size()) {
      throw std::invalid_argument("factor " + f.id + ": wrong edge count");
    }
    for (auto& e : f.edges) {
      if (e < 0 || e >= static_cast<int>(remap.size())) {
        throw std::invalid_argument("factor " + f.id + ": dangling edge");
      }
      e = remap[e];
    }
    Eigen::Index genericDim = -1;
    int lo = variables[f.edges.front()].layer;
    int hi = lo;
    for (std::size_t s = 0; s < f.edges.size(); ++s) {
      const VariableNode& v = variables[f.edges[s]];
      if (!slotCompatible(sig[s], v)) {
        throw std::invalid_argument("factor " + f.id + ": family mismatch on slot " +
                                    std::to_string(s) + " (" + v.id + ")");
      }
      if (sig[s].dim == 0) {
        if (genericDim < 0) genericDim = v.dim;
        if (genericDim != v.dim) {
          throw std::invalid_argument("factor " + f.id + ": inconsistent edge dims");
        }
      }
      lo = std::min(lo, v.layer);
      hi = std::max(hi, v.layer);
      incidence_[f.edges[s]].push_back({static_cast<int>(fi), static_cast<int>(s)});
    }
    if (hi - lo > 1) {
      throw std::invalid_argument("factor " + f.id + ": spans non-adjacent layers");
    }
  }

  for (const auto& att : predictors) {
    if (att.targets.empty() || att.contextIds.empty()) {
      throw std::invalid_argument("attachment " + att.name + ": empty context or targets");
    }
    int targetLayer = -1;
    for (const auto& t : att.targets) {
      const VariableNode& v = variable(t);
      if (targetLayer < 0) targetLayer = v.layer;
      if (v.layer != targetLayer) {
        throw std::invalid_argument("attachment " + att.name + ": mixed target layers");
      }
    }
    for (const auto& cid : att.contextIds) {
      if (variable(cid).layer != targetLayer - 1) {
        throw std::invalid_argument("attachment " + att.name +
                                    ": context not in the layer below the target");
      }
    }
  }
}

void conditionObservations(FactorGraph& g,
                           const std::map<std::string, Eigen::VectorXd>& data) {
  for (const auto& [id, value] : data) {
    VariableNode& v = g.variables[g.variableIndex(id)];
    if (v.layer != 0) {
      throw std::invalid_argument("observation key " + id + " is not in the observation layer");
    }
    if (value.size() != v.dim) {
      throw std::invalid_argument("observation " + id + ": wrong dimension");
    }
    v.observedValue = value;
  }
  for (const auto& v : g.variables) {
    if (v.layer == 0 && !v.observed()) {
      throw std::invalid_argument("missing observation for " + v.id);
    }
  }
}

}  // namespace conmp
