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

#include "conmp/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include "conmp/numerics.hpp"

namespace conmp {

namespace {

struct FactorSpan {
  int lo;
  int hi;
};

FactorSpan layerSpan(const FactorGraph& g, const FactorNode& f) {
  int lo = g.variables[f.edges.front()].layer;
  int hi = lo;
  for (int e : f.edges) {
    lo = std::min(lo, g.variables[e].layer);
    hi = std::max(hi, g.variables[e].layer);
  }
  return {lo, hi};
}

double naturalDelta(const Message& a, const Message& b) {
  if (family(a) != family(b) || messageDim(a) != messageDim(b)) {
    return std::numeric_limits<double>::infinity();
  }
  if (const auto* ga = std::get_if<Gaussian>(&a)) {
    const auto& gb = std::get<Gaussian>(b);
    return std::max(std::abs(ga->eta1 - gb.eta1), std::abs(ga->eta2 - gb.eta2));
  }
  if (const auto* ma = std::get_if<MvGaussian>(&a)) {
    const auto& mb = std::get<MvGaussian>(b);
    return std::max((ma->h - mb.h).lpNorm<Eigen::Infinity>(),
                    (ma->K - mb.K).lpNorm<Eigen::Infinity>());
  }
  if (const auto* ba = std::get_if<Bernoulli>(&a)) {
    const auto& bb = std::get<Bernoulli>(b);
    if (ba->logOdds == bb.logOdds) return 0.0;
    return std::abs(ba->logOdds - bb.logOdds);
  }
  const auto& pa = std::get<PointMass>(a);
  const auto& pb = std::get<PointMass>(b);
  return (pa.location - pb.location).lpNorm<Eigen::Infinity>();
}

class Run {
 public:
  Run(const FactorGraph& g, const EngineConfig& cfg, const Schedule& schedule,
      ConsensusSource* consensus)
      : g_(g), cfg_(cfg), schedule_(schedule), consensus_(consensus) {}

  InferenceTrace execute();

 private:
  Message initialEdgeMessage(int fi, int slot) const;
  Message recomputeBelief(int vi) const;
  bool acceptableBelief(const Message& m) const;
  void runAction(const ScheduleAction& a, int iteration);
  void runConsensus(const ScheduleAction& a, int iteration);
  const Message& beliefOf(int vi) const { return beliefs_[vi]; }
  Message cavity(int vi, int fi, int slot) const;
  double dampingAlpha(FactorType t, const std::string& id) const;
  void snapshot(IterationRecord& rec) const;

  const FactorGraph& g_;
  const EngineConfig& cfg_;
  const Schedule& schedule_;
  ConsensusSource* consensus_;

  std::vector<std::vector<Message>> edgeMsgs_;
  std::vector<Message> beliefs_;
  std::vector<Message> consensusMsgs_;
  std::vector<bool> hasConsensus_;
  InferenceTrace trace_;
  double sweepMaxDelta_ = 0;
};

Message Run::initialEdgeMessage(int fi, int slot) const {
  const FactorNode& f = g_.factors[fi];
  if (f.kind.type == FactorType::Prior) return f.kind.prior;
  const VariableNode& v = g_.variables[f.edges[slot]];
  return uniformLike<double>(v.family, v.dim);
}

Message Run::recomputeBelief(int vi) const {
  const VariableNode& v = g_.variables[vi];
  if (v.observed()) return PointMass::at(*v.observedValue);
  std::vector<const Message*> parts;
  for (const auto& [fi, slot] : g_.incidence()[vi]) {
    parts.push_back(&edgeMsgs_[fi][slot]);
  }
  if (parts.empty() && !hasConsensus_[vi]) {
    return uniformLike<double>(v.family, v.dim);
  }
  return productOfMessages<double>(parts, hasConsensus_[vi] ? &consensusMsgs_[vi] : nullptr);
}

bool Run::acceptableBelief(const Message& m) const {
  if (!allFinite(m)) return false;
  if (isUniform(m)) return true;  // no information yet
  if (std::holds_alternative<Bernoulli>(m) || std::holds_alternative<PointMass>(m)) {
    return true;
  }
  return isProper(m);
}

Message Run::cavity(int vi, int fi, int slot) const {
  const Message& own = edgeMsgs_[fi][slot];
  if (isUniform(own)) return beliefs_[vi];
  return divide(beliefs_[vi], own);
}

double Run::dampingAlpha(FactorType t, const std::string& id) const {
  for (const auto& rule : cfg_.damping) {
    if (rule.kind == t && rule.target == id) return rule.alpha;
  }
  return 1.0;
}

void Run::runAction(const ScheduleAction& a, int iteration) {
  const FactorNode& f = g_.factors[a.factor];
  const int n = static_cast<int>(f.edges.size());
  const bool useBeliefs = factorUsesBeliefs(f.kind.type, cfg_.mode);

  std::vector<Message> in;
  in.reserve(n);
  for (int s = 0; s < n; ++s) {
    const int vi = f.edges[s];
    // The target slot always carries the incoming (cavity) message; the
    // quotient and nonconjugate projections need it even in belief mode.
    if (useBeliefs && s != a.slot) {
      in.push_back(beliefs_[vi]);
    } else {
      in.push_back(cavity(vi, a.factor, s));
    }
  }

  FactorResult res;
  try {
    res = factorMessage(f.kind, cfg_.mode, cfg_.quad, in, a.slot);
  } catch (const std::exception& e) {
    trace_.events.push_back("iter " + std::to_string(iteration) + " " + f.id + "->" +
                            g_.variables[a.target].id + ": " + e.what());
    return;
  }
  if (res.skip) {
    trace_.events.push_back("iter " + std::to_string(iteration) + " " + f.id + "->" +
                            g_.variables[a.target].id + ": skipped (" + res.note + ")");
    return;
  }
  if (!res.note.empty()) {
    trace_.events.push_back("iter " + std::to_string(iteration) + " " + f.id + "->" +
                            g_.variables[a.target].id + ": " + res.note);
  }
  if (!allFinite(res.msg)) {
    trace_.events.push_back("iter " + std::to_string(iteration) + " " + f.id + "->" +
                            g_.variables[a.target].id + ": non-finite message dropped");
    return;
  }

  Message fresh = res.msg;
  const double alpha = dampingAlpha(f.kind.type, g_.variables[a.target].id);
  if (alpha < 1.0) {
    fresh = dampMessage(edgeMsgs_[a.factor][a.slot], fresh, alpha);
  }

  const Message old = edgeMsgs_[a.factor][a.slot];
  edgeMsgs_[a.factor][a.slot] = fresh;
  Message newBelief = recomputeBelief(a.target);
  if (!acceptableBelief(newBelief)) {
    edgeMsgs_[a.factor][a.slot] = old;  // retain the previous message
    trace_.events.push_back("iter " + std::to_string(iteration) + " " + f.id + "->" +
                            g_.variables[a.target].id +
                            ": improper belief, update skipped");
    return;
  }
  sweepMaxDelta_ = std::max(sweepMaxDelta_, naturalDelta(beliefs_[a.target], newBelief));
  beliefs_[a.target] = std::move(newBelief);
}

void Run::runConsensus(const ScheduleAction& a, int iteration) {
  if (iteration != 1) {
    ++trace_.scheduleViolations;
    return;
  }
  if (!consensus_) {
    trace_.events.push_back("consensus action with no source; falling back to standard MP");
    return;
  }
  const PredictorAttachment& att = g_.predictors[a.attachment];
  std::vector<Message> context;
  context.reserve(att.contextIds.size());
  for (const auto& cid : att.contextIds) {
    context.push_back(beliefs_[g_.variableIndex(cid)]);
  }
  const std::string& targetId = g_.variables[a.target].id;
  std::optional<Message> msg;
  try {
    msg = consensus_->consensusMessage(att, targetId, context, trace_.events);
  } catch (const std::exception& e) {
    trace_.events.push_back("consensus " + att.name + "->" + targetId + ": " + e.what() +
                            "; falling back to standard MP");
    return;
  }
  if (!msg.has_value()) return;
  if (!allFinite(*msg) || !isProper(*msg)) {
    trace_.events.push_back("consensus " + att.name + "->" + targetId +
                            ": improper prediction dropped");
    return;
  }
  if (hasConsensus_[a.target]) {
    ++trace_.scheduleViolations;
    return;
  }
  const Message oldBelief = beliefs_[a.target];
  consensusMsgs_[a.target] = *msg;
  hasConsensus_[a.target] = true;
  Message newBelief = recomputeBelief(a.target);
  if (!acceptableBelief(newBelief)) {
    hasConsensus_[a.target] = false;
    trace_.events.push_back("consensus " + att.name + "->" + targetId +
                            ": improper belief, dropped");
    return;
  }
  sweepMaxDelta_ = std::max(sweepMaxDelta_, naturalDelta(oldBelief, newBelief));
  beliefs_[a.target] = std::move(newBelief);
  ++trace_.consensusEmitted;
}

void Run::snapshot(IterationRecord& rec) const {
  for (const auto& id : cfg_.tracked) {
    rec.beliefs.emplace(id, beliefs_[g_.variableIndex(id)]);
  }
}

InferenceTrace Run::execute() {
  const std::size_t nv = g_.variables.size();
  edgeMsgs_.resize(g_.factors.size());
  for (std::size_t fi = 0; fi < g_.factors.size(); ++fi) {
    const auto& f = g_.factors[fi];
    edgeMsgs_[fi].reserve(f.edges.size());
    for (std::size_t s = 0; s < f.edges.size(); ++s) {
      edgeMsgs_[fi].push_back(initialEdgeMessage(static_cast<int>(fi), static_cast<int>(s)));
    }
  }
  consensusMsgs_.assign(nv, Gaussian::uniform());
  hasConsensus_.assign(nv, false);
  beliefs_.resize(nv);
  for (std::size_t vi = 0; vi < nv; ++vi) {
    beliefs_[vi] = recomputeBelief(static_cast<int>(vi));
  }

  for (const auto& violation : validateSchedule(g_, schedule_)) {
    ++trace_.scheduleViolations;
    trace_.events.push_back("schedule: " + violation);
  }

  IterationRecord initial;
  snapshot(initial);
  trace_.iterations.push_back(std::move(initial));

  for (int iter = 1; iter <= cfg_.iterations; ++iter) {
    const auto t0 = std::chrono::steady_clock::now();
    sweepMaxDelta_ = 0;
    const auto& actions = iter == 1 ? schedule_.firstIteration : schedule_.steadyState;
    for (const auto& a : actions) {
      if (a.phase == Phase::Consensus) {
        runConsensus(a, iter);
      } else {
        runAction(a, iter);
      }
    }
    IterationRecord rec;
    snapshot(rec);
    rec.maxDelta = sweepMaxDelta_;
    rec.wallMs = std::chrono::duration<double, std::milli>(
                     std::chrono::steady_clock::now() - t0).count();
    trace_.iterations.push_back(std::move(rec));
    if (cfg_.convergenceTol > 0 && sweepMaxDelta_ < cfg_.convergenceTol) {
      trace_.earlyStopped = true;
      break;
    }
  }

  for (std::size_t vi = 0; vi < nv; ++vi) {
    if (!g_.variables[vi].observed()) {
      trace_.finalBeliefs.emplace(g_.variables[vi].id, beliefs_[vi]);
    }
  }
  return std::move(trace_);
}

}  // namespace

Schedule makeSchedule(const FactorGraph& g, const EngineConfig& cfg) {
  Schedule schedule;
  const int maxLayer = g.layerCount() - 1;

  // Per-attachment consensus actions, grouped by target layer.
  std::vector<std::vector<ScheduleAction>> consensusByLayer(maxLayer + 1);
  if (cfg.consensusEnabled) {
    for (std::size_t ai = 0; ai < g.predictors.size(); ++ai) {
      const auto& att = g.predictors[ai];
      if (att.contextIds.empty()) {
        throw std::invalid_argument("attachment " + att.name + ": empty context layer");
      }
      for (const auto& tid : att.targets) {
        const int vi = g.variableIndex(tid);
        ScheduleAction a;
        a.phase = Phase::Consensus;
        a.attachment = static_cast<int>(ai);
        a.target = vi;
        a.layer = g.variables[vi].layer;
        a.bottomUp = true;
        consensusByLayer[a.layer].push_back(a);
      }
    }
  }

  auto standardActions = [&](int layer, bool bottomUp) {
    std::vector<ScheduleAction> out;
    for (std::size_t fi = 0; fi < g.factors.size(); ++fi) {
      const FactorNode& f = g.factors[fi];
      if (f.kind.type == FactorType::Prior) continue;  // constant, folded at init
      const FactorSpan span = layerSpan(g, f);
      const bool intra = span.lo == span.hi;
      if (bottomUp) {
        if (!(intra ? span.lo == layer : span.hi == layer)) continue;
      } else {
        if (intra || span.lo != layer) continue;
      }
      for (std::size_t s = 0; s < f.edges.size(); ++s) {
        const VariableNode& v = g.variables[f.edges[s]];
        if (v.layer != layer || v.observed()) continue;
        ScheduleAction a;
        a.phase = Phase::Standard;
        a.factor = static_cast<int>(fi);
        a.slot = static_cast<int>(s);
        a.target = f.edges[s];
        a.layer = layer;
        a.bottomUp = bottomUp;
        out.push_back(a);
      }
    }
    return out;
  };

  auto buildIteration = [&](bool withConsensus) {
    std::vector<ScheduleAction> actions;
    for (int layer = 1; layer <= maxLayer; ++layer) {
      if (withConsensus) {
        for (const auto& a : consensusByLayer[layer]) actions.push_back(a);
      }
      for (auto& a : standardActions(layer, true)) actions.push_back(a);
    }
    for (int layer = maxLayer - 1; layer >= 1; --layer) {
      for (auto& a : standardActions(layer, false)) actions.push_back(a);
    }
    return actions;
  };

  schedule.firstIteration = buildIteration(true);
  schedule.steadyState = buildIteration(false);
  return schedule;
}

std::vector<std::string> validateSchedule(const FactorGraph& g, const Schedule& s) {
  std::vector<std::string> violations;
  for (const auto& a : s.steadyState) {
    if (a.phase == Phase::Consensus) {
      violations.push_back("consensus action outside iteration 1");
      break;
    }
  }
  // Within each (bottom-up, layer) block of the first iteration, consensus
  // actions must precede standard ones, and bottom-up layers must ascend.
  int prevLayer = 0;
  bool inTopDown = false;
  std::map<int, bool> sawStandard;
  for (const auto& a : s.firstIteration) {
    if (!a.bottomUp) inTopDown = true;
    if (a.bottomUp) {
      if (inTopDown) {
        violations.push_back("bottom-up action after top-down phase");
        break;
      }
      if (a.layer < prevLayer) {
        violations.push_back("bottom-up layer order violated");
        break;
      }
      prevLayer = a.layer;
      if (a.phase == Phase::Consensus && sawStandard[a.layer]) {
        violations.push_back("consensus after standard action within layer " +
                             std::to_string(a.layer));
        break;
      }
      if (a.phase == Phase::Standard) sawStandard[a.layer] = true;
    }
  }
  (void)g;
  return violations;
}

InferenceTrace runInference(const FactorGraph& g, const EngineConfig& cfg,
                            const Schedule& schedule, ConsensusSource* consensus) {
  Run run(g, cfg, schedule, consensus);
  return run.execute();
}

Message dampMessage(const Message& old, const Message& fresh, double alpha) {
  if (alpha <= 0.0 || alpha > 1.0) {
    throw std::invalid_argument("dampMessage: step size must be in (0, 1]");
  }
  if (alpha == 1.0) return fresh;
  return affineCombine(fresh, old, alpha);
}

bool traceEquals(const InferenceTrace& a, const InferenceTrace& b) {
  if (a.iterations.size() != b.iterations.size()) return false;
  auto sameBeliefs = [](const std::map<std::string, Message>& x,
                        const std::map<std::string, Message>& y) {
    if (x.size() != y.size()) return false;
    for (const auto& [id, m] : x) {
      auto it = y.find(id);
      if (it == y.end() || !closeTo(m, it->second, 0.0)) return false;
    }
    return true;
  };
  for (std::size_t i = 0; i < a.iterations.size(); ++i) {
    if (!sameBeliefs(a.iterations[i].beliefs, b.iterations[i].beliefs)) return false;
  }
  return sameBeliefs(a.finalBeliefs, b.finalBeliefs);
}

}  // namespace conmp
