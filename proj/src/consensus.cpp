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

#include "conmp/consensus.hpp"

#include <atomic>
#include <functional>
#include <future>
#include <stdexcept>
#include <thread>

#include "conmp/numerics.hpp"
#include "conmp/serialize.hpp"

namespace conmp {

namespace {

int workerCount() {
  return std::max(1u, std::thread::hardware_concurrency());
}

// Runs fn(problemIndex) for every problem on a small pool, preserving order.
template <typename T, typename Fn>
std::vector<T> mapProblems(int problems, Fn&& fn) {
  std::vector<T> out(problems);
  const int workers = std::min(workerCount(), problems > 0 ? problems : 1);
  std::atomic<int> next{0};
  std::vector<std::future<void>> futures;
  futures.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    futures.push_back(std::async(std::launch::async, [&]() {
      for (;;) {
        const int d = next.fetch_add(1);
        if (d >= problems) return;
        out[d] = fn(d);
      }
    }));
  }
  for (auto& f : futures) f.get();
  return out;
}

struct ProblemResult {
  ContextCapture capture;
  std::map<std::string, Message> finalBeliefs;
  SampleResult sample;
  bool ok = false;
};

EngineConfig captureConfig(const EngineConfig& base, int iterations) {
  EngineConfig cfg = base;
  cfg.iterations = iterations;
  cfg.consensusEnabled = true;  // consensus slots drive the capture points
  cfg.tracked.clear();
  return cfg;
}

ProblemResult runCaptureProblem(const ModelSpec& spec, const FactorGraph& prototype,
                                const std::map<std::string, Eigen::VectorXd>& obs,
                                const EngineConfig& cfg) {
  ProblemResult res;
  FactorGraph g = prototype;
  conditionObservations(g, obs);
  const Schedule schedule = makeSchedule(g, cfg);
  InferenceTrace trace = runInference(g, cfg, schedule, &res.capture);
  res.finalBeliefs = std::move(trace.finalBeliefs);
  res.ok = true;
  for (const auto& [id, belief] : res.finalBeliefs) {
    if (!allFinite(belief)) {
      res.ok = false;
      break;
    }
  }
  return res;
}

void appendExamples(TrainingSet& set, const FactorGraph& prototype,
                    const ProblemResult& res,
                    const std::function<std::optional<Message>(
                        const PredictorAttachment&, const std::string&)>& oracleFor) {
  for (const auto& att : prototype.predictors) {
    auto it = res.capture.captured.find(att.name);
    if (it == res.capture.captured.end()) continue;
    for (const auto& target : att.targets) {
      std::optional<Message> oracle = oracleFor(att, target);
      if (!oracle.has_value()) {
        ++set.skippedTargets;
        continue;
      }
      TrainingExample ex;
      ex.context = it->second;
      ex.targetId = target;
      ex.oracle = std::move(*oracle);
      set.perAttachment[att.name].push_back(std::move(ex));
    }
  }
}

}  // namespace

std::optional<Message> ContextCapture::consensusMessage(
    const PredictorAttachment& att, const std::string&,
    const std::vector<Message>& context, std::vector<std::string>&) {
  if (!captured.count(att.name)) {
    captured[att.name] = std::make_shared<const std::vector<Message>>(context);
  }
  return std::nullopt;
}

TrainingSet genTrainingFromConvergence(const ModelSpec& spec, int problems,
                                       int longIterations, const EngineConfig& engineCfg,
                                       std::uint64_t seed) {
  const FactorGraph prototype = buildGraph(spec);
  const EngineConfig cfg = captureConfig(engineCfg, longIterations);
  auto results = mapProblems<std::shared_ptr<ProblemResult>>(problems, [&](int d) {
    auto res = std::make_shared<ProblemResult>();
    SampleResult sample = sampleModel(spec, mixSeed(seed, d));
    *res = runCaptureProblem(spec, prototype, sample.observations, cfg);
    res->sample = std::move(sample);
    return res;
  });

  TrainingSet set;
  for (const auto& res : results) {
    if (!res->ok) {
      ++set.discarded;
      continue;
    }
    appendExamples(set, prototype, *res,
                   [&](const PredictorAttachment&, const std::string& target)
                       -> std::optional<Message> {
                     const Message& belief = res->finalBeliefs.at(target);
                     if (!allFinite(belief) || !isProper(belief)) return std::nullopt;
                     return belief;
                   });
  }
  return set;
}

TrainingSet genTrainingFromSamples(const ModelSpec& spec, int problems,
                                   const EngineConfig& engineCfg, std::uint64_t seed) {
  const FactorGraph prototype = buildGraph(spec);
  const EngineConfig cfg = captureConfig(engineCfg, 1);
  auto results = mapProblems<std::shared_ptr<ProblemResult>>(problems, [&](int d) {
    auto res = std::make_shared<ProblemResult>();
    SampleResult sample = sampleModel(spec, mixSeed(seed, d));
    *res = runCaptureProblem(spec, prototype, sample.observations, cfg);
    res->sample = std::move(sample);
    return res;
  });

  TrainingSet set;
  for (const auto& res : results) {
    if (!res->ok) {
      ++set.discarded;
      continue;
    }
    appendExamples(set, prototype, *res,
                   [&](const PredictorAttachment&, const std::string& target)
                       -> std::optional<Message> {
                     auto it = res->sample.latents.find(target);
                     if (it == res->sample.latents.end()) return std::nullopt;
                     return Message(PointMass::at(it->second));
                   });
  }
  return set;
}

TrainingSet genTrainingFromLabels(const ModelSpec& spec,
                                  const std::vector<LabelledProblem>& dataset,
                                  const EngineConfig& engineCfg) {
  const FactorGraph prototype = buildGraph(spec);
  const EngineConfig cfg = captureConfig(engineCfg, 1);
  auto results = mapProblems<std::shared_ptr<ProblemResult>>(
      static_cast<int>(dataset.size()), [&](int d) {
        auto res = std::make_shared<ProblemResult>();
        *res = runCaptureProblem(spec, prototype, dataset[d].observations, cfg);
        return res;
      });

  TrainingSet set;
  for (std::size_t d = 0; d < results.size(); ++d) {
    if (!results[d]->ok) {
      ++set.discarded;
      continue;
    }
    appendExamples(set, prototype, *results[d],
                   [&](const PredictorAttachment&, const std::string& target)
                       -> std::optional<Message> {
                     auto it = dataset[d].labels.find(target);
                     if (it == dataset[d].labels.end()) return std::nullopt;
                     return Message(PointMass::at(it->second));
                   });
  }
  return set;
}

std::string trainingExampleToJsonLine(const std::string& attachment,
                                      const TrainingExample& ex) {
  Json j;
  j["attachment"] = attachment;
  j["target"] = ex.targetId;
  Json ctx = Json::array();
  for (const auto& m : *ex.context) ctx.push_back(toJson(m));
  j["context"] = std::move(ctx);
  j["oracle"] = toJson(ex.oracle);
  return j.dump();
}

std::pair<std::string, TrainingExample> trainingExampleFromJsonLine(
    const std::string& line) {
  const Json j = Json::parse(line);
  TrainingExample ex;
  auto ctx = std::make_shared<std::vector<Message>>();
  for (const auto& jm : j.at("context")) ctx->push_back(messageFromJson(jm));
  ex.context = std::move(ctx);
  ex.targetId = j.at("target").get<std::string>();
  ex.oracle = messageFromJson(j.at("oracle"));
  return {j.at("attachment").get<std::string>(), std::move(ex)};
}

Eigen::VectorXd regressionTarget(const Message& oracle) {
  // Point-mass oracles regress their location; proper messages their mean.
  return moments(oracle).first;
}

std::vector<TrainRow> featurizeExamples(const std::vector<TrainingExample>& examples,
                                        const ContextFeaturizer& featurizer) {
  std::vector<TrainRow> rows(examples.size());
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const FeatureVector f = featurizer.features(*examples[i].context,
                                                examples[i].targetId);
    rows[i].t = f.tree;
    rows[i].r = f.reg;
    rows[i].y = regressionTarget(examples[i].oracle);
  }
  return rows;
}

std::optional<Message> ConsensusBank::consensusMessage(
    const PredictorAttachment& att, const std::string& targetId,
    const std::vector<Message>& context, std::vector<std::string>& events) {
  if (!enabled.count(att.name)) return std::nullopt;
  auto it = entries.find(att.name);
  if (it == entries.end()) {
    events.push_back("consensus " + att.name + ": no trained predictor");
    return std::nullopt;
  }
  lastContext[att.name] = context;
  return predictOnly(att, targetId, context);
}

Message ConsensusBank::predictOnly(const PredictorAttachment& att,
                                   const std::string& targetId,
                                   const std::vector<Message>& context) const {
  const Entry& entry = entries.at(att.name);
  const FeatureVector f = entry.featurizer->features(context, targetId);
  std::vector<std::string> notes;
  Message m = entry.forest.predict(f.tree, f.reg, &notes);
  // Floor the variance: a near-point prediction would otherwise pin the
  // target belief for the rest of the run.
  const Moments mo = moments(m);
  Eigen::MatrixXd cov = mo.second - mo.first * mo.first.transpose();
  cov.diagonal().array() += varianceFloor;
  return gaussianFromMoments<double>(Eigen::VectorXd(mo.first), cov);
}

void ConsensusBank::enableStagesUpTo(int stage) {
  enabled.clear();
  for (const auto& [name, entry] : entries) {
    if (entry.stage <= stage) enabled.insert(name);
  }
}

void ConsensusBank::enableAll() {
  enabled.clear();
  for (const auto& [name, entry] : entries) enabled.insert(name);
}

ConsensusBank trainPredictors(const ModelSpec& spec, const TrainingSet& data,
                              const ForestConfig& forestCfg) {
  const FactorGraph prototype = buildGraph(spec);
  ConsensusBank bank;
  for (const auto& att : prototype.predictors) {
    auto it = data.perAttachment.find(att.name);
    if (it == data.perAttachment.end() || it->second.empty()) {
      throw std::runtime_error("trainPredictors: no examples for " + att.name);
    }
    ConsensusBank::Entry entry;
    entry.featurizer = makeFeaturizer(att.featurizerId, spec);
    entry.stage = att.stage;
    std::vector<TrainRow> rows = featurizeExamples(it->second, *entry.featurizer);
    ForestConfig cfg = forestCfg;
    cfg.pairEqualityCandidates = entry.featurizer->pairEqualityCandidates();
    cfg.seed = mixSeed(forestCfg.seed, std::hash<std::string>{}(att.name));
    bank.entries.emplace(att.name,
                         ConsensusBank::Entry{trainForest(rows, att.outputFamily, cfg),
                                              entry.featurizer, entry.stage});
  }
  bank.enableAll();
  return bank;
}

}  // namespace conmp
