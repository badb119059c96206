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

#include "conmp/experiment.hpp"

#include <atomic>
#include <cmath>
#include <future>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "conmp/numerics.hpp"

namespace conmp {

namespace {

constexpr double kSentinel = 1e10;

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

struct ArmOutcome {
  std::vector<MetricRow> rows;
  int scheduleViolations = 0;
  bool failed = false;
};

struct TrialContext {
  const ExperimentConfig& cfg;
  const FactorGraph& prototype;
  ConsensusBank* bank;  // null when no arm needs predictors
  std::vector<std::string> tracked;
  std::vector<std::string> metrics;
};

void sentinelRows(ArmOutcome& out, const TrialContext& ctx, Arm arm, int trial) {
  out.failed = true;
  for (int iter = 1; iter <= ctx.cfg.iterations; ++iter) {
    for (const auto& name : ctx.metrics) {
      out.rows.push_back({armName(arm), trial, iter, name, kSentinel});
    }
  }
}

ArmOutcome runArm(const TrialContext& ctx, Arm arm, int trial,
                  const SampleResult& sample) {
  ArmOutcome out;
  try {
    FactorGraph g = ctx.prototype;
    conditionObservations(g, sample.observations);

    EngineConfig engineCfg = ctx.cfg.engine;
    engineCfg.iterations = ctx.cfg.iterations;
    engineCfg.tracked = ctx.tracked;

    ConsensusBank* bank = nullptr;
    if (arm == Arm::MP) {
      engineCfg.consensusEnabled = false;
    } else {
      bank = ctx.bank;
      if (!bank) throw std::runtime_error("arm requires trained predictors");
    }
    const Schedule schedule = makeSchedule(g, engineCfg);
    InferenceTrace trace = runInference(g, engineCfg, schedule, bank);
    out.scheduleViolations = trace.scheduleViolations;

    for (int iter = 1; iter <= ctx.cfg.iterations; ++iter) {
      const auto& beliefs =
          trace.iterations[std::min<std::size_t>(iter, trace.iterations.size() - 1)]
              .beliefs;
      const auto values = computeMetrics(ctx.cfg.model, beliefs, sample.latents);
      for (const auto& [name, value] : values) {
        out.rows.push_back({armName(arm), trial, iter, name,
                            std::isfinite(value) ? value : kSentinel});
      }
    }
  } catch (const std::exception&) {
    out.rows.clear();
    sentinelRows(out, ctx, arm, trial);
  }
  return out;
}

ArmOutcome runForestOnly(const TrialContext& ctx, int trial, const SampleResult& sample) {
  ArmOutcome out;
  try {
    if (!ctx.bank) throw std::runtime_error("forest-only arm requires predictors");
    FactorGraph g = ctx.prototype;
    conditionObservations(g, sample.observations);

    EngineConfig engineCfg = ctx.cfg.engine;
    engineCfg.iterations = 1;
    engineCfg.tracked = ctx.tracked;
    engineCfg.consensusEnabled = true;
    ContextCapture capture;
    const Schedule schedule = makeSchedule(g, engineCfg);
    InferenceTrace trace = runInference(g, engineCfg, schedule, &capture);
    out.scheduleViolations = trace.scheduleViolations;

    std::map<std::string, Message> beliefs = trace.iterations[0].beliefs;  // priors
    for (const auto& att : g.predictors) {
      auto ctxIt = capture.captured.find(att.name);
      if (ctxIt == capture.captured.end()) continue;
      if (!ctx.bank->entries.count(att.name)) continue;
      for (const auto& target : att.targets) {
        if (beliefs.count(target)) {
          beliefs[target] = ctx.bank->predictOnly(att, target, *ctxIt->second);
        }
      }
    }
    const auto values = computeMetrics(ctx.cfg.model, beliefs, sample.latents);
    for (int iter = 1; iter <= ctx.cfg.iterations; ++iter) {
      for (const auto& [name, value] : values) {
        out.rows.push_back({armName(Arm::ForestOnly), trial, iter, name,
                            std::isfinite(value) ? value : kSentinel});
      }
    }
  } catch (const std::exception&) {
    out.rows.clear();
    sentinelRows(out, ctx, Arm::ForestOnly, trial);
  }
  return out;
}

void configureBankForArm(ConsensusBank& bank, Arm arm) {
  switch (arm) {
    case Arm::CMP1Stage:
      bank.enableStagesUpTo(1);
      break;
    case Arm::CMP:
    case Arm::CMP2Stage:
      bank.enableAll();
      break;
    default:
      break;
  }
}

}  // namespace

const char* armName(Arm a) {
  switch (a) {
    case Arm::MP: return "MP";
    case Arm::CMP: return "CMP";
    case Arm::CMP1Stage: return "CMP-1stage";
    case Arm::CMP2Stage: return "CMP-2stage";
    case Arm::ForestOnly: return "ForestOnly";
  }
  return "?";
}

Arm armFromName(const std::string& name) {
  for (Arm a : {Arm::MP, Arm::CMP, Arm::CMP1Stage, Arm::CMP2Stage, Arm::ForestOnly}) {
    if (name == armName(a)) return a;
  }
  throw std::invalid_argument("unknown arm: " + name);
}

ExperimentResult runExperiment(const ExperimentConfig& cfg) {
  if (cfg.arms.empty()) throw std::invalid_argument("experiment: arms must be nonempty");
  const FactorGraph prototype = buildGraph(cfg.model);

  bool needsPredictors = false;
  for (Arm a : cfg.arms) needsPredictors |= a != Arm::MP;
  if (needsPredictors && cfg.trainProblems < 2 * cfg.forest.minLeafCount) {
    throw std::invalid_argument("experiment: D must be at least 2*minLeafCount");
  }

  ExperimentResult result;
  Json trainingInfo = Json::object();

  std::optional<ConsensusBank> bank;
  if (needsPredictors) {
    EngineConfig trainEngine = cfg.engine;
    trainEngine.tracked.clear();
    TrainingSet data;
    switch (cfg.trainSource) {
      case TrainSource::Convergence:
        data = genTrainingFromConvergence(cfg.model, cfg.trainProblems,
                                          cfg.trainIterations, trainEngine,
                                          mixSeed(cfg.seed, 0x11));
        break;
      case TrainSource::Samples:
        data = genTrainingFromSamples(cfg.model, cfg.trainProblems, trainEngine,
                                      mixSeed(cfg.seed, 0x11));
        break;
      case TrainSource::Labels: {
        // Synthetic labelled set: model samples with latents as labels.
        std::vector<LabelledProblem> dataset(cfg.trainProblems);
        for (int d = 0; d < cfg.trainProblems; ++d) {
          SampleResult s = sampleModel(cfg.model, mixSeed(cfg.seed, 0x11) + d);
          dataset[d].observations = std::move(s.observations);
          dataset[d].labels = std::move(s.latents);
        }
        data = genTrainingFromLabels(cfg.model, dataset, trainEngine);
        break;
      }
    }
    ForestConfig forestCfg = cfg.forest;
    forestCfg.seed = mixSeed(cfg.seed, 0x22);
    bank = trainPredictors(cfg.model, data, forestCfg);
    trainingInfo["discardedProblems"] = data.discarded;
    Json counts = Json::object();
    for (const auto& [name, exs] : data.perAttachment) {
      counts[name] = exs.size();
    }
    trainingInfo["examples"] = std::move(counts);
    for (const auto& [name, entry] : bank->entries) {
      result.forests[name] = entry.forest.toJson();
    }
  }

  // All arms see byte-identical test observations.
  std::vector<SampleResult> tests(cfg.trials);
  std::string hashInput;
  for (int t = 0; t < cfg.trials; ++t) {
    tests[t] = sampleModel(cfg.model, mixSeed(cfg.seed, 0x8000 + t));
    hashInput += sampleToJsonLine(mixSeed(cfg.seed, 0x8000 + t), tests[t]);
    result.truths.push_back(tests[t].latents);
  }
  const std::uint64_t datasetHash = fnv1a(hashInput);

  TrialContext ctx{cfg, prototype, bank ? &*bank : nullptr,
                   trackedVariables(cfg.model), metricNames(cfg.model)};

  // Trials run in parallel; each worker uses its own bank copy so per-arm
  // stage toggles stay thread-local.
  const int workers =
      std::max(1, std::min<int>(std::thread::hardware_concurrency(), cfg.trials));
  std::vector<std::vector<ArmOutcome>> outcomes(cfg.trials);
  std::atomic<int> nextTrial{0};
  std::vector<std::future<void>> futures;
  for (int w = 0; w < workers; ++w) {
    futures.push_back(std::async(std::launch::async, [&]() {
      std::optional<ConsensusBank> localBank = bank;
      TrialContext localCtx = ctx;
      localCtx.bank = localBank ? &*localBank : nullptr;
      for (;;) {
        const int t = nextTrial.fetch_add(1);
        if (t >= cfg.trials) return;
        std::vector<ArmOutcome> perArm;
        for (Arm arm : cfg.arms) {
          if (arm == Arm::ForestOnly) {
            perArm.push_back(runForestOnly(localCtx, t, tests[t]));
          } else {
            if (localBank) configureBankForArm(*localBank, arm);
            perArm.push_back(runArm(localCtx, arm, t, tests[t]));
          }
        }
        outcomes[t] = std::move(perArm);
      }
    }));
  }
  for (auto& f : futures) f.get();

  for (int t = 0; t < cfg.trials; ++t) {
    for (auto& armOut : outcomes[t]) {
      result.scheduleViolations += armOut.scheduleViolations;
      if (armOut.failed) ++result.failedRuns;
      for (auto& row : armOut.rows) result.rows.push_back(std::move(row));
    }
  }

  // Per-arm, per-metric mean and standard error at each iteration.
  Json summaryMetrics = Json::object();
  for (Arm arm : cfg.arms) {
    Json armJson = Json::object();
    for (const auto& metric : ctx.metrics) {
      std::vector<double> mean(cfg.iterations, 0.0), var(cfg.iterations, 0.0);
      std::vector<int> count(cfg.iterations, 0);
      for (const auto& row : result.rows) {
        if (row.arm != armName(arm) || row.metric != metric) continue;
        const int k = row.iteration - 1;
        ++count[k];
        const double delta = row.value - mean[k];
        mean[k] += delta / count[k];
        var[k] += delta * (row.value - mean[k]);
      }
      Json m = Json::array(), se = Json::array();
      for (int k = 0; k < cfg.iterations; ++k) {
        m.push_back(mean[k]);
        se.push_back(count[k] > 1 ? std::sqrt(var[k] / (count[k] - 1) / count[k]) : 0.0);
      }
      armJson[metric] = {{"mean", std::move(m)}, {"stderr", std::move(se)}};
    }
    summaryMetrics[armName(arm)] = std::move(armJson);
  }

  Json summary;
  summary["model"] = toJson(cfg.model);
  Json armsJson = Json::array();
  for (Arm a : cfg.arms) armsJson.push_back(armName(a));
  summary["arms"] = std::move(armsJson);
  summary["trials"] = cfg.trials;
  summary["iterations"] = cfg.iterations;
  summary["seed"] = cfg.seed;
  summary["datasetHash"] = datasetHash;
  summary["metrics"] = std::move(summaryMetrics);
  summary["failedRuns"] = result.failedRuns;
  summary["scheduleViolations"] = result.scheduleViolations;
  if (needsPredictors) summary["training"] = std::move(trainingInfo);
  result.summary = std::move(summary);
  return result;
}

std::string metricsCsv(const std::vector<MetricRow>& rows) {
  std::ostringstream out;
  out << "arm,problem_id,iteration,metric,value\n";
  out.precision(17);
  for (const auto& row : rows) {
    out << row.arm << ',' << row.problem << ',' << row.iteration << ',' << row.metric
        << ',' << row.value << '\n';
  }
  return out.str();
}

Json toJson(const ExperimentConfig& cfg) {
  Json j;
  j["model"] = toJson(cfg.model);
  Json exp;
  switch (cfg.trainSource) {
    case TrainSource::Convergence: exp["trainSource"] = "convergence"; break;
    case TrainSource::Samples: exp["trainSource"] = "samples"; break;
    case TrainSource::Labels: exp["trainSource"] = "labels"; break;
  }
  exp["D"] = cfg.trainProblems;
  exp["trainIterations"] = cfg.trainIterations;
  exp["trials"] = cfg.trials;
  exp["iterations"] = cfg.iterations;
  Json arms = Json::array();
  for (Arm a : cfg.arms) arms.push_back(armName(a));
  exp["arms"] = std::move(arms);
  exp["seed"] = cfg.seed;
  j["experiment"] = std::move(exp);

  Json eng;
  eng["mode"] = cfg.engine.mode == InferenceMode::VMP ? "VMP" : "EP";
  eng["quadratureNodes"] = cfg.engine.quad.nodesPerDim;
  eng["convergenceTol"] = cfg.engine.convergenceTol;
  Json damping = Json::array();
  for (const auto& rule : cfg.engine.damping) {
    damping.push_back({{"kind", factorTypeName(rule.kind)},
                       {"target", rule.target},
                       {"alpha", rule.alpha}});
  }
  eng["damping"] = std::move(damping);
  j["engine"] = std::move(eng);

  Json forest;
  forest["trees"] = cfg.forest.treeCount;
  forest["maxDepth"] = cfg.forest.maxDepth;
  forest["minLeafCount"] = cfg.forest.minLeafCount;
  forest["candidatesPerNode"] = cfg.forest.candidatesPerNode;
  forest["ridge"] = cfg.forest.ridge;
  forest["coeffPrune"] = cfg.forest.coeffPrune;
  j["forest"] = std::move(forest);
  return j;
}

ExperimentConfig experimentConfigFromJson(const Json& j) {
  ExperimentConfig cfg;
  cfg.model = modelSpecFromJson(j.at("model"));
  if (j.contains("experiment")) {
    const Json& exp = j.at("experiment");
    if (exp.contains("trainSource")) {
      const std::string s = exp.at("trainSource").get<std::string>();
      if (s == "convergence") cfg.trainSource = TrainSource::Convergence;
      else if (s == "samples") cfg.trainSource = TrainSource::Samples;
      else if (s == "labels") cfg.trainSource = TrainSource::Labels;
      else throw std::invalid_argument("unknown trainSource: " + s);
    }
    if (exp.contains("D")) cfg.trainProblems = exp.at("D").get<int>();
    if (exp.contains("trainIterations")) {
      cfg.trainIterations = exp.at("trainIterations").get<int>();
    }
    if (exp.contains("trials")) cfg.trials = exp.at("trials").get<int>();
    if (exp.contains("iterations")) cfg.iterations = exp.at("iterations").get<int>();
    if (exp.contains("arms")) {
      cfg.arms.clear();
      for (const auto& a : exp.at("arms")) {
        cfg.arms.push_back(armFromName(a.get<std::string>()));
      }
    }
    if (exp.contains("seed")) cfg.seed = exp.at("seed").get<std::uint64_t>();
  }
  if (j.contains("engine")) {
    const Json& eng = j.at("engine");
    if (eng.contains("mode")) {
      const std::string m = eng.at("mode").get<std::string>();
      if (m == "VMP") cfg.engine.mode = InferenceMode::VMP;
      else if (m == "EP") cfg.engine.mode = InferenceMode::EP;
      else throw std::invalid_argument("unknown mode: " + m);
    }
    if (eng.contains("quadratureNodes")) {
      cfg.engine.quad.nodesPerDim = eng.at("quadratureNodes").get<int>();
    }
    if (eng.contains("convergenceTol")) {
      cfg.engine.convergenceTol = eng.at("convergenceTol").get<double>();
    }
    if (eng.contains("damping")) {
      for (const auto& rule : eng.at("damping")) {
        cfg.engine.damping.push_back(
            {factorTypeFromName(rule.at("kind").get<std::string>()),
             rule.at("target").get<std::string>(), rule.at("alpha").get<double>()});
      }
    }
  }
  if (j.contains("forest")) {
    const Json& f = j.at("forest");
    if (f.contains("trees")) cfg.forest.treeCount = f.at("trees").get<int>();
    if (f.contains("maxDepth")) cfg.forest.maxDepth = f.at("maxDepth").get<int>();
    if (f.contains("minLeafCount")) {
      cfg.forest.minLeafCount = f.at("minLeafCount").get<int>();
    }
    if (f.contains("candidatesPerNode")) {
      cfg.forest.candidatesPerNode = f.at("candidatesPerNode").get<int>();
    }
    if (f.contains("ridge")) cfg.forest.ridge = f.at("ridge").get<double>();
    if (f.contains("coeffPrune")) cfg.forest.coeffPrune = f.at("coeffPrune").get<double>();
  }
  if (cfg.arms.empty()) cfg.arms = {Arm::MP, Arm::CMP};
  return cfg;
}

}  // namespace conmp
