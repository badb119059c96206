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

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "conmp/experiment.hpp"
#include "conmp/numerics.hpp"
#include "conmp/validate.hpp"

namespace fs = std::filesystem;
using namespace conmp;

namespace {

struct CommonArgs {
  std::string configPath;
  std::uint64_t seed = 0;
  bool seedSet = false;
  std::string outDir = ".";
  std::vector<std::string> arms;
};

ExperimentConfig loadConfig(const CommonArgs& args) {
  std::ifstream in(args.configPath);
  if (!in) throw CLI::ValidationError("--config", "cannot open " + args.configPath);
  Json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw CLI::ValidationError("--config", std::string("bad JSON: ") + e.what());
  }
  ExperimentConfig cfg = experimentConfigFromJson(j);
  if (args.seedSet) cfg.seed = args.seed;
  if (!args.arms.empty()) {
    cfg.arms.clear();
    for (const auto& a : args.arms) cfg.arms.push_back(armFromName(a));
  }
  return cfg;
}

void writeFile(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path().empty() ? "." : path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
}

void maybeWritePgms(const ExperimentConfig& cfg, const SampleResult& sample,
                    const fs::path& base) {
  int width = 0, height = 0;
  if (const auto* s = std::get_if<SquareSpec>(&cfg.model)) {
    width = s->width;
    height = s->height;
  } else if (const auto* f = std::get_if<FaceSpec>(&cfg.model)) {
    width = f->width;
    height = f->height;
  } else {
    return;
  }
  Eigen::MatrixXd img(height, width);
  for (int i = 0; i < height; ++i) {
    for (int j = 0; j < width; ++j) {
      img(i, j) = sample.observations
                      .at("x[" + std::to_string(i) + "][" + std::to_string(j) + "]")(0);
    }
  }
  writePgm(base.string(), img, img.minCoeff(), std::max(img.maxCoeff(),
                                                        img.minCoeff() + 1e-9));
}

int runSample(const CommonArgs& args) {
  ExperimentConfig cfg = loadConfig(args);
  std::ostringstream lines;
  for (int t = 0; t < cfg.trials; ++t) {
    const std::uint64_t seed = mixSeed(cfg.seed, 0x8000 + t);
    SampleResult sample = sampleModel(cfg.model, seed);
    lines << sampleToJsonLine(seed, sample) << "\n";
    if (t < 4) {
      maybeWritePgms(cfg, sample,
                     fs::path(args.outDir) / ("sample_" + std::to_string(t) + ".pgm"));
    }
  }
  writeFile(fs::path(args.outDir) / "dataset.jsonl", lines.str());
  std::cout << "wrote " << cfg.trials << " problems to "
            << (fs::path(args.outDir) / "dataset.jsonl").string() << "\n";
  return 0;
}

ConsensusBank trainFromConfig(const ExperimentConfig& cfg, Json* info) {
  EngineConfig trainEngine = cfg.engine;
  trainEngine.tracked.clear();
  TrainingSet data;
  switch (cfg.trainSource) {
    case TrainSource::Convergence:
      data = genTrainingFromConvergence(cfg.model, cfg.trainProblems, cfg.trainIterations,
                                        trainEngine, mixSeed(cfg.seed, 0x11));
      break;
    case TrainSource::Samples:
      data = genTrainingFromSamples(cfg.model, cfg.trainProblems, trainEngine,
                                    mixSeed(cfg.seed, 0x11));
      break;
    case TrainSource::Labels: {
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
  if (info) {
    (*info)["discardedProblems"] = data.discarded;
    for (const auto& [name, exs] : data.perAttachment) {
      (*info)["examples"][name] = exs.size();
    }
  }
  ForestConfig forestCfg = cfg.forest;
  forestCfg.seed = mixSeed(cfg.seed, 0x22);
  return trainPredictors(cfg.model, data, forestCfg);
}

int runTrain(const CommonArgs& args) {
  ExperimentConfig cfg = loadConfig(args);
  Json info;
  ConsensusBank bank = trainFromConfig(cfg, &info);
  for (const auto& [name, entry] : bank.entries) {
    writeFile(fs::path(args.outDir) / ("forest-" + name + ".json"),
              entry.forest.toJson().dump(2) + "\n");
  }
  writeFile(fs::path(args.outDir) / "training.json", info.dump(2) + "\n");
  std::cout << "trained " << bank.entries.size() << " predictors\n";
  return 0;
}

std::string traceCsv(const ExperimentConfig& cfg, const InferenceTrace& trace,
                     const std::map<std::string, Eigen::VectorXd>& truth) {
  std::ostringstream out;
  out.precision(17);
  out << "problem_id,iteration,variable,metric,value\n";
  for (std::size_t it = 0; it < trace.iterations.size(); ++it) {
    for (const auto& [id, belief] : trace.iterations[it].beliefs) {
      if (!isProper(belief) && !std::holds_alternative<Bernoulli>(belief)) continue;
      const Moments mo = moments(belief);
      for (Eigen::Index k = 0; k < mo.first.size(); ++k) {
        out << 0 << ',' << it << ',' << id << ",mean" << k << ',' << mo.first(k) << "\n";
      }
      if (mo.second.size() > 0) {
        for (Eigen::Index k = 0; k < mo.first.size(); ++k) {
          const double var = mo.second(k, k) - mo.first(k) * mo.first(k);
          out << 0 << ',' << it << ',' << id << ",var" << k << ',' << var << "\n";
        }
      }
    }
    if (it > 0) {
      const auto metrics = computeMetrics(cfg.model, trace.iterations[it].beliefs, truth);
      for (const auto& [name, value] : metrics) {
        out << 0 << ',' << it << ",_model," << name << ',' << value << "\n";
      }
    }
  }
  return out.str();
}

int runInfer(const CommonArgs& args) {
  ExperimentConfig cfg = loadConfig(args);
  const Arm arm = cfg.arms.empty() ? Arm::CMP : cfg.arms.front();

  std::optional<ConsensusBank> bank;
  if (arm != Arm::MP) {
    bank = trainFromConfig(cfg, nullptr);
    if (arm == Arm::CMP1Stage) {
      bank->enableStagesUpTo(1);
    } else {
      bank->enableAll();
    }
  }

  const std::uint64_t seed = mixSeed(cfg.seed, 0x8000);
  SampleResult sample = sampleModel(cfg.model, seed);
  FactorGraph g = buildGraph(cfg.model);
  conditionObservations(g, sample.observations);
  EngineConfig engineCfg = cfg.engine;
  engineCfg.iterations = cfg.iterations;
  engineCfg.tracked = trackedVariables(cfg.model);
  engineCfg.consensusEnabled = arm != Arm::MP;
  const Schedule schedule = makeSchedule(g, engineCfg);
  InferenceTrace trace = runInference(g, engineCfg, schedule, bank ? &*bank : nullptr);

  writeFile(fs::path(args.outDir) / "trace.csv", traceCsv(cfg, trace, sample.latents));
  const auto metrics = computeMetrics(cfg.model, trace.iterations.back().beliefs,
                                      sample.latents);
  std::cout << armName(arm) << " final metrics:";
  for (const auto& [name, value] : metrics) std::cout << ' ' << name << '=' << value;
  std::cout << "\nwrote " << (fs::path(args.outDir) / "trace.csv").string() << "\n";
  return trace.scheduleViolations == 0 ? 0 : 2;
}

int runExperimentCmd(const CommonArgs& args) {
  ExperimentConfig cfg = loadConfig(args);
  ExperimentResult res = runExperiment(cfg);
  writeFile(fs::path(args.outDir) / "metrics.csv", metricsCsv(res.rows));
  writeFile(fs::path(args.outDir) / "summary.json", res.summary.dump(2) + "\n");
  for (const auto& [name, forest] : res.forests) {
    writeFile(fs::path(args.outDir) / ("forest-" + name + ".json"), forest.dump(2) + "\n");
  }
  std::cout << "arms:";
  for (Arm a : cfg.arms) std::cout << ' ' << armName(a);
  std::cout << "; trials=" << cfg.trials << "; rows=" << res.rows.size()
            << "; failedRuns=" << res.failedRuns
            << "; scheduleViolations=" << res.scheduleViolations << "\n"
            << "wrote " << (fs::path(args.outDir) / "metrics.csv").string() << ", "
            << "summary.json and forest JSON files\n";
  return res.failedRuns == 0 && res.scheduleViolations == 0 ? 0 : 2;
}

int runCheck() {
  bool allPass = true;
  auto report = [&](const OracleReport& r) {
    std::cout << (r.pass ? "[PASS] " : "[FAIL] ") << r.name << ": max relative error "
              << r.maxRelativeError << " over " << r.instances << " instances\n";
    allPass &= r.pass;
  };
  report(checkRotationOracle(50, 1e-3, 2026));
  report(checkBoxOracle(50, 1e-3, 2027));
  report(checkGateOracle(50, 1e-3, 2028));

  // Conjugate-posterior oracle on the linear-Gaussian chain, both modes.
  ChainSpec spec;
  spec.wPriorMean = 0.2;
  spec.bPriorMean = -0.3;
  spec.noiseVar = 0.05;
  const double x = 0.9;
  const ChainPosterior truth = chainClosedForm(spec.wPriorMean, spec.wPriorVar,
                                               spec.bPriorMean, spec.bPriorVar,
                                               spec.noiseVar, x);
  for (InferenceMode mode : {InferenceMode::VMP, InferenceMode::EP}) {
    FactorGraph g = buildGraph(ModelSpec(spec));
    conditionObservations(g, {{"x", Eigen::VectorXd::Constant(1, x)}});
    EngineConfig cfg;
    cfg.iterations = 20;
    cfg.mode = mode;
    InferenceTrace trace = runInference(g, cfg, makeSchedule(g, cfg));
    const Gaussian w = std::get<Gaussian>(trace.finalBeliefs.at("w"));
    const double err = std::max(std::abs(w.mean() - truth.wMean),
                                std::abs(w.variance() - truth.wVar));
    const bool pass = err < 1e-8;
    std::cout << (pass ? "[PASS] " : "[FAIL] ") << "conjugate-chain-"
              << (mode == InferenceMode::VMP ? "VMP" : "EP") << ": max error " << err
              << "\n";
    allPass &= pass;
  }
  return allPass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"consensus message passing for layered Gaussian models"};
  app.require_subcommand(1);

  CommonArgs args;
  auto addCommon = [&](CLI::App* cmd, bool needsConfig) {
    if (needsConfig) {
      cmd->add_option("--config", args.configPath, "experiment/model config JSON")
          ->required();
    }
    cmd->add_option("--seed", args.seed, "seed override")
        ->each([&](const std::string&) { args.seedSet = true; });
    cmd->add_option("--out", args.outDir, "output directory");
    cmd->add_option("--arm", args.arms, "arm override (repeatable)");
  };

  CLI::App* sample = app.add_subcommand("sample", "generate a sampled dataset");
  addCommon(sample, true);
  CLI::App* train = app.add_subcommand("train", "train consensus predictors");
  addCommon(train, true);
  CLI::App* infer = app.add_subcommand("infer", "run inference on a single problem");
  addCommon(infer, true);
  CLI::App* experiment = app.add_subcommand("experiment", "run a full experiment");
  addCommon(experiment, true);
  CLI::App* check = app.add_subcommand("check", "run the oracle validation suites");
  addCommon(check, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::cerr << app.help() << "\n";
    if (e.get_name() == "CallForHelp") return 0;
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  try {
    if (sample->parsed()) return runSample(args);
    if (train->parsed()) return runTrain(args);
    if (infer->parsed()) return runInfer(args);
    if (experiment->parsed()) return runExperimentCmd(args);
    if (check->parsed()) return runCheck();
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "runtime failure: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
