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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "conmp/consensus.hpp"
#include "conmp/validate.hpp"

using namespace conmp;

namespace {

EngineConfig vmpConfig() {
  EngineConfig cfg;
  cfg.mode = InferenceMode::VMP;
  return cfg;
}

}  // namespace

TEST_CASE("genTrainingFromSamples produces point-mass oracles per target") {
  CircleSpec spec;
  spec.n = 5;
  ModelSpec ms(spec);
  SUBCASE("one example per problem for a type-A attachment") {
    TrainingSet set = genTrainingFromSamples(ms, 5, vmpConfig(), 3);
    REQUIRE(set.perAttachment.count("center"));
    CHECK(set.perAttachment.at("center").size() == 5);
    for (const auto& ex : set.perAttachment.at("center")) {
      CHECK(ex.context->size() == 5);
      CHECK(std::holds_alternative<PointMass>(ex.oracle));
    }
  }
  SUBCASE("D=1 gives exactly one example") {
    TrainingSet set = genTrainingFromSamples(ms, 1, vmpConfig(), 3);
    CHECK(set.perAttachment.at("center").size() == 1);
  }
  SUBCASE("oracle equals the sampled latent") {
    TrainingSet set = genTrainingFromSamples(ms, 3, vmpConfig(), 11);
    for (int d = 0; d < 3; ++d) {
      SampleResult s = sampleModel(ms, mixSeed(11, d));
      const auto& ex = set.perAttachment.at("center")[d];
      const auto& pm = std::get<PointMass>(ex.oracle);
      CHECK((pm.location - s.latents.at("c")).lpNorm<Eigen::Infinity>() == 0.0);
    }
  }
}

TEST_CASE("type-B attachments emit one example per pixel per problem") {
  FaceSpec spec;
  spec.width = spec.height = 8;
  TrainingSet set = genTrainingFromSamples(ModelSpec(spec), 2, vmpConfig(), 4);
  CHECK(set.perAttachment.at("reflectance").size() == 2 * 64);
  CHECK(set.perAttachment.at("light").size() == 2);
  // Contexts are shared across the pixels of one problem.
  const auto& exs = set.perAttachment.at("reflectance");
  CHECK(exs[0].context == exs[1].context);
  CHECK(exs[0].context != exs[64].context);
}

TEST_CASE("genTrainingFromConvergence uses converged beliefs as oracles") {
  CircleSpec spec;
  spec.n = 5;
  TrainingSet set = genTrainingFromConvergence(ModelSpec(spec), 3, 40, vmpConfig(), 8);
  REQUIRE(set.perAttachment.at("center").size() == 3);
  for (const auto& ex : set.perAttachment.at("center")) {
    CHECK(isProper(ex.oracle));
    CHECK(family(ex.oracle) == Family::MvGaussian);
  }
  CHECK(set.discarded == 0);
}

TEST_CASE("genTrainingFromLabels") {
  CircleSpec spec;
  spec.n = 5;
  ModelSpec ms(spec);
  SUBCASE("labels equal to samples reproduce genTrainingFromSamples") {
    std::vector<LabelledProblem> dataset;
    for (int d = 0; d < 3; ++d) {
      SampleResult s = sampleModel(ms, mixSeed(21, d));
      LabelledProblem p;
      p.observations = s.observations;
      p.labels = s.latents;
      dataset.push_back(std::move(p));
    }
    TrainingSet fromLabels = genTrainingFromLabels(ms, dataset, vmpConfig());
    TrainingSet fromSamples = genTrainingFromSamples(ms, 3, vmpConfig(), 21);
    REQUIRE(fromLabels.perAttachment.at("center").size() ==
            fromSamples.perAttachment.at("center").size());
    for (std::size_t i = 0; i < fromLabels.perAttachment.at("center").size(); ++i) {
      const auto& a = fromLabels.perAttachment.at("center")[i];
      const auto& b = fromSamples.perAttachment.at("center")[i];
      CHECK(closeTo(a.oracle, b.oracle, 0.0));
      REQUIRE(a.context->size() == b.context->size());
      for (std::size_t k = 0; k < a.context->size(); ++k) {
        CHECK(closeTo((*a.context)[k], (*b.context)[k], 0.0));
      }
    }
  }
  SUBCASE("empty dataset yields an empty set") {
    TrainingSet set = genTrainingFromLabels(ms, {}, vmpConfig());
    CHECK(set.perAttachment.empty());
  }
  SUBCASE("perturbed labels pass through to the oracles") {
    SampleResult s = sampleModel(ms, 33);
    LabelledProblem p;
    p.observations = s.observations;
    p.labels = s.latents;
    p.labels.at("c")(0) += 0.25;
    TrainingSet set = genTrainingFromLabels(ms, {p}, vmpConfig());
    const auto& pm = std::get<PointMass>(set.perAttachment.at("center")[0].oracle);
    CHECK(pm.location(0) == doctest::Approx(s.latents.at("c")(0) + 0.25));
    CHECK(pm.location(1) == doctest::Approx(s.latents.at("c")(1)));
  }
  SUBCASE("targets without labels are skipped and counted") {
    SampleResult s = sampleModel(ms, 34);
    LabelledProblem p;
    p.observations = s.observations;  // no labels at all
    TrainingSet set = genTrainingFromLabels(ms, {p}, vmpConfig());
    CHECK(set.skippedTargets == 1);
    CHECK((set.perAttachment.empty() || set.perAttachment.at("center").empty()));
  }
}

TEST_CASE("training-example JSON lines round trip") {
  CircleSpec spec;
  spec.n = 4;
  TrainingSet set = genTrainingFromSamples(ModelSpec(spec), 1, vmpConfig(), 5);
  const auto& ex = set.perAttachment.at("center")[0];
  const std::string line = trainingExampleToJsonLine("center", ex);
  auto [name, back] = trainingExampleFromJsonLine(line);
  CHECK(name == "center");
  CHECK(back.targetId == ex.targetId);
  CHECK(closeTo(back.oracle, ex.oracle, 0.0));
  REQUIRE(back.context->size() == ex.context->size());
  for (std::size_t k = 0; k < ex.context->size(); ++k) {
    CHECK(closeTo((*back.context)[k], (*ex.context)[k], 0.0));
  }
}

TEST_CASE("live emission captures the same context as training capture") {
  CircleSpec spec;
  spec.n = 6;
  ModelSpec ms(spec);
  TrainingSet data = genTrainingFromSamples(ms, 60, vmpConfig(), 41);
  ForestConfig fcfg;
  fcfg.seed = 3;
  ConsensusBank bank = trainPredictors(ms, data, fcfg);

  const std::uint64_t probeSeed = mixSeed(99, 0);
  SampleResult s = sampleModel(ms, probeSeed);

  // Training-style capture on the probe problem.
  FactorGraph g1 = buildGraph(ms);
  conditionObservations(g1, s.observations);
  EngineConfig cfg = vmpConfig();
  cfg.iterations = 1;
  ContextCapture capture;
  runInference(g1, cfg, makeSchedule(g1, cfg), &capture);

  // Live CMP emission on the same problem.
  FactorGraph g2 = buildGraph(ms);
  conditionObservations(g2, s.observations);
  EngineConfig cfg2 = vmpConfig();
  cfg2.iterations = 1;
  runInference(g2, cfg2, makeSchedule(g2, cfg2), &bank);

  const auto& trainCtx = *capture.captured.at("center");
  const auto& liveCtx = bank.lastContext.at("center");
  REQUIRE(trainCtx.size() == liveCtx.size());
  for (std::size_t k = 0; k < trainCtx.size(); ++k) {
    CHECK(closeTo(trainCtx[k], liveCtx[k], 0.0));
  }
}

TEST_CASE("consensus on an exact circle recovers the algebraic fit center") {
  CircleSpec spec;
  ModelSpec ms(spec);
  TrainingSet data = genTrainingFromSamples(ms, 400, vmpConfig(), 51);
  ForestConfig fcfg;
  fcfg.seed = 9;
  ConsensusBank bank = trainPredictors(ms, data, fcfg);

  const Eigen::Vector2d center(0.3, -0.2);
  std::vector<Message> context;
  std::vector<Eigen::Vector2d> points;
  for (int i = 0; i < spec.n; ++i) {
    const double a = 2 * std::numbers::pi * i / spec.n + 0.37;
    Eigen::Vector2d p = center + Eigen::Vector2d(std::sin(a), std::cos(a));
    points.push_back(p);
    context.push_back(MvGaussian::fromMeanCovariance(p, 0.0101 * Eigen::Matrix2d::Identity()));
  }
  const CircleFit fit = kasaCircleFit(points);
  CHECK((fit.center - center).norm() < 1e-9);  // oracle sanity

  const FactorGraph g = buildGraph(ms);
  const Message pred = bank.predictOnly(g.predictors[0], "c", context);
  CHECK((meanVectorOf(pred) - fit.center).norm() < 0.3);  // forest accuracy
}

TEST_CASE("untrained attachment falls back to the standard schedule") {
  CircleSpec spec;
  spec.n = 5;
  ModelSpec ms(spec);
  SampleResult s = sampleModel(ms, 61);

  auto runWith = [&](ConsensusSource* src, bool consensusEnabled) {
    FactorGraph g = buildGraph(ms);
    conditionObservations(g, s.observations);
    EngineConfig cfg = vmpConfig();
    cfg.iterations = 8;
    cfg.tracked = {"c", "r"};
    cfg.consensusEnabled = consensusEnabled;
    return runInference(g, cfg, makeSchedule(g, cfg), src);
  };

  ConsensusBank empty;  // no entries: every consensus action degrades gracefully
  empty.enabled.insert("center");
  InferenceTrace withEmpty = runWith(&empty, true);
  InferenceTrace plain = runWith(nullptr, false);
  CHECK(traceEquals(withEmpty, plain));
  CHECK(withEmpty.consensusEmitted == 0);
  bool noted = false;
  for (const auto& e : withEmpty.events) {
    noted |= e.find("no trained predictor") != std::string::npos;
  }
  CHECK(noted);
}

TEST_CASE("disabling predictors reproduces the standard trace bit-exactly") {
  CircleSpec spec;
  spec.n = 6;
  ModelSpec ms(spec);
  TrainingSet data = genTrainingFromSamples(ms, 60, vmpConfig(), 71);
  ForestConfig fcfg;
  ConsensusBank bank = trainPredictors(ms, data, fcfg);
  SampleResult s = sampleModel(ms, 72);

  auto runWith = [&](ConsensusSource* src, bool consensusEnabled) {
    FactorGraph g = buildGraph(ms);
    conditionObservations(g, s.observations);
    EngineConfig cfg = vmpConfig();
    cfg.iterations = 10;
    cfg.tracked = {"c", "r"};
    cfg.consensusEnabled = consensusEnabled;
    return runInference(g, cfg, makeSchedule(g, cfg), src);
  };

  InferenceTrace disabled = runWith(&bank, false);
  InferenceTrace plain = runWith(nullptr, false);
  CHECK(traceEquals(disabled, plain));

  // With consensus on, the trace must differ (the message is really additive).
  InferenceTrace with = runWith(&bank, true);
  CHECK(with.consensusEmitted == 1);
  CHECK_FALSE(traceEquals(with, plain));
}

TEST_CASE("type-B attachments emit exactly one message per target in iteration 1") {
  FaceSpec spec;
  spec.width = spec.height = 8;
  ModelSpec ms(spec);
  TrainingSet data = genTrainingFromSamples(ms, 30, vmpConfig(), 81);
  ForestConfig fcfg;
  fcfg.minLeafCount = 5;
  ConsensusBank bank = trainPredictors(ms, data, fcfg);

  SampleResult s = sampleModel(ms, 82);
  FactorGraph g = buildGraph(ms);
  conditionObservations(g, s.observations);
  EngineConfig cfg = vmpConfig();
  cfg.iterations = 3;
  InferenceTrace trace = runInference(g, cfg, makeSchedule(g, cfg), &bank);
  CHECK(trace.consensusEmitted == 64 + 1);  // every reflectance pixel plus the light
  CHECK(trace.scheduleViolations == 0);
}

TEST_CASE("converged CMP beliefs are stable under further standard iterations") {
  CircleSpec spec;
  ModelSpec ms(spec);
  TrainingSet data = genTrainingFromSamples(ms, 80, vmpConfig(), 91);
  ForestConfig fcfg;
  ConsensusBank bank = trainPredictors(ms, data, fcfg);
  SampleResult s = sampleModel(ms, 92);

  auto runFor = [&](int iterations) {
    FactorGraph g = buildGraph(ms);
    conditionObservations(g, s.observations);
    EngineConfig cfg = vmpConfig();
    cfg.iterations = iterations;
    cfg.tracked = {"c", "r"};
    return runInference(g, cfg, makeSchedule(g, cfg), &bank);
  };
  InferenceTrace shorter = runFor(120);
  InferenceTrace longer = runFor(180);
  const double tol = 1e-4;
  REQUIRE(shorter.iterations.back().maxDelta < tol);
  for (const auto& [id, m] : shorter.finalBeliefs) {
    const Moments a = moments(m);
    const Moments b = moments(longer.finalBeliefs.at(id));
    CHECK((a.first - b.first).lpNorm<Eigen::Infinity>() < 10 * tol);
  }
}
