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

#include "conmp/engine.hpp"
#include "conmp/models.hpp"
#include "conmp/validate.hpp"

using namespace conmp;

namespace {

FactorGraph conditionedChain(const ChainSpec& spec, double x) {
  FactorGraph g = buildGraph(ModelSpec(spec));
  std::map<std::string, Eigen::VectorXd> data;
  data["x"] = Eigen::VectorXd::Constant(1, x);
  conditionObservations(g, data);
  return g;
}

}  // namespace

TEST_CASE("chain posterior matches closed-form conjugate algebra in both modes") {
  ChainSpec spec;
  spec.wPriorMean = 0.2;
  spec.wPriorVar = 1.3;
  spec.bPriorMean = -0.4;
  spec.bPriorVar = 0.7;
  spec.noiseVar = 0.05;
  const double x = 1.1;
  const ChainPosterior truth = chainClosedForm(spec.wPriorMean, spec.wPriorVar,
                                               spec.bPriorMean, spec.bPriorVar,
                                               spec.noiseVar, x);

  for (InferenceMode mode : {InferenceMode::VMP, InferenceMode::EP}) {
    FactorGraph g = conditionedChain(spec, x);
    EngineConfig cfg;
    cfg.iterations = 20;
    cfg.mode = mode;
    cfg.tracked = {"w", "b", "z"};
    Schedule s = makeSchedule(g, cfg);
    InferenceTrace trace = runInference(g, cfg, s);

    const Gaussian w = std::get<Gaussian>(trace.finalBeliefs.at("w"));
    const Gaussian b = std::get<Gaussian>(trace.finalBeliefs.at("b"));
    const Gaussian z = std::get<Gaussian>(trace.finalBeliefs.at("z"));
    CHECK(w.mean() == doctest::Approx(truth.wMean).epsilon(1e-8));
    CHECK(w.variance() == doctest::Approx(truth.wVar).epsilon(1e-8));
    CHECK(b.mean() == doctest::Approx(truth.bMean).epsilon(1e-8));
    CHECK(b.variance() == doctest::Approx(truth.bVar).epsilon(1e-8));
    CHECK(z.mean() == doctest::Approx(truth.zMean).epsilon(1e-8));
    CHECK(z.variance() == doctest::Approx(truth.zVar).epsilon(1e-8));
  }
}

TEST_CASE("zero iterations leaves only prior beliefs in the trace") {
  ChainSpec spec;
  FactorGraph g = conditionedChain(spec, 0.3);
  EngineConfig cfg;
  cfg.iterations = 0;
  cfg.tracked = {"w"};
  InferenceTrace trace = runInference(g, cfg, makeSchedule(g, cfg));
  REQUIRE(trace.iterations.size() == 1);
  const Gaussian w = std::get<Gaussian>(trace.iterations[0].beliefs.at("w"));
  CHECK(w.mean() == doctest::Approx(spec.wPriorMean));
  CHECK(w.variance() == doctest::Approx(spec.wPriorVar));
}

TEST_CASE("dampMessage") {
  Message m = Gaussian::fromMeanVariance(0.0, 1.0);
  SUBCASE("alpha 1 returns the fresh message") {
    Message fresh = Gaussian::fromMeanVariance(2.0, 0.5);
    CHECK(closeTo(dampMessage(m, fresh, 1.0), fresh, 0.0));
  }
  SUBCASE("convex combination with a uniform old message scales precision") {
    Message damped = dampMessage(Message(Gaussian::uniform()), m, 0.95);
    CHECK(std::get<Gaussian>(damped).precision() == doctest::Approx(0.95));
  }
  SUBCASE("damping a message with itself is the identity") {
    CHECK(closeTo(dampMessage(m, m, 0.37), m, 1e-15));
  }
  SUBCASE("step size must lie in (0, 1]") {
    CHECK_THROWS(dampMessage(m, m, 0.0));
    CHECK_THROWS(dampMessage(m, m, 1.5));
  }
}

TEST_CASE("schedules are deterministic and respect the consensus contract") {
  CircleSpec spec;
  spec.n = 5;
  FactorGraph g = buildGraph(ModelSpec(spec));
  std::map<std::string, Eigen::VectorXd> data;
  for (int i = 0; i < 5; ++i) {
    data["x[" + std::to_string(i) + "]"] = Eigen::VectorXd::Zero(2);
  }
  conditionObservations(g, data);
  EngineConfig cfg;
  Schedule s = makeSchedule(g, cfg);

  CHECK(validateSchedule(g, s).empty());

  SUBCASE("consensus sits at the head of its layer, after the layer below") {
    int consensusPos = -1;
    int lastLayer1 = -1;
    int firstStandardLayer2 = -1;
    for (int i = 0; i < static_cast<int>(s.firstIteration.size()); ++i) {
      const auto& a = s.firstIteration[i];
      if (a.phase == Phase::Consensus) consensusPos = i;
      if (a.bottomUp && a.phase == Phase::Standard && a.layer == 1) lastLayer1 = i;
      if (a.bottomUp && a.phase == Phase::Standard && a.layer == 2 &&
          firstStandardLayer2 < 0) {
        firstStandardLayer2 = i;
      }
    }
    REQUIRE(consensusPos >= 0);
    CHECK(consensusPos > lastLayer1);
    CHECK(consensusPos < firstStandardLayer2);
  }

  SUBCASE("steady-state iterations carry no consensus actions") {
    for (const auto& a : s.steadyState) CHECK(a.phase == Phase::Standard);
  }

  SUBCASE("disabling consensus removes the actions entirely") {
    EngineConfig off = cfg;
    off.consensusEnabled = false;
    Schedule s2 = makeSchedule(g, off);
    for (const auto& a : s2.firstIteration) CHECK(a.phase == Phase::Standard);
    CHECK(s2.firstIteration.size() == s.firstIteration.size() - 1);
  }
}

TEST_CASE("graph without predictors schedules zero consensus actions") {
  ChainSpec spec;
  FactorGraph g = conditionedChain(spec, 0.0);
  EngineConfig cfg;
  Schedule s = makeSchedule(g, cfg);
  for (const auto& a : s.firstIteration) CHECK(a.phase == Phase::Standard);
}

TEST_CASE("identical runs produce bit-identical traces") {
  CircleSpec spec;
  spec.n = 6;
  ModelSpec ms(spec);
  SampleResult sample = sampleModel(ms, 42);
  auto run = [&]() {
    FactorGraph g = buildGraph(ms);
    conditionObservations(g, sample.observations);
    EngineConfig cfg;
    cfg.iterations = 12;
    cfg.tracked = {"c", "r"};
    return runInference(g, cfg, makeSchedule(g, cfg));
  };
  InferenceTrace a = run();
  InferenceTrace b = run();
  CHECK(traceEquals(a, b));
}

TEST_CASE("early stopping honors the convergence threshold") {
  ChainSpec spec;
  FactorGraph g = conditionedChain(spec, 0.5);
  EngineConfig cfg;
  cfg.iterations = 50;
  cfg.convergenceTol = 1e-10;
  InferenceTrace trace = runInference(g, cfg, makeSchedule(g, cfg));
  CHECK(trace.earlyStopped);
  CHECK(trace.iterations.size() < 51);
}

TEST_CASE("circle inference runs and records finite center-error inputs") {
  CircleSpec spec;
  ModelSpec ms(spec);
  SampleResult sample = sampleModel(ms, 7);
  FactorGraph g = buildGraph(ms);
  conditionObservations(g, sample.observations);
  EngineConfig cfg;
  cfg.iterations = 50;
  cfg.tracked = {"c", "r"};
  InferenceTrace trace = runInference(g, cfg, makeSchedule(g, cfg));
  REQUIRE(trace.iterations.size() == 51);
  for (std::size_t i = 1; i < trace.iterations.size(); ++i) {
    const Message& c = trace.iterations[i].beliefs.at("c");
    CHECK(allFinite(c));
    CHECK(meanVectorOf(c).allFinite());
  }
  CHECK(trace.scheduleViolations == 0);
}
