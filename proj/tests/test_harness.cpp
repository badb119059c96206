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

#include <numbers>
#include <sstream>

#include "conmp/experiment.hpp"

using namespace conmp;

namespace {

ExperimentConfig tinyCircleConfig() {
  ExperimentConfig cfg;
  CircleSpec spec;
  spec.n = 5;
  cfg.model = spec;
  cfg.trainSource = TrainSource::Samples;
  cfg.trainProblems = 40;
  cfg.trials = 2;
  cfg.iterations = 3;
  cfg.arms = {Arm::MP, Arm::CMP};
  cfg.seed = 5;
  return cfg;
}

}  // namespace

TEST_CASE("computeMetrics") {
  SUBCASE("posterior mean equal to truth gives zero errors") {
    CircleSpec spec;
    ModelSpec ms(spec);
    std::map<std::string, Eigen::VectorXd> truth;
    truth["c"] = Eigen::Vector2d(0.4, -0.1);
    truth["r"] = Eigen::VectorXd::Constant(1, 1.2);
    std::map<std::string, Message> beliefs;
    beliefs["c"] = MvGaussian::fromMeanCovariance(truth["c"],
                                                  0.01 * Eigen::Matrix2d::Identity());
    beliefs["r"] = Gaussian::fromMeanVariance(1.2, 0.01);
    auto m = computeMetrics(ms, beliefs, truth);
    CHECK(m.at("centerError") == doctest::Approx(0.0));
    CHECK(m.at("radiusError") == doctest::Approx(0.0));
  }
  SUBCASE("orthogonal lights are a quarter turn apart") {
    FaceSpec spec;
    spec.width = spec.height = 2;
    ModelSpec ms(spec);
    std::map<std::string, Eigen::VectorXd> truth;
    truth["l"] = Eigen::Vector3d(0, 1, 0);
    std::map<std::string, Message> beliefs;
    beliefs["l"] = MvGaussian::fromMeanCovariance(Eigen::Vector3d(0, 0, 1),
                                                  0.01 * Eigen::Matrix3d::Identity());
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j < 2; ++j) {
        const std::string id = "r[" + std::to_string(i) + "][" + std::to_string(j) + "]";
        truth[id] = Eigen::VectorXd::Constant(1, 0.5);
        beliefs[id] = Gaussian::fromMeanVariance(0.5, 0.01);
      }
    }
    auto m = computeMetrics(ms, beliefs, truth);
    CHECK(m.at("lightAngleError") == doctest::Approx(std::numbers::pi / 2));
    CHECK(m.at("reflectanceRmse") == doctest::Approx(0.0));
  }
  SUBCASE("center error is the euclidean distance") {
    CircleSpec spec;
    ModelSpec ms(spec);
    std::map<std::string, Eigen::VectorXd> truth;
    truth["c"] = Eigen::Vector2d(0, 0);
    truth["r"] = Eigen::VectorXd::Constant(1, 1.0);
    std::map<std::string, Message> beliefs;
    beliefs["c"] = MvGaussian::fromMeanCovariance(Eigen::Vector2d(1, 1),
                                                  Eigen::Matrix2d::Identity());
    beliefs["r"] = Gaussian::fromMeanVariance(1.0, 0.1);
    CHECK(computeMetrics(ms, beliefs, truth).at("centerError") ==
          doctest::Approx(std::numbers::sqrt2));
  }
  SUBCASE("missing tracked variable is an error") {
    CircleSpec spec;
    ModelSpec ms(spec);
    std::map<std::string, Eigen::VectorXd> truth;
    truth["c"] = Eigen::Vector2d(0, 0);
    truth["r"] = Eigen::VectorXd::Constant(1, 1.0);
    std::map<std::string, Message> beliefs;  // empty
    CHECK_THROWS(computeMetrics(ms, beliefs, truth));
  }
}

TEST_CASE("experiment row counts follow arms x trials x iterations x metrics") {
  ExperimentConfig cfg = tinyCircleConfig();
  ExperimentResult res = runExperiment(cfg);
  CHECK(res.rows.size() == 2u * 2u * 3u * 2u);
  CHECK(res.failedRuns == 0);
  CHECK(res.scheduleViolations == 0);

  SUBCASE("single trial and iteration give one row per metric per arm") {
    cfg.trials = 1;
    cfg.iterations = 1;
    ExperimentResult one = runExperiment(cfg);
    CHECK(one.rows.size() == 2u * 1u * 1u * 2u);
  }
}

TEST_CASE("experiments are deterministic end to end") {
  ExperimentConfig cfg = tinyCircleConfig();
  ExperimentResult a = runExperiment(cfg);
  ExperimentResult b = runExperiment(cfg);
  REQUIRE(a.rows.size() == b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    CHECK(a.rows[i].arm == b.rows[i].arm);
    CHECK(a.rows[i].value == b.rows[i].value);
  }
  CHECK(a.summary.at("datasetHash") == b.summary.at("datasetHash"));
  // Trained forests serialize byte-identically given the same seed.
  CHECK(a.forests.at("center").dump() == b.forests.at("center").dump());
}

TEST_CASE("metrics CSV has the documented shape") {
  ExperimentConfig cfg = tinyCircleConfig();
  cfg.trials = 1;
  cfg.iterations = 1;
  ExperimentResult res = runExperiment(cfg);
  const std::string csv = metricsCsv(res.rows);
  std::istringstream in(csv);
  std::string header;
  std::getline(in, header);
  CHECK(header == "arm,problem_id,iteration,metric,value");
  int lines = 0;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) ++lines;
  }
  CHECK(lines == static_cast<int>(res.rows.size()));
}

TEST_CASE("experiment config JSON round trips") {
  ExperimentConfig cfg;
  cfg.model = SquareSpec::withSize(16, 16);
  cfg.trainSource = TrainSource::Samples;
  cfg.trials = 50;
  cfg.iterations = 50;
  cfg.engine.mode = InferenceMode::EP;
  cfg.engine.damping = {{FactorType::BoxMembership, "c", 0.95}};
  cfg.arms = {Arm::MP, Arm::CMP1Stage, Arm::CMP2Stage};
  cfg.seed = 7;
  const Json j = toJson(cfg);
  ExperimentConfig back = experimentConfigFromJson(j);
  CHECK(toJson(back).dump() == j.dump());
  CHECK(back.engine.damping.size() == 1);
  CHECK(back.engine.damping[0].alpha == doctest::Approx(0.95));
}

TEST_CASE("summary carries per-arm mean and standard error curves") {
  ExperimentConfig cfg = tinyCircleConfig();
  cfg.arms = {Arm::MP, Arm::CMP, Arm::ForestOnly};
  ExperimentResult res = runExperiment(cfg);
  for (const char* arm : {"MP", "CMP", "ForestOnly"}) {
    const Json& m = res.summary.at("metrics").at(arm).at("centerError");
    CHECK(m.at("mean").size() == 3);
    CHECK(m.at("stderr").size() == 3);
  }
  // The forest-only arm repeats its one-shot prediction across iterations.
  const Json& fo = res.summary.at("metrics").at("ForestOnly").at("centerError").at("mean");
  CHECK(fo[0].get<double>() == doctest::Approx(fo[2].get<double>()));
}

TEST_CASE("arm names round trip") {
  for (Arm a : {Arm::MP, Arm::CMP, Arm::CMP1Stage, Arm::CMP2Stage, Arm::ForestOnly}) {
    CHECK(armFromName(armName(a)) == a);
  }
  CHECK_THROWS(armFromName("bogus"));
}

TEST_CASE("empty arm list is rejected") {
  ExperimentConfig cfg = tinyCircleConfig();
  cfg.arms.clear();
  CHECK_THROWS(runExperiment(cfg));
}

TEST_CASE("model spec JSON round trips") {
  for (ModelSpec spec :
       {ModelSpec(CircleSpec{}), ModelSpec(SquareSpec::withSize(16, 16)),
        ModelSpec(FaceSpec{}), ModelSpec(ChainSpec{})}) {
    const Json j = toJson(spec);
    CHECK(toJson(modelSpecFromJson(j)).dump() == j.dump());
  }
}

TEST_CASE("message JSON round trips") {
  std::vector<Message> msgs = {
      Gaussian::fromMeanVariance(0.5, 2.0),
      MvGaussian::fromMeanCovariance(Eigen::Vector2d(1, -1),
                                     Eigen::Matrix2d::Identity() * 0.3),
      Bernoulli{0.7},
      Bernoulli{std::numeric_limits<double>::infinity()},
      PointMass::at(1.25),
  };
  for (const Message& m : msgs) {
    CHECK(closeTo(messageFromJson(toJson(m)), m, 0.0));
  }
}

TEST_CASE("dataset JSON lines round trip") {
  CircleSpec spec;
  spec.n = 4;
  SampleResult s = sampleModel(ModelSpec(spec), 77);
  const std::string line = sampleToJsonLine(77, s);
  auto [seed, back] = sampleFromJsonLine(line);
  CHECK(seed == 77);
  for (const auto& [id, v] : s.observations) {
    CHECK((back.observations.at(id) - v).lpNorm<Eigen::Infinity>() == 0.0);
  }
  for (const auto& [id, v] : s.latents) {
    CHECK((back.latents.at(id) - v).lpNorm<Eigen::Infinity>() == 0.0);
  }
}
