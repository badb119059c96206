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

// End-to-end acceptance suite. Each criterion prints one PASS/FAIL line; the
// process exits nonzero if any fails. Runs the full experiment protocols, so
// expect a few minutes of wall time.

#include <chrono>
#include <cstdio>
#include <random>

#include "conmp/experiment.hpp"
#include "conmp/validate.hpp"

using namespace conmp;

namespace {

int failures = 0;
int totalScheduleViolations = 0;

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
        .count();
  }
};

void report(int criterion, bool pass, const std::string& detail, double seconds) {
  std::printf("[%s] criterion %d: %s (%.1fs)\n", pass ? "PASS" : "FAIL", criterion,
              detail.c_str(), seconds);
  std::fflush(stdout);
  if (!pass) ++failures;
}

double armMeanAt(const ExperimentResult& res, const std::string& arm,
                 const std::string& metric, int iteration) {
  return res.summary.at("metrics").at(arm).at(metric).at("mean").at(iteration - 1)
      .get<double>();
}

// --------------------------------------------------------------------------
// 1. Message algebra property suite, 1000 randomized cases per property.

void criterion1() {
  Timer timer;
  std::mt19937_64 rng(8101);
  std::uniform_real_distribution<double> meanD(-3.0, 3.0);
  std::uniform_real_distribution<double> varD(1e-3, 10.0);
  std::uniform_real_distribution<double> probD(0.01, 0.99);
  bool pass = true;
  std::string what = "message algebra properties";

  for (int i = 0; i < 1000 && pass; ++i) {
    Message a = Gaussian::fromMeanVariance(meanD(rng), varD(rng));
    Message b = Gaussian::fromMeanVariance(meanD(rng), varD(rng));
    // Product/quotient inverse to 1e-12.
    if (!closeTo(divide(multiply(a, b), b), a, 1e-12)) {
      pass = false;
      what = "product/quotient inverse violated";
    }
    // Moment round trip to 1e-10.
    const auto& ga = std::get<Gaussian>(a);
    Message rt = fromMoments(Family::Gaussian, moments(a));
    const auto& gr = std::get<Gaussian>(rt);
    if (std::abs(ga.mean() - gr.mean()) > 1e-10 * std::max(1.0, std::abs(ga.mean())) ||
        std::abs(ga.variance() - gr.variance()) > 1e-10 * ga.variance()) {
      pass = false;
      what = "moment round trip violated";
    }
    // Bernoulli round trip.
    Message bern = Bernoulli::fromProbability(probD(rng));
    if (!closeTo(fromMoments(Family::Bernoulli, moments(bern)), bern, 1e-10)) {
      pass = false;
      what = "bernoulli moment round trip violated";
    }
  }
  for (int i = 0; i < 1000 && pass; ++i) {
    // momentAverage arithmetic: moments of the average equal averaged moments.
    const int k = 2 + static_cast<int>(rng() % 5);
    std::vector<Message> ms;
    Eigen::Vector2d avg(0, 0);  // (mean, raw second moment)
    for (int j = 0; j < k; ++j) {
      const double m = meanD(rng), v = varD(rng);
      ms.push_back(Gaussian::fromMeanVariance(m, v));
      avg += Eigen::Vector2d(m, m * m + v);
    }
    avg /= k;
    const Moments got = moments(momentAverage(ms));
    if (std::abs(got.first(0) - avg(0)) > 1e-10 * std::max(1.0, std::abs(avg(0))) ||
        std::abs(got.second(0, 0) - avg(1)) > 1e-10 * std::max(1.0, avg(1))) {
      pass = false;
      what = "momentAverage arithmetic violated";
    }
    // Idempotence on copies to 1e-12 (relative, in natural parameters).
    std::vector<Message> copies(3, ms.front());
    if (!closeTo(momentAverage(copies), ms.front(),
                 1e-12 * std::abs(std::get<Gaussian>(ms.front()).eta2) * 10)) {
      pass = false;
      what = "momentAverage idempotence violated";
    }
  }
  pass = pass && timer.seconds() < 5.0;
  report(1, pass, what + ", 1000 cases per property", timer.seconds());
}

// --------------------------------------------------------------------------
// 2. Conjugate oracle on the linear-Gaussian chain, both modes, 1e-8.

void criterion2() {
  Timer timer;
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
  double worst = 0;
  for (InferenceMode mode : {InferenceMode::VMP, InferenceMode::EP}) {
    FactorGraph g = buildGraph(ModelSpec(spec));
    conditionObservations(g, {{"x", Eigen::VectorXd::Constant(1, x)}});
    EngineConfig cfg;
    cfg.iterations = 20;
    cfg.mode = mode;
    InferenceTrace trace = runInference(g, cfg, makeSchedule(g, cfg));
    totalScheduleViolations += trace.scheduleViolations;
    const Gaussian w = std::get<Gaussian>(trace.finalBeliefs.at("w"));
    const Gaussian b = std::get<Gaussian>(trace.finalBeliefs.at("b"));
    const Gaussian z = std::get<Gaussian>(trace.finalBeliefs.at("z"));
    worst = std::max({worst, std::abs(w.mean() - truth.wMean),
                      std::abs(w.variance() - truth.wVar),
                      std::abs(b.mean() - truth.bMean),
                      std::abs(b.variance() - truth.bVar),
                      std::abs(z.mean() - truth.zMean),
                      std::abs(z.variance() - truth.zVar)});
  }
  const bool pass = worst < 1e-8 && timer.seconds() < 1.0;
  report(2, pass,
         "chain posterior matches closed form in VMP and EP, max error " +
             std::to_string(worst),
         timer.seconds());
}

// --------------------------------------------------------------------------
// 3. Quadrature-vs-grid oracles, 50 random instances per factor, 1e-3.

void criterion3() {
  Timer timer;
  const OracleReport rot = checkRotationOracle(50, 1e-3, 2026);
  const OracleReport box = checkBoxOracle(50, 1e-3, 2027);
  const OracleReport gate = checkGateOracle(50, 1e-3, 2028);
  const bool pass =
      rot.pass && box.pass && gate.pass && timer.seconds() < 120.0;
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "max relative errors: rotation %.2e, box %.2e, gate %.2e",
                rot.maxRelativeError, box.maxRelativeError, gate.maxRelativeError);
  report(3, pass, buf, timer.seconds());
}

// --------------------------------------------------------------------------
// 4. Forest oracle: exact recovery and split-objective maximality.

void criterion4() {
  Timer timer;
  std::mt19937_64 rng(41);
  std::normal_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> mag(0.1, 1.0);

  Eigen::MatrixXd w0(1, 4);
  for (int b = 0; b < 4; ++b) w0(0, b) = (rng() % 2 ? 1 : -1) * mag(rng);
  std::vector<TrainRow> rows(1000);
  for (auto& row : rows) {
    row.r = Eigen::VectorXd::NullaryExpr(3, [&](Eigen::Index) { return unit(rng); });
    row.t = row.r;
    Eigen::VectorXd x(4);
    x << row.r, 1.0;
    row.y = w0 * x;
  }
  ForestConfig exactCfg;
  exactCfg.treeCount = 1;
  exactCfg.maxDepth = 0;
  exactCfg.bootstrap = false;
  exactCfg.seed = 4;
  Forest exact = trainForest(rows, Family::Gaussian, exactCfg);
  double worst = 0;
  for (const auto& row : rows) {
    worst = std::max(worst,
                     std::abs(meanVectorOf(exact.predict(row.t, row.r))(0) - row.y(0)));
  }
  const bool recovery = worst < 1e-8;

  // Exhaustive split-objective audit on a noisy forest.
  for (auto& row : rows) row.y(0) += 0.3 * unit(rng);
  ForestConfig cfg;
  cfg.treeCount = 2;
  cfg.maxDepth = 3;
  cfg.candidatesPerNode = 16;
  cfg.seed = 14;
  ForestDiagnostics diag;
  diag.collectAudits = true;
  trainForest(rows, Family::Gaussian, cfg, &diag);
  bool maximal = true;
  int nodes = 0;
  for (const auto& tree : diag.audits) {
    for (const auto& audit : tree) {
      const double chosen = splitObjective(rows, audit.rows,
                                           audit.candidates[audit.chosen], cfg.ridge,
                                           cfg.minLeafCount);
      for (const auto& cand : audit.candidates) {
        const double ic = splitObjective(rows, audit.rows, cand, cfg.ridge,
                                         cfg.minLeafCount);
        if (ic > chosen + 1e-9 * std::abs(chosen)) maximal = false;
      }
      ++nodes;
    }
  }
  const bool pass = recovery && maximal && nodes > 0 && timer.seconds() < 30.0;
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "exact recovery %.2e; chosen splits maximal on %d audited nodes",
                worst, nodes);
  report(4, pass, buf, timer.seconds());
}

// --------------------------------------------------------------------------
// 5. Circle acceleration.

void criterion5() {
  Timer timer;
  ExperimentConfig cfg;
  cfg.model = CircleSpec{};
  cfg.trainSource = TrainSource::Convergence;
  cfg.trainProblems = 500;
  cfg.trainIterations = 100;
  cfg.trials = 50;
  cfg.iterations = 50;
  cfg.engine.mode = InferenceMode::VMP;
  cfg.arms = {Arm::MP, Arm::CMP, Arm::ForestOnly};
  cfg.seed = 7;
  ExperimentResult res = runExperiment(cfg);
  totalScheduleViolations += res.scheduleViolations;

  const double c10 = armMeanAt(res, "CMP", "centerError", 10);
  const double m10 = armMeanAt(res, "MP", "centerError", 10);
  const double m50 = armMeanAt(res, "MP", "centerError", 50);
  const double r10 = armMeanAt(res, "CMP", "radiusError", 10);
  const double mr10 = armMeanAt(res, "MP", "radiusError", 10);
  const double mr50 = armMeanAt(res, "MP", "radiusError", 50);

  const bool pass = c10 <= m50 && c10 <= 0.5 * m10 && r10 <= mr50 &&
                    r10 <= 0.5 * mr10 && res.failedRuns == 0 &&
                    timer.seconds() < 600.0;
  char buf[200];
  std::snprintf(buf, sizeof(buf),
                "center CMP@10 %.3f vs MP@10 %.3f, MP@50 %.3f; radius CMP@10 %.3f vs "
                "MP@10 %.3f, MP@50 %.3f",
                c10, m10, m50, r10, mr10, mr50);
  report(5, pass, buf, timer.seconds());
}

// --------------------------------------------------------------------------
// 6. Square robustification.

void criterion6() {
  Timer timer;
  ExperimentConfig cfg;
  cfg.model = SquareSpec::withSize(16, 16);
  cfg.trainSource = TrainSource::Samples;
  cfg.trainProblems = 500;
  cfg.trials = 50;
  cfg.iterations = 50;
  cfg.engine.mode = InferenceMode::EP;
  cfg.engine.damping = {{FactorType::BoxMembership, "c", 0.95}};
  cfg.arms = {Arm::MP, Arm::CMP1Stage, Arm::CMP2Stage};
  cfg.seed = 7;
  ExperimentResult res = runExperiment(cfg);
  totalScheduleViolations += res.scheduleViolations;

  const double mp = armMeanAt(res, "MP", "centerError", cfg.iterations);
  const double one = armMeanAt(res, "CMP-1stage", "centerError", cfg.iterations);
  const double two = armMeanAt(res, "CMP-2stage", "centerError", cfg.iterations);

  auto hitFraction = [&](const std::string& arm) {
    int hits = 0, total = 0;
    for (const auto& row : res.rows) {
      if (row.arm != arm || row.metric != "centerError" ||
          row.iteration != cfg.iterations) {
        continue;
      }
      const double l = res.truths[row.problem].at("l")(0);
      if (row.value < l / 4) ++hits;
      ++total;
    }
    return static_cast<double>(hits) / total;
  };
  const double fracMp = hitFraction("MP");
  const double fracTwo = hitFraction("CMP-2stage");

  const bool pass = two < one && one < mp && fracTwo - fracMp >= 0.3 &&
                    res.failedRuns == 0 && timer.seconds() < 1200.0;
  char buf[200];
  std::snprintf(buf, sizeof(buf),
                "final center error MP %.2f > 1stage %.2f > 2stage %.2f; hit fraction "
                "2stage %.2f vs MP %.2f",
                mp, one, two, fracTwo, fracMp);
  report(6, pass, buf, timer.seconds());
}

// --------------------------------------------------------------------------
// 7. Face desk scale.

void criterion7() {
  Timer timer;
  ExperimentConfig cfg;
  cfg.model = FaceSpec{};
  cfg.trainSource = TrainSource::Samples;
  cfg.trainProblems = 500;
  cfg.trials = 30;
  cfg.iterations = 100;
  cfg.engine.mode = InferenceMode::VMP;
  cfg.arms = {Arm::MP, Arm::CMP, Arm::ForestOnly};
  cfg.seed = 7;
  ExperimentResult res = runExperiment(cfg);
  totalScheduleViolations += res.scheduleViolations;

  const double light = armMeanAt(res, "CMP", "lightAngleError", cfg.iterations);
  const double lightMp = armMeanAt(res, "MP", "lightAngleError", cfg.iterations);
  const double lightForest = armMeanAt(res, "ForestOnly", "lightAngleError",
                                       cfg.iterations);
  const double refl = armMeanAt(res, "CMP", "reflectanceRmse", cfg.iterations);
  const double reflMp = armMeanAt(res, "MP", "reflectanceRmse", cfg.iterations);

  // (c) disabling the predictors reproduces the plain trace bit-exactly.
  ModelSpec ms = cfg.model;
  SampleResult probe = sampleModel(ms, 123);
  TrainingSet data = genTrainingFromSamples(ms, 40, cfg.engine, 9);
  ForestConfig fcfg;
  fcfg.minLeafCount = 5;
  ConsensusBank bank = trainPredictors(ms, data, fcfg);
  auto runFace = [&](ConsensusSource* src, bool enabled) {
    FactorGraph g = buildGraph(ms);
    conditionObservations(g, probe.observations);
    EngineConfig ecfg = cfg.engine;
    ecfg.iterations = 5;
    ecfg.tracked = trackedVariables(ms);
    ecfg.consensusEnabled = enabled;
    InferenceTrace t = runInference(g, ecfg, makeSchedule(g, ecfg), src);
    totalScheduleViolations += t.scheduleViolations;
    return t;
  };
  const bool bitExact =
      traceEquals(runFace(&bank, false), runFace(nullptr, false));

  const bool pass = light < lightMp && light <= lightForest && refl < reflMp &&
                    bitExact && res.failedRuns == 0 && timer.seconds() < 1800.0;
  char buf[240];
  std::snprintf(buf, sizeof(buf),
                "light error CMP %.3f < MP %.3f, <= Forest %.3f; reflectance RMSE CMP "
                "%.3f < MP %.3f; disabled-predictor trace bit-exact: %s",
                light, lightMp, lightForest, refl, reflMp, bitExact ? "yes" : "no");
  report(7, pass, buf, timer.seconds());
}

// --------------------------------------------------------------------------
// 8. Scheduling invariants across every executed trace.

void criterion8() {
  Timer timer;
  // Structural check on a fresh schedule of each model, plus the violation
  // counters accumulated by every experiment above.
  int structural = 0;
  for (ModelSpec spec :
       {ModelSpec(CircleSpec{}), ModelSpec(SquareSpec::withSize(8, 8)),
        ModelSpec(FaceSpec{8, 8}), ModelSpec(ChainSpec{})}) {
    FactorGraph g = buildGraph(spec);
    std::map<std::string, Eigen::VectorXd> obs;
    for (const auto& v : g.variables) {
      if (v.layer == 0) obs[v.id] = Eigen::VectorXd::Zero(v.dim);
    }
    conditionObservations(g, obs);
    EngineConfig cfg;
    structural += static_cast<int>(validateSchedule(g, makeSchedule(g, cfg)).size());
  }
  const bool pass = structural == 0 && totalScheduleViolations == 0;
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "%d structural violations; %d runtime violations across all traces",
                structural, totalScheduleViolations);
  report(8, pass, buf, timer.seconds());
}

}  // namespace

int main() {
  Timer total;
  criterion1();
  criterion2();
  criterion3();
  criterion4();
  criterion5();
  criterion6();
  criterion7();
  criterion8();
  std::printf("%d/8 criteria passed (%.1fs total)\n", 8 - failures, total.seconds());
  return failures == 0 ? 0 : 1;
}
