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

#include "conmp/models.hpp"

using namespace conmp;

TEST_CASE("circle graph expands plates with deterministic ordering") {
  CircleSpec spec;
  spec.n = 10;
  FactorGraph g = buildGraph(ModelSpec(spec));

  int nx = 0, nz = 0, np = 0, na = 0, rot = 0, sum = 0, noise = 0, priors = 0;
  for (const auto& v : g.variables) {
    if (v.id[0] == 'x') ++nx;
    if (v.id[0] == 'z') ++nz;
    if (v.id[0] == 'p') ++np;
    if (v.id[0] == 'a') ++na;
  }
  for (const auto& f : g.factors) {
    if (f.kind.type == FactorType::Rotation) ++rot;
    if (f.kind.type == FactorType::Sum) ++sum;
    if (f.kind.type == FactorType::GaussianNoise) ++noise;
    if (f.kind.type == FactorType::Prior) ++priors;
  }
  CHECK(nx == 10);
  CHECK(nz == 10);
  CHECK(np == 10);
  CHECK(na == 10);
  CHECK(rot == 10);
  CHECK(sum == 10);
  CHECK(noise == 10);
  CHECK(priors == 12);  // c, r, and one per angle
  CHECK(g.variable("c").isGlobal);
  CHECK(g.variable("r").isGlobal);

  // Identical specs produce identical orderings.
  FactorGraph g2 = buildGraph(ModelSpec(spec));
  REQUIRE(g.variables.size() == g2.variables.size());
  for (std::size_t i = 0; i < g.variables.size(); ++i) {
    CHECK(g.variables[i].id == g2.variables[i].id);
  }
  for (std::size_t i = 0; i < g.factors.size(); ++i) {
    CHECK(g.factors[i].id == g2.factors[i].id);
    CHECK(g.factors[i].edges == g2.factors[i].edges);
  }
}

TEST_CASE("square graph has per-pixel plates and four globals") {
  FactorGraph g = buildGraph(ModelSpec(SquareSpec::withSize(16, 16)));
  int nx = 0, nz = 0, ns = 0;
  for (const auto& v : g.variables) {
    if (v.id[0] == 'x') ++nx;
    if (v.id[0] == 'z') ++nz;
    if (v.id[0] == 's') ++ns;
  }
  CHECK(nx == 256);
  CHECK(nz == 256);
  CHECK(ns == 256);
  for (const char* id : {"c", "l", "fg", "bg"}) {
    CHECK(g.variable(id).isGlobal);
  }
  CHECK(g.predictors.size() == 3);
}

TEST_CASE("face graph pairs mirrored reflectance pixels") {
  FaceSpec spec;
  spec.width = 8;
  spec.height = 8;
  FactorGraph g = buildGraph(ModelSpec(spec));
  int sym = 0;
  for (const auto& f : g.factors) {
    if (f.kind.type == FactorType::SoftSymmetry) {
      ++sym;
      const auto& a = g.variables[f.edges[0]].id;
      const auto& b = g.variables[f.edges[1]].id;
      // sym[i][j] pairs r[i][j] with r[i][7-j]
      CHECK(a.substr(0, 2) == "r[");
      CHECK(b.substr(0, 2) == "r[");
    }
  }
  CHECK(sym == 8 * 4);
  CHECK(g.variable("l").isGlobal);
  CHECK(g.predictors.size() == 2);
  CHECK(g.predictors[0].typeB);
  CHECK(g.predictors[0].targets.size() == 64);
}

TEST_CASE("layer consistency is enforced") {
  FactorGraph g;
  VariableNode a;
  a.id = "a";
  a.layer = 0;
  VariableNode b;
  b.id = "b";
  b.layer = 2;  // skips a layer
  g.variables = {a, b};
  FactorNode f;
  f.id = "bad";
  f.kind = FactorKind::gaussianNoise(0.1);
  f.edges = {0, 1};
  f.roles = {"child", "parent"};
  g.factors = {f};
  CHECK_THROWS(g.finalize());
}

TEST_CASE("conditionObservations") {
  CircleSpec spec;
  spec.n = 3;
  SUBCASE("point masses land on every observed variable") {
    FactorGraph g = buildGraph(ModelSpec(spec));
    std::map<std::string, Eigen::VectorXd> data;
    for (int i = 0; i < 3; ++i) {
      Eigen::VectorXd v(2);
      v << i, -i;
      data["x[" + std::to_string(i) + "]"] = v;
    }
    conditionObservations(g, data);
    for (int i = 0; i < 3; ++i) {
      CHECK(g.variable("x[" + std::to_string(i) + "]").observed());
    }
    CHECK_FALSE(g.variable("c").observed());
  }
  SUBCASE("missing observation is an error") {
    FactorGraph g = buildGraph(ModelSpec(spec));
    std::map<std::string, Eigen::VectorXd> data;
    Eigen::VectorXd v(2);
    v << 0, 0;
    data["x[0]"] = v;
    CHECK_THROWS(conditionObservations(g, data));
  }
  SUBCASE("empty map on a graph without observables") {
    FactorGraph g;
    VariableNode w;
    w.id = "w";
    w.layer = 1;
    g.variables = {w};
    FactorNode f;
    f.id = "prior_w";
    f.kind = FactorKind::priorOn(Gaussian::fromMeanVariance(0, 1));
    f.edges = {0};
    f.roles = {"v"};
    g.factors = {f};
    g.finalize();
    CHECK_NOTHROW(conditionObservations(g, {}));
  }
  SUBCASE("observation key outside layer 0 is rejected") {
    FactorGraph g = buildGraph(ModelSpec(spec));
    std::map<std::string, Eigen::VectorXd> data;
    Eigen::VectorXd v(2);
    v << 0, 0;
    data["z[0]"] = v;
    CHECK_THROWS(conditionObservations(g, data));
  }
}

TEST_CASE("natural id ordering groups plate variables numerically") {
  CircleSpec spec;
  spec.n = 12;
  FactorGraph g = buildGraph(ModelSpec(spec));
  // z[2] must come before z[10] despite lexicographic order.
  CHECK(g.variableIndex("z[2]") < g.variableIndex("z[10]"));
}
