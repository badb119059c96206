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

#ifndef CONMP_VALIDATE_HPP
#define CONMP_VALIDATE_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "conmp/factors.hpp"

namespace conmp {

// Brute-force integration oracles, independent of the quadrature code paths
// they validate. Each returns the moments of the tilted distribution on the
// requested edge (the factor times all incoming messages), which is what the
// factor implementations moment-match before taking the EP quotient.

struct TiltedMoments {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  double bernoulliP = -1;  // for switch edges
};

// Dense trapezoid grid over (angle, radius), mean +- 6 sigma per axis.
TiltedMoments rotationGridOracle(const FactorKind& kind, const std::vector<Message>& in,
                                 int target, int gridN = 1201);

// Dense 3-d grid over (cx, cy, side), mean +- 6 sigma per axis.
TiltedMoments boxGridOracle(const FactorKind& kind, const std::vector<Message>& in,
                            int target, int gridN = 301);

// Dense grids over (child, branch); branch integrals are one-dimensional.
TiltedMoments gateGridOracle(const FactorKind& kind, const std::vector<Message>& in,
                             int target, int gridN = 2001);

// Tilted moments implied by the implementation: message times incoming.
TiltedMoments impliedTiltedMoments(const Message& message, const Message& incoming);

// Closed-form posterior of the 3-layer linear-Gaussian chain
// x = w + b + noise, by direct conjugate algebra.
struct ChainPosterior {
  double wMean, wVar;
  double bMean, bVar;
  double zMean, zVar;
};
ChainPosterior chainClosedForm(double wMean, double wVar, double bMean, double bVar,
                               double noiseVar, double x);

// Algebraic circle fit (Kasa least squares) on a set of 2-d points.
struct CircleFit {
  Eigen::Vector2d center;
  double radius;
};
CircleFit kasaCircleFit(const std::vector<Eigen::Vector2d>& points);

// Randomized quadrature-vs-grid suites (narrow-message regime, where a fixed
// Gauss-Hermite rule is an accurate integrator). Returns the worst relative
// moment error across `instances` random draws.
struct OracleReport {
  std::string name;
  double maxRelativeError = 0;
  int instances = 0;
  bool pass = false;
};

OracleReport checkRotationOracle(int instances, double tol, std::uint64_t seed,
                                 int gridN = 1201);
OracleReport checkBoxOracle(int instances, double tol, std::uint64_t seed,
                            int gridN = 301);
OracleReport checkGateOracle(int instances, double tol, std::uint64_t seed,
                             int gridN = 2001);

}  // namespace conmp

#endif  // CONMP_VALIDATE_HPP
