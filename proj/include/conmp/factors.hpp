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

#ifndef CONMP_FACTORS_HPP
#define CONMP_FACTORS_HPP

#include <string>
#include <vector>

#include "conmp/message.hpp"
#include "conmp/quadrature.hpp"

namespace conmp {

enum class InferenceMode { VMP, EP };

enum class FactorType {
  GaussianNoise,   // child = parent + N(0, v I)
  Sum,             // sum = a + b (exact linear-Gaussian)
  Rotation,        // point = radius * (sin angle, cos angle), noise-augmented
  Gate,            // child = switch ? fg : bg, internal variance
  BoxMembership,   // switch = [pixel inside square(center, side)], smoothed
  InnerProduct,    // out = dot(n, l), noise-augmented
  Product,         // out = s * r, noise-augmented
  SoftSymmetry,    // N(a - signs.*b; 0, v I)
  Prior,           // constant unary message
};

const char* factorTypeName(FactorType t);
FactorType factorTypeFromName(const std::string& name);

struct FactorKind {
  FactorType type = FactorType::Prior;
  // GaussianNoise/SoftSymmetry: factor variance. Gate: internal branch
  // variance. Rotation/InnerProduct/Product: noise augmentation variance.
  double variance = 1e-4;
  Message prior = Gaussian::uniform();   // Prior only
  Eigen::Vector2d pixel{0, 0};           // BoxMembership: pixel position
  double edgeWidth = 0.05;               // BoxMembership: edge smoothing, pixels
  Eigen::VectorXd signs;                 // SoftSymmetry: mirror signs, empty = +1

  static FactorKind gaussianNoise(double v);
  static FactorKind sum();
  static FactorKind rotation(double noiseVar = 1e-4);
  static FactorKind gate(double branchVar = 1e-4);
  static FactorKind boxMembership(const Eigen::Vector2d& pixel, double edgeWidth = 0.05);
  static FactorKind innerProduct(double noiseVar = 1e-4);
  static FactorKind product(double noiseVar = 1e-4);
  static FactorKind softSymmetry(double v, const Eigen::VectorXd& signs = {});
  static FactorKind priorOn(const Message& m);
};

// Edge slot layout per factor type (order is part of the schedule contract):
//   GaussianNoise: 0 child, 1 parent
//   Sum:           0 sum, 1 a, 2 b
//   Rotation:      0 point(2), 1 angle, 2 radius
//   Gate:          0 child, 1 switch, 2 fg, 3 bg
//   BoxMembership: 0 switch, 1 center(2), 2 side
//   InnerProduct:  0 out, 1 n(3), 2 l(3)
//   Product:       0 out, 1 s, 2 r
//   SoftSymmetry:  0 a, 1 b
//   Prior:         0 v
int factorEdgeCount(FactorType t);

// True when the factor's update consumes full variable beliefs (variational
// updates); false when it consumes cavity messages (sum-product/EP updates).
// Linear-Gaussian factors always use cavities: their messages are exact.
bool factorUsesBeliefs(FactorType t, InferenceMode mode);

struct FactorResult {
  Message msg = Gaussian::uniform();
  bool skip = false;        // inputs unusable; caller should retain the old message
  std::string note;         // diagnostic flag (zero mass, jitter, fallback)
};

// Message from a factor to edge `target`, given messages on all edges.
// `in[target]` is the incoming message on the target edge itself (used by the
// EP quotient); the remaining slots are cavities or beliefs per
// factorUsesBeliefs().
FactorResult factorMessage(const FactorKind& kind, InferenceMode mode,
                           const QuadratureSpec& quad,
                           const std::vector<Message>& in, int target);

}  // namespace conmp

#endif  // CONMP_FACTORS_HPP
