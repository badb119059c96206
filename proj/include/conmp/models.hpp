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

#ifndef CONMP_MODELS_HPP
#define CONMP_MODELS_HPP

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "conmp/graph.hpp"

namespace conmp {

// Points on a circle: (0, r) rotated by a_i, translated by c, observed with
// axis-wise Gaussian noise.
struct CircleSpec {
  int n = 10;
  double noiseVar = 0.01;
  Eigen::Vector2d centerPriorMean{0.0, 0.0};
  double centerPriorVar = 1.0;
  double radiusPriorMean = 1.0;
  double radiusPriorVar = 0.0625;
  double anglePriorVar = 100.0;  // wide pseudo-uniform over radians
  double rotationNoiseVar = 0.01;
};

// A square of colour fg on a bg background; per-pixel membership switches a
// gate between the two colours.
struct SquareSpec {
  int width = 16;
  int height = 16;
  double noiseVar = 1e-4;
  double gateVar = 1e-4;
  double edgeWidth = 0.05;
  Eigen::Vector2d centerPriorMean{8.0, 8.0};
  double centerPriorVar = 16.0;  // (width/4)^2
  double sidePriorMean = 8.0;    // width/2
  double sidePriorVar = 4.0;     // (width/8)^2
  // Identical broad colour priors: which colour is the square is a priori
  // ambiguous, as in the sampled images.
  double fgPriorMean = 0.5;
  double bgPriorMean = 0.5;
  double colourPriorVar = 0.0625;

  static SquareSpec withSize(int w, int h);
};

// Lambertian faces: x = (n . l) * r + noise, with a soft symmetry prior on
// mirrored reflectance pairs.
struct FaceSpec {
  int width = 16;
  int height = 16;
  double noiseVar = 1e-4;
  double factorNoiseVar = 1e-4;  // augmentation for the product/inner factors
  double symmetryVar = 0.01;
  double reflPriorMean = 0.5;
  double reflPriorVar = 0.04;
  double normalPriorVar = 0.01;
  Eigen::Vector3d lightPriorMean{0.0, 0.0, 1.0};
  double lightPriorVar = 0.25;
  // Per-pixel normal prior means follow a dome over the image; a spatially
  // constant prior leaves the lateral light components unidentifiable.
  bool domeNormalPrior = true;
};

// Linear-Gaussian chain used for engine validation: x = w + b + noise.
struct ChainSpec {
  double wPriorMean = 0.0;
  double wPriorVar = 1.0;
  double bPriorMean = 0.5;
  double bPriorVar = 2.0;
  double noiseVar = 0.1;
};

using ModelSpec = std::variant<CircleSpec, SquareSpec, FaceSpec, ChainSpec>;

const char* modelName(const ModelSpec& spec);

// Expands plates, assigns layers, and attaches the model's predictors.
// Deterministic: identical specs produce identical id orderings.
FactorGraph buildGraph(const ModelSpec& spec);

struct SampleResult {
  std::map<std::string, Eigen::VectorXd> latents;
  std::map<std::string, Eigen::VectorXd> observations;
};

SampleResult sampleModel(const ModelSpec& spec, std::uint64_t seed);

// Per-pixel normal prior mean used by both the face sampler and graph builder.
Eigen::Vector3d faceNormalPriorMean(const FaceSpec& spec, int row, int col);

struct FeatureVector {
  Eigen::VectorXd tree;  // split space
  Eigen::VectorXd reg;   // leaf-model input
};

class ContextFeaturizer {
 public:
  virtual ~ContextFeaturizer() = default;
  virtual FeatureVector features(const std::vector<Message>& context,
                                 const std::string& targetId) const = 0;
  // Split candidates test equality of two random context positions instead of
  // axis thresholds (the square colour predictors).
  virtual bool pairEqualityCandidates() const { return false; }
};

// Featurizer ids: circle-center, square-colour, square-side, face-reflectance,
// face-light.
std::shared_ptr<const ContextFeaturizer> makeFeaturizer(const std::string& id,
                                                        const ModelSpec& spec);

}  // namespace conmp

#endif  // CONMP_MODELS_HPP
