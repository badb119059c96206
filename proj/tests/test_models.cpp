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

#include <cmath>

#include "conmp/models.hpp"

using namespace conmp;

namespace {

std::string pix(const char* base, int i, int j) {
  return std::string(base) + "[" + std::to_string(i) + "][" + std::to_string(j) + "]";
}

}  // namespace

TEST_CASE("circle sampler composes rotation, translation and noise") {
  CircleSpec spec;
  spec.noiseVar = 1e-18;
  SampleResult s = sampleModel(ModelSpec(spec), 5);
  const Eigen::Vector2d c = s.latents.at("c");
  const double r = s.latents.at("r")(0);
  for (int i = 0; i < spec.n; ++i) {
    const double a = s.latents.at("a[" + std::to_string(i) + "]")(0);
    const Eigen::Vector2d x = s.observations.at("x[" + std::to_string(i) + "]");
    CHECK(x(0) == doctest::Approx(r * std::sin(a) + c(0)).epsilon(1e-6));
    CHECK(x(1) == doctest::Approx(r * std::cos(a) + c(1)).epsilon(1e-6));
  }
}

TEST_CASE("circle points lie near the circle (monte carlo)") {
  CircleSpec spec;
  int total = 0, violations = 0;
  const double bound = 3 * std::sqrt(spec.noiseVar) * std::numbers::sqrt2;
  for (int d = 0; d < 1000; ++d) {
    SampleResult s = sampleModel(ModelSpec(spec), 10000 + d);
    const Eigen::Vector2d c = s.latents.at("c");
    const double r = s.latents.at("r")(0);
    for (int i = 0; i < spec.n; ++i) {
      const Eigen::Vector2d x = s.observations.at("x[" + std::to_string(i) + "]");
      ++total;
      if (std::abs((x - c).norm() - r) > bound) ++violations;
    }
  }
  CHECK(violations < total / 100);
}

TEST_CASE("samplers are seed-deterministic") {
  for (ModelSpec spec :
       {ModelSpec(CircleSpec{}), ModelSpec(SquareSpec::withSize(8, 8)),
        ModelSpec(FaceSpec{8, 8}), ModelSpec(ChainSpec{})}) {
    SampleResult a = sampleModel(spec, 77);
    SampleResult b = sampleModel(spec, 77);
    REQUIRE(a.observations.size() == b.observations.size());
    for (const auto& [id, v] : a.observations) {
      CHECK((v - b.observations.at(id)).lpNorm<Eigen::Infinity>() == 0.0);
    }
    SampleResult c = sampleModel(spec, 78);
    bool anyDiff = false;
    for (const auto& [id, v] : c.observations) {
      if ((v - a.observations.at(id)).lpNorm<Eigen::Infinity>() > 0) anyDiff = true;
    }
    CHECK(anyDiff);
  }
}

TEST_CASE("square sampler") {
  SquareSpec spec = SquareSpec::withSize(16, 16);
  SUBCASE("pixels inside the box carry the foreground colour") {
    spec.noiseVar = 1e-18;
    SampleResult s = sampleModel(ModelSpec(spec), 3);
    const double fg = s.latents.at("fg")(0);
    const double bg = s.latents.at("bg")(0);
    for (int i = 0; i < 16; ++i) {
      for (int j = 0; j < 16; ++j) {
        const bool in = s.latents.at(pix("s", i, j))(0) > 0.5;
        const double x = s.observations.at(pix("x", i, j))(0);
        CHECK(x == doctest::Approx(in ? fg : bg).epsilon(1e-6));
      }
    }
  }
  SUBCASE("rasterized membership count approximates l^2") {
    for (int d = 0; d < 50; ++d) {
      SampleResult s = sampleModel(ModelSpec(spec), 500 + d);
      const Eigen::Vector2d c = s.latents.at("c");
      const double l = s.latents.at("l")(0);
      int count = 0, oracle = 0;
      for (int i = 0; i < 16; ++i) {
        for (int j = 0; j < 16; ++j) {
          if (s.latents.at(pix("s", i, j))(0) > 0.5) ++count;
          // Independent rasterization of the same box.
          const double px = j + 0.5, py = i + 0.5;
          if (std::abs(px - c(0)) <= l / 2 && std::abs(py - c(1)) <= l / 2) ++oracle;
        }
      }
      CHECK(count == oracle);
      // Boxes clipped by the image border lose up to their clipped area.
      const double visible = std::max(0.0, std::min(16.0, c(0) + l / 2) - std::max(0.0, c(0) - l / 2)) *
                             std::max(0.0, std::min(16.0, c(1) + l / 2) - std::max(0.0, c(1) - l / 2));
      CHECK(std::abs(count - visible) <= 2 * (l + 1));
    }
  }
}

TEST_CASE("face sampler satisfies the generative equation without noise") {
  FaceSpec spec;
  spec.width = spec.height = 8;
  spec.noiseVar = 1e-18;
  SampleResult s = sampleModel(ModelSpec(spec), 9);
  const Eigen::Vector3d l = s.latents.at("l");
  for (int i = 0; i < 8; ++i) {
    for (int j = 0; j < 8; ++j) {
      const Eigen::Vector3d n = s.latents.at(pix("n", i, j));
      const double r = s.latents.at(pix("r", i, j))(0);
      const double x = s.observations.at(pix("x", i, j))(0);
      CHECK(n.norm() == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(x == doctest::Approx(n.dot(l) * r).epsilon(1e-6));
    }
  }
}

TEST_CASE("mirrored reflectance pairs are correlated at the symmetry scale") {
  FaceSpec spec;
  spec.width = spec.height = 8;
  double sq = 0;
  int count = 0;
  for (int d = 0; d < 400; ++d) {
    SampleResult s = sampleModel(ModelSpec(spec), 900 + d);
    for (int i = 0; i < 8; ++i) {
      for (int j = 0; j < 4; ++j) {
        const double diff =
            s.latents.at(pix("r", i, j))(0) - s.latents.at(pix("r", i, 7 - j))(0);
        sq += diff * diff;
        ++count;
      }
    }
  }
  CHECK(sq / count == doctest::Approx(spec.symmetryVar).epsilon(0.08));
}

TEST_CASE("circle center featurizer") {
  CircleSpec spec;
  ModelSpec ms(spec);
  auto feat = makeFeaturizer("circle-center", ms);
  auto contextAt = [&](const Eigen::Vector2d& center, double radius) {
    std::vector<Message> ctx;
    for (int i = 0; i < 10; ++i) {
      const double a = 2 * std::numbers::pi * i / 10;
      Eigen::Vector2d p = center + radius * Eigen::Vector2d(std::sin(a), std::cos(a));
      ctx.push_back(MvGaussian::fromMeanCovariance(p, 0.01 * Eigen::Matrix2d::Identity()));
    }
    return ctx;
  };
  SUBCASE("centroid features recover an exact circle's center") {
    FeatureVector f = feat->features(contextAt({0.3, -0.2}, 1.0), "c");
    CHECK(f.reg(0) == doctest::Approx(0.3).epsilon(1e-9));
    CHECK(f.reg(1) == doctest::Approx(-0.2).epsilon(1e-9));
  }
  SUBCASE("translation equivariance") {
    FeatureVector f0 = feat->features(contextAt({0, 0}, 1.0), "c");
    FeatureVector f1 = feat->features(contextAt({2.5, -1.5}, 1.0), "c");
    CHECK(f1.reg(0) - f0.reg(0) == doctest::Approx(2.5).epsilon(1e-9));
    CHECK(f1.reg(1) - f0.reg(1) == doctest::Approx(-1.5).epsilon(1e-9));
    // Spread features are translation invariant.
    CHECK(f1.tree(2) == doctest::Approx(f0.tree(2)).epsilon(1e-9));
    CHECK(f1.tree(8) == doctest::Approx(f0.tree(8)).epsilon(1e-9));
  }
}

TEST_CASE("square featurizers") {
  ModelSpec ms(SquareSpec::withSize(16, 16));
  SUBCASE("uniform image gives equal colour clusters") {
    auto feat = makeFeaturizer("square-colour", ms);
    std::vector<Message> ctx(256, Message(Gaussian::fromMeanVariance(0.4, 0.01)));
    FeatureVector f = feat->features(ctx, "fg");
    CHECK(f.reg(0) == doctest::Approx(f.reg(1)).epsilon(1e-12));
    CHECK(f.reg(0) == doctest::Approx(0.4).epsilon(1e-12));
  }
  SUBCASE("exact segmentation of an l x l square gives sqrt(M) = l") {
    auto feat = makeFeaturizer("square-side", ms);
    std::vector<Message> ctx(256, Message(Bernoulli::fromProbability(0.0)));
    const int l = 6;
    for (int i = 4; i < 4 + l; ++i) {
      for (int j = 5; j < 5 + l; ++j) {
        ctx[i * 16 + j] = Bernoulli::fromProbability(1.0);
      }
    }
    FeatureVector f = feat->features(ctx, "l");
    CHECK(f.tree(0) == doctest::Approx(36.0));
    CHECK(f.tree(1) == doctest::Approx(6.0));
    CHECK(f.tree(2) == doctest::Approx(6.0));
    CHECK(f.tree(3) == doctest::Approx(6.0));
  }
}

TEST_CASE("face featurizers") {
  FaceSpec spec;
  ModelSpec ms(spec);
  SUBCASE("constant shading map fills every block with that constant") {
    auto feat = makeFeaturizer("face-light", ms);
    std::vector<Message> ctx(256, Message(Gaussian::fromMeanVariance(0.7, 0.01)));
    FeatureVector f = feat->features(ctx, "l");
    REQUIRE(f.tree.size() == 16);  // 4x4 block grid at desk scale
    for (int k = 0; k < 16; ++k) CHECK(f.tree(k) == doctest::Approx(0.7).epsilon(1e-12));
  }
  SUBCASE("reflectance features carry pixel coordinates and patch stats") {
    auto feat = makeFeaturizer("face-reflectance", ms);
    std::vector<Message> ctx(256, Message(Gaussian::fromMeanVariance(0.5, 0.01)));
    FeatureVector f = feat->features(ctx, "r[3][7]");
    CHECK(f.tree(0) == doctest::Approx(7.0));
    CHECK(f.tree(1) == doctest::Approx(3.0));
    CHECK(f.tree(3) == doctest::Approx(0.5).epsilon(1e-12));  // patch mean
    CHECK(f.tree.allFinite());
    CHECK(f.reg.allFinite());
  }
}

TEST_CASE("featurizers are total on proper contexts") {
  CircleSpec spec;
  ModelSpec ms(spec);
  auto feat = makeFeaturizer("circle-center", ms);
  std::vector<Message> ctx;
  for (int i = 0; i < 10; ++i) {
    ctx.push_back(MvGaussian::fromMeanCovariance(
        Eigen::Vector2d(1e6 * (i % 2 ? 1 : -1), 1e-9),
        1e-8 * Eigen::Matrix2d::Identity()));
  }
  FeatureVector f = feat->features(ctx, "c");
  CHECK(f.tree.allFinite());
  CHECK(f.reg.allFinite());
}

TEST_CASE("face normal prior mean forms a unit-norm dome") {
  FaceSpec spec;
  for (int i : {0, 8, 15}) {
    for (int j : {0, 8, 15}) {
      const Eigen::Vector3d n = faceNormalPriorMean(spec, i, j);
      CHECK(n.norm() == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(n(2) > 0);
    }
  }
  // Tilts outward: left edge points left, right edge right.
  CHECK(faceNormalPriorMean(spec, 8, 0)(0) < 0);
  CHECK(faceNormalPriorMean(spec, 8, 15)(0) > 0);
}
