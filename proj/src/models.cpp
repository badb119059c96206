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

#include "conmp/models.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "conmp/numerics.hpp"

namespace conmp {

namespace {

std::string idx1(const std::string& base, int i) {
  return base + "[" + std::to_string(i) + "]";
}
std::string idx2(const std::string& base, int i, int j) {
  return base + "[" + std::to_string(i) + "][" + std::to_string(j) + "]";
}

Message isotropicPrior(const Eigen::VectorXd& mean, double varPerAxis) {
  return MvGaussian::fromMeanCovariance(
      mean, varPerAxis * Eigen::MatrixXd::Identity(mean.size(), mean.size()));
}

int addVariable(FactorGraph& g, std::string id, Family f, Eigen::Index dim, int layer,
                bool global = false) {
  VariableNode v;
  v.id = std::move(id);
  v.family = f;
  v.dim = dim;
  v.layer = layer;
  v.isGlobal = global;
  g.variables.push_back(std::move(v));
  return static_cast<int>(g.variables.size() - 1);
}

void addFactor(FactorGraph& g, std::string id, FactorKind kind, std::vector<int> edges,
               std::vector<std::string> roles) {
  FactorNode f;
  f.id = std::move(id);
  f.kind = std::move(kind);
  f.edges = std::move(edges);
  f.roles = std::move(roles);
  g.factors.push_back(std::move(f));
}

// Pixel (row, col) center in image coordinates (x right, y down).
Eigen::Vector2d pixelCenter(int row, int col) {
  return {col + 0.5, row + 0.5};
}

FactorGraph buildCircle(const CircleSpec& spec) {
  if (spec.n < 3) throw std::invalid_argument("circle: need at least 3 points");
  FactorGraph g;
  const int c = addVariable(g, "c", Family::MvGaussian, 2, 2, true);
  const int r = addVariable(g, "r", Family::Gaussian, 1, 3, true);
  addFactor(g, "prior_c", FactorKind::priorOn(isotropicPrior(spec.centerPriorMean,
                                                             spec.centerPriorVar)),
            {c}, {"v"});
  addFactor(g, "prior_r",
            FactorKind::priorOn(Gaussian::fromMeanVariance(spec.radiusPriorMean,
                                                           spec.radiusPriorVar)),
            {r}, {"v"});
  for (int i = 0; i < spec.n; ++i) {
    const int x = addVariable(g, idx1("x", i), Family::MvGaussian, 2, 0);
    const int z = addVariable(g, idx1("z", i), Family::MvGaussian, 2, 1);
    const int p = addVariable(g, idx1("p", i), Family::MvGaussian, 2, 2);
    const int a = addVariable(g, idx1("a", i), Family::Gaussian, 1, 3);
    addFactor(g, idx1("noise", i), FactorKind::gaussianNoise(spec.noiseVar), {x, z},
              {"child", "parent"});
    addFactor(g, idx1("sum", i), FactorKind::sum(), {z, p, c}, {"sum", "a", "b"});
    addFactor(g, idx1("rot", i), FactorKind::rotation(spec.rotationNoiseVar), {p, a, r},
              {"point", "angle", "radius"});
    addFactor(g, idx1("prior_a", i),
              FactorKind::priorOn(Gaussian::fromMeanVariance(0.0, spec.anglePriorVar)),
              {a}, {"v"});
  }

  PredictorAttachment att;
  att.name = "center";
  att.targets = {"c"};
  for (int i = 0; i < spec.n; ++i) att.contextIds.push_back(idx1("z", i));
  att.featurizerId = "circle-center";
  att.stage = 1;
  att.outputFamily = Family::MvGaussian;
  att.outputDim = 2;
  g.predictors.push_back(std::move(att));

  g.finalize();
  return g;
}

FactorGraph buildSquare(const SquareSpec& spec) {
  FactorGraph g;
  const int c = addVariable(g, "c", Family::MvGaussian, 2, 3, true);
  const int l = addVariable(g, "l", Family::Gaussian, 1, 3, true);
  const int fg = addVariable(g, "fg", Family::Gaussian, 1, 2, true);
  const int bg = addVariable(g, "bg", Family::Gaussian, 1, 2, true);
  addFactor(g, "prior_c", FactorKind::priorOn(isotropicPrior(spec.centerPriorMean,
                                                             spec.centerPriorVar)),
            {c}, {"v"});
  addFactor(g, "prior_l",
            FactorKind::priorOn(Gaussian::fromMeanVariance(spec.sidePriorMean,
                                                           spec.sidePriorVar)),
            {l}, {"v"});
  addFactor(g, "prior_fg",
            FactorKind::priorOn(Gaussian::fromMeanVariance(spec.fgPriorMean,
                                                           spec.colourPriorVar)),
            {fg}, {"v"});
  addFactor(g, "prior_bg",
            FactorKind::priorOn(Gaussian::fromMeanVariance(spec.bgPriorMean,
                                                           spec.colourPriorVar)),
            {bg}, {"v"});
  for (int i = 0; i < spec.height; ++i) {
    for (int j = 0; j < spec.width; ++j) {
      const int x = addVariable(g, idx2("x", i, j), Family::Gaussian, 1, 0);
      const int z = addVariable(g, idx2("z", i, j), Family::Gaussian, 1, 1);
      const int s = addVariable(g, idx2("s", i, j), Family::Bernoulli, 1, 2);
      addFactor(g, idx2("noise", i, j), FactorKind::gaussianNoise(spec.noiseVar),
                {x, z}, {"child", "parent"});
      addFactor(g, idx2("gate", i, j), FactorKind::gate(spec.gateVar), {z, s, fg, bg},
                {"child", "switch", "fg", "bg"});
      addFactor(g, idx2("box", i, j),
                FactorKind::boxMembership(pixelCenter(i, j), spec.edgeWidth), {s, c, l},
                {"switch", "center", "side"});
    }
  }

  auto attach = [&](const std::string& name, const std::string& target,
                    const std::string& featurizer, const std::string& ctxBase,
                    int stage) {
    PredictorAttachment att;
    att.name = name;
    att.targets = {target};
    for (int i = 0; i < spec.height; ++i) {
      for (int j = 0; j < spec.width; ++j) {
        att.contextIds.push_back(idx2(ctxBase, i, j));
      }
    }
    att.featurizerId = featurizer;
    att.stage = stage;
    att.outputFamily = target == "c" ? Family::MvGaussian : Family::Gaussian;
    att.outputDim = target == "c" ? 2 : 1;
    g.predictors.push_back(std::move(att));
  };
  attach("fg", "fg", "square-colour", "z", 1);
  attach("bg", "bg", "square-colour", "z", 1);
  attach("side", "l", "square-side", "s", 2);

  g.finalize();
  return g;
}

FactorGraph buildFace(const FaceSpec& spec) {
  if (spec.width % 2 != 0) {
    throw std::invalid_argument("face: width must be even for mirror pairing");
  }
  FactorGraph g;
  const int l = addVariable(g, "l", Family::MvGaussian, 3, 3, true);
  addFactor(g, "prior_l",
            FactorKind::priorOn(isotropicPrior(spec.lightPriorMean, spec.lightPriorVar)),
            {l}, {"v"});
  std::vector<std::vector<int>> rIdx(spec.height, std::vector<int>(spec.width));
  for (int i = 0; i < spec.height; ++i) {
    for (int j = 0; j < spec.width; ++j) {
      const int x = addVariable(g, idx2("x", i, j), Family::Gaussian, 1, 0);
      const int z = addVariable(g, idx2("z", i, j), Family::Gaussian, 1, 1);
      const int r = addVariable(g, idx2("r", i, j), Family::Gaussian, 1, 2);
      const int s = addVariable(g, idx2("s", i, j), Family::Gaussian, 1, 2);
      const int n = addVariable(g, idx2("n", i, j), Family::MvGaussian, 3, 3);
      rIdx[i][j] = r;
      addFactor(g, idx2("noise", i, j), FactorKind::gaussianNoise(spec.noiseVar),
                {x, z}, {"child", "parent"});
      addFactor(g, idx2("prod", i, j), FactorKind::product(spec.factorNoiseVar),
                {z, s, r}, {"out", "s", "r"});
      addFactor(g, idx2("inner", i, j), FactorKind::innerProduct(spec.factorNoiseVar),
                {s, n, l}, {"out", "n", "l"});
      addFactor(g, idx2("prior_r", i, j),
                FactorKind::priorOn(Gaussian::fromMeanVariance(spec.reflPriorMean,
                                                               spec.reflPriorVar)),
                {r}, {"v"});
      addFactor(g, idx2("prior_n", i, j),
                FactorKind::priorOn(isotropicPrior(faceNormalPriorMean(spec, i, j),
                                                   spec.normalPriorVar)),
                {n}, {"v"});
    }
  }
  for (int i = 0; i < spec.height; ++i) {
    for (int j = 0; j < spec.width / 2; ++j) {
      addFactor(g, idx2("sym", i, j), FactorKind::softSymmetry(spec.symmetryVar),
                {rIdx[i][j], rIdx[i][spec.width - 1 - j]}, {"a", "b"});
    }
  }

  PredictorAttachment refl;
  refl.name = "reflectance";
  refl.typeB = true;
  for (int i = 0; i < spec.height; ++i) {
    for (int j = 0; j < spec.width; ++j) {
      refl.targets.push_back(idx2("r", i, j));
      refl.contextIds.push_back(idx2("z", i, j));
    }
  }
  refl.featurizerId = "face-reflectance";
  refl.stage = 1;
  refl.outputFamily = Family::Gaussian;
  refl.outputDim = 1;
  g.predictors.push_back(std::move(refl));

  PredictorAttachment light;
  light.name = "light";
  light.targets = {"l"};
  for (int i = 0; i < spec.height; ++i) {
    for (int j = 0; j < spec.width; ++j) {
      light.contextIds.push_back(idx2("s", i, j));
    }
  }
  light.featurizerId = "face-light";
  light.stage = 2;
  light.outputFamily = Family::MvGaussian;
  light.outputDim = 3;
  g.predictors.push_back(std::move(light));

  g.finalize();
  return g;
}

FactorGraph buildChain(const ChainSpec& spec) {
  FactorGraph g;
  const int x = addVariable(g, "x", Family::Gaussian, 1, 0);
  const int z = addVariable(g, "z", Family::Gaussian, 1, 1);
  const int w = addVariable(g, "w", Family::Gaussian, 1, 2, true);
  const int b = addVariable(g, "b", Family::Gaussian, 1, 2);
  addFactor(g, "noise", FactorKind::gaussianNoise(spec.noiseVar), {x, z},
            {"child", "parent"});
  addFactor(g, "sum", FactorKind::sum(), {z, w, b}, {"sum", "a", "b"});
  addFactor(g, "prior_w",
            FactorKind::priorOn(Gaussian::fromMeanVariance(spec.wPriorMean, spec.wPriorVar)),
            {w}, {"v"});
  addFactor(g, "prior_b",
            FactorKind::priorOn(Gaussian::fromMeanVariance(spec.bPriorMean, spec.bPriorVar)),
            {b}, {"v"});
  g.finalize();
  return g;
}

// ---------------------------------------------------------------------------
// Samplers. All seed-deterministic through a dedicated mt19937_64 stream.

Eigen::VectorXd vec2(double x, double y) {
  Eigen::VectorXd v(2);
  v << x, y;
  return v;
}
Eigen::VectorXd vec1(double x) {
  return Eigen::VectorXd::Constant(1, x);
}

SampleResult sampleCircle(const CircleSpec& spec, std::uint64_t seed) {
  std::mt19937_64 rng(mixSeed(seed, 0xc1));
  std::normal_distribution<double> unit(0.0, 1.0);
  SampleResult out;

  const double cx = spec.centerPriorMean(0) + std::sqrt(spec.centerPriorVar) * unit(rng);
  const double cy = spec.centerPriorMean(1) + std::sqrt(spec.centerPriorVar) * unit(rng);
  double radius = 0.0;
  int attempts = 0;
  do {
    radius = spec.radiusPriorMean + std::sqrt(spec.radiusPriorVar) * unit(rng);
    if (++attempts > 100) throw std::runtime_error("circle sampler: radius redraws exhausted");
  } while (radius <= 0.0);

  out.latents["c"] = vec2(cx, cy);
  out.latents["r"] = vec1(radius);
  for (int i = 0; i < spec.n; ++i) {
    const double a = std::sqrt(spec.anglePriorVar) * unit(rng);
    const double px = radius * std::sin(a);
    const double py = radius * std::cos(a);
    const double zx = px + cx;
    const double zy = py + cy;
    out.latents[idx1("a", i)] = vec1(a);
    out.latents[idx1("p", i)] = vec2(px, py);
    out.latents[idx1("z", i)] = vec2(zx, zy);
    out.observations[idx1("x", i)] =
        vec2(zx + std::sqrt(spec.noiseVar) * unit(rng),
             zy + std::sqrt(spec.noiseVar) * unit(rng));
  }
  return out;
}

SampleResult sampleSquare(const SquareSpec& spec, std::uint64_t seed) {
  std::mt19937_64 rng(mixSeed(seed, 0x54));
  std::normal_distribution<double> unit(0.0, 1.0);
  SampleResult out;

  double cx = 0, cy = 0, side = 0;
  int attempts = 0;
  for (;;) {
    cx = spec.centerPriorMean(0) + std::sqrt(spec.centerPriorVar) * unit(rng);
    cy = spec.centerPriorMean(1) + std::sqrt(spec.centerPriorVar) * unit(rng);
    side = spec.sidePriorMean + std::sqrt(spec.sidePriorVar) * unit(rng);
    const bool inside = side > 1.0 && cx + side / 2 > 0 && cx - side / 2 < spec.width &&
                        cy + side / 2 > 0 && cy - side / 2 < spec.height;
    if (inside) break;
    if (++attempts > 200) throw std::runtime_error("square sampler: redraws exhausted");
  }
  const double fg = spec.fgPriorMean + std::sqrt(spec.colourPriorVar) * unit(rng);
  const double bg = spec.bgPriorMean + std::sqrt(spec.colourPriorVar) * unit(rng);

  out.latents["c"] = vec2(cx, cy);
  out.latents["l"] = vec1(side);
  out.latents["fg"] = vec1(fg);
  out.latents["bg"] = vec1(bg);
  for (int i = 0; i < spec.height; ++i) {
    for (int j = 0; j < spec.width; ++j) {
      const Eigen::Vector2d p = pixelCenter(i, j);
      const bool in = std::abs(p(0) - cx) <= side / 2 && std::abs(p(1) - cy) <= side / 2;
      const double z = in ? fg : bg;
      out.latents[idx2("s", i, j)] = vec1(in ? 1.0 : 0.0);
      out.latents[idx2("z", i, j)] = vec1(z);
      out.observations[idx2("x", i, j)] =
          vec1(z + std::sqrt(spec.noiseVar) * unit(rng));
    }
  }
  return out;
}

SampleResult sampleFace(const FaceSpec& spec, std::uint64_t seed) {
  std::mt19937_64 rng(mixSeed(seed, 0xfa));
  std::normal_distribution<double> unit(0.0, 1.0);
  SampleResult out;

  Eigen::Vector3d light;
  for (int k = 0; k < 3; ++k) {
    light(k) = spec.lightPriorMean(k) + std::sqrt(spec.lightPriorVar) * unit(rng);
  }
  out.latents["l"] = light;

  // Mirrored reflectance pairs: shared component plus a difference with
  // variance symmetryVar, keeping the marginal at reflPriorVar.
  const double sharedVar = std::max(spec.reflPriorVar - spec.symmetryVar / 4.0, 1e-6);
  std::vector<std::vector<double>> refl(spec.height, std::vector<double>(spec.width));
  for (int i = 0; i < spec.height; ++i) {
    for (int j = 0; j < spec.width / 2; ++j) {
      const double m = spec.reflPriorMean + std::sqrt(sharedVar) * unit(rng);
      const double d = std::sqrt(spec.symmetryVar) * unit(rng);
      refl[i][j] = m + d / 2;
      refl[i][spec.width - 1 - j] = m - d / 2;
    }
  }

  for (int i = 0; i < spec.height; ++i) {
    for (int j = 0; j < spec.width; ++j) {
      Eigen::Vector3d n = faceNormalPriorMean(spec, i, j);
      for (int k = 0; k < 3; ++k) n(k) += std::sqrt(spec.normalPriorVar) * unit(rng);
      n.normalize();
      const double r = refl[i][j];
      const double s = n.dot(light);
      const double z = s * r;
      out.latents[idx2("n", i, j)] = n;
      out.latents[idx2("r", i, j)] = vec1(r);
      out.latents[idx2("s", i, j)] = vec1(s);
      out.latents[idx2("z", i, j)] = vec1(z);
      out.observations[idx2("x", i, j)] =
          vec1(z + std::sqrt(spec.noiseVar) * unit(rng));
    }
  }
  return out;
}

SampleResult sampleChain(const ChainSpec& spec, std::uint64_t seed) {
  std::mt19937_64 rng(mixSeed(seed, 0xcc));
  std::normal_distribution<double> unit(0.0, 1.0);
  SampleResult out;
  const double w = spec.wPriorMean + std::sqrt(spec.wPriorVar) * unit(rng);
  const double b = spec.bPriorMean + std::sqrt(spec.bPriorVar) * unit(rng);
  const double z = w + b;
  out.latents["w"] = vec1(w);
  out.latents["b"] = vec1(b);
  out.latents["z"] = vec1(z);
  out.observations["x"] = vec1(z + std::sqrt(spec.noiseVar) * unit(rng));
  return out;
}

// ---------------------------------------------------------------------------
// Featurizers.

struct GridShape {
  int height = 0;
  int width = 0;
};

std::pair<int, int> parseGridId(const std::string& id) {
  const auto a = id.find('[');
  const auto b = id.find(']', a);
  const auto c = id.find('[', b);
  const auto d = id.find(']', c);
  if (a == std::string::npos || d == std::string::npos) {
    throw std::invalid_argument("not a grid id: " + id);
  }
  return {std::stoi(id.substr(a + 1, b - a - 1)), std::stoi(id.substr(c + 1, d - c - 1))};
}

class CircleCenterFeaturizer : public ContextFeaturizer {
 public:
  FeatureVector features(const std::vector<Message>& context,
                         const std::string&) const override {
    const int n = static_cast<int>(context.size());
    Eigen::MatrixXd means(n, 2);
    double meanVar = 0;
    for (int i = 0; i < n; ++i) {
      means.row(i) = meanVectorOf(context[i]).transpose();
      const Eigen::MatrixXd cov = covarianceOf(context[i]);
      meanVar += std::isfinite(cov(0, 0)) ? cov.trace() / 2.0 : 0.0;
    }
    meanVar /= n;
    const Eigen::RowVector2d centroid = means.colwise().mean();
    Eigen::MatrixXd centered = means.rowwise() - centroid;
    Eigen::Matrix2d scatter = centered.transpose() * centered / n;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(scatter);

    FeatureVector f;
    f.tree.resize(9);
    f.tree << centroid(0), centroid(1), es.eigenvalues()(1), es.eigenvalues()(0),
        means.col(0).minCoeff(), means.col(0).maxCoeff(), means.col(1).minCoeff(),
        means.col(1).maxCoeff(), meanVar;
    f.reg.resize(2);
    f.reg << centroid(0), centroid(1);
    return f;
  }
};

class SquareColourFeaturizer : public ContextFeaturizer {
 public:
  explicit SquareColourFeaturizer(GridShape shape) : shape_(shape) {}

  // Pair-equality splits see colour agreement, not which cluster is the
  // square, so the leaf regression also gets border-ring and central-block
  // means; under the centered box prior the ring is almost surely background.
  FeatureVector features(const std::vector<Message>& context,
                         const std::string&) const override {
    const int n = static_cast<int>(context.size());
    FeatureVector f;
    f.tree.resize(n);
    for (int i = 0; i < n; ++i) f.tree(i) = meanOf(context[i]);
    std::vector<double> sorted(f.tree.data(), f.tree.data() + n);
    std::sort(sorted.begin(), sorted.end());
    const int q = std::max(1, n / 4);
    double low = 0, high = 0;
    for (int i = 0; i < q; ++i) {
      low += sorted[i];
      high += sorted[n - 1 - i];
    }
    double border = 0, center = 0;
    int borderCount = 0, centerCount = 0;
    for (int i = 0; i < shape_.height; ++i) {
      for (int j = 0; j < shape_.width; ++j) {
        const double v = f.tree(i * shape_.width + j);
        if (i == 0 || j == 0 || i == shape_.height - 1 || j == shape_.width - 1) {
          border += v;
          ++borderCount;
        }
        if (std::abs(2 * i + 1 - shape_.height) <= 2 &&
            std::abs(2 * j + 1 - shape_.width) <= 2) {
          center += v;
          ++centerCount;
        }
      }
    }
    f.reg.resize(4);
    f.reg << low / q, high / q, border / std::max(1, borderCount),
        center / std::max(1, centerCount);
    return f;
  }
  bool pairEqualityCandidates() const override { return true; }

 private:
  GridShape shape_;
};

class SquareSideFeaturizer : public ContextFeaturizer {
 public:
  explicit SquareSideFeaturizer(GridShape shape) : shape_(shape) {}

  FeatureVector features(const std::vector<Message>& context,
                         const std::string&) const override {
    Eigen::VectorXd rows = Eigen::VectorXd::Zero(shape_.height);
    Eigen::VectorXd cols = Eigen::VectorXd::Zero(shape_.width);
    double mass = 0;
    for (int i = 0; i < shape_.height; ++i) {
      for (int j = 0; j < shape_.width; ++j) {
        const double p = std::get<Bernoulli>(context[i * shape_.width + j]).probability();
        mass += p;
        rows(i) += p;
        cols(j) += p;
      }
    }
    auto span = [](const Eigen::VectorXd& m) {
      const double peak = m.maxCoeff();
      if (peak <= 0) return 0.0;
      double count = 0;
      for (int i = 0; i < m.size(); ++i) {
        if (m(i) >= 0.5 * peak) count += 1;
      }
      return count;
    };
    FeatureVector f;
    f.tree.resize(4);
    f.tree << mass, std::sqrt(std::max(mass, 0.0)), span(rows), span(cols);
    f.reg = f.tree;
    return f;
  }

 private:
  GridShape shape_;
};

class FaceReflectanceFeaturizer : public ContextFeaturizer {
 public:
  explicit FaceReflectanceFeaturizer(GridShape shape) : shape_(shape) {
    patchHalf_ = std::max(1, std::min(10, (std::min(shape.width, shape.height) + 2) / 8));
  }

  FeatureVector features(const std::vector<Message>& context,
                         const std::string& targetId) const override {
    const auto [ti, tj] = parseGridId(targetId);
    std::vector<double> patch;
    double ownMean = meanOf(context[ti * shape_.width + tj]);
    for (int di = -patchHalf_; di <= patchHalf_; ++di) {
      for (int dj = -patchHalf_; dj <= patchHalf_; ++dj) {
        const int i = ti + di;
        const int j = tj + dj;
        if (i < 0 || i >= shape_.height || j < 0 || j >= shape_.width) continue;
        patch.push_back(meanOf(context[i * shape_.width + j]));
      }
    }
    std::sort(patch.begin(), patch.end());
    const int m = static_cast<int>(patch.size());
    double mean = 0, sq = 0;
    for (double v : patch) {
      mean += v;
      sq += v * v;
    }
    mean /= m;
    const double sd = std::sqrt(std::max(sq / m - mean * mean, 0.0));
    const double median = m % 2 == 1 ? patch[m / 2] : 0.5 * (patch[m / 2 - 1] + patch[m / 2]);
    auto at = [&](int i, int j) {
      i = std::clamp(i, 0, shape_.height - 1);
      j = std::clamp(j, 0, shape_.width - 1);
      return meanOf(context[i * shape_.width + j]);
    };
    const double gradX = (at(ti, tj + 1) - at(ti, tj - 1)) / 2.0;
    const double gradY = (at(ti + 1, tj) - at(ti - 1, tj)) / 2.0;

    FeatureVector f;
    f.tree.resize(10);
    f.tree << tj, ti, ownMean, mean, median, patch.front(), patch.back(), gradX, gradY, sd;
    f.reg.resize(3);
    f.reg << ownMean, mean, median;
    return f;
  }

 private:
  GridShape shape_;
  int patchHalf_;
};

class FaceLightFeaturizer : public ContextFeaturizer {
 public:
  explicit FaceLightFeaturizer(GridShape shape) : shape_(shape) {
    gridRows_ = std::min(12, std::max(1, shape.height / 4));
    gridCols_ = std::min(12, std::max(1, shape.width / 4));
  }

  FeatureVector features(const std::vector<Message>& context,
                         const std::string&) const override {
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(gridRows_, gridCols_);
    Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(gridRows_, gridCols_);
    for (int i = 0; i < shape_.height; ++i) {
      for (int j = 0; j < shape_.width; ++j) {
        const int bi = std::min(gridRows_ - 1, i * gridRows_ / shape_.height);
        const int bj = std::min(gridCols_ - 1, j * gridCols_ / shape_.width);
        sums(bi, bj) += meanOf(context[i * shape_.width + j]);
        counts(bi, bj) += 1;
      }
    }
    FeatureVector f;
    f.tree.resize(gridRows_ * gridCols_);
    for (int bi = 0; bi < gridRows_; ++bi) {
      for (int bj = 0; bj < gridCols_; ++bj) {
        f.tree(bi * gridCols_ + bj) = sums(bi, bj) / std::max(1.0, counts(bi, bj));
      }
    }
    f.reg = f.tree;
    return f;
  }

 private:
  GridShape shape_;
  int gridRows_;
  int gridCols_;
};

}  // namespace

SquareSpec SquareSpec::withSize(int w, int h) {
  SquareSpec s;
  s.width = w;
  s.height = h;
  s.centerPriorMean = Eigen::Vector2d(w / 2.0, h / 2.0);
  s.centerPriorVar = (w / 4.0) * (w / 4.0);
  s.sidePriorMean = w / 2.0;
  s.sidePriorVar = (w / 8.0) * (w / 8.0);
  return s;
}

const char* modelName(const ModelSpec& spec) {
  if (std::holds_alternative<CircleSpec>(spec)) return "circle";
  if (std::holds_alternative<SquareSpec>(spec)) return "square";
  if (std::holds_alternative<FaceSpec>(spec)) return "face";
  return "chain";
}

FactorGraph buildGraph(const ModelSpec& spec) {
  return std::visit(
      [](const auto& s) -> FactorGraph {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, CircleSpec>) return buildCircle(s);
        else if constexpr (std::is_same_v<T, SquareSpec>) return buildSquare(s);
        else if constexpr (std::is_same_v<T, FaceSpec>) return buildFace(s);
        else return buildChain(s);
      },
      spec);
}

SampleResult sampleModel(const ModelSpec& spec, std::uint64_t seed) {
  return std::visit(
      [&](const auto& s) -> SampleResult {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, CircleSpec>) return sampleCircle(s, seed);
        else if constexpr (std::is_same_v<T, SquareSpec>) return sampleSquare(s, seed);
        else if constexpr (std::is_same_v<T, FaceSpec>) return sampleFace(s, seed);
        else return sampleChain(s, seed);
      },
      spec);
}

Eigen::Vector3d faceNormalPriorMean(const FaceSpec& spec, int row, int col) {
  if (!spec.domeNormalPrior) return {0.0, 0.0, 1.0};
  const double cx = spec.width / 2.0;
  const double cy = spec.height / 2.0;
  const double radius = std::max(cx, cy);
  const double nx = 0.6 * (col + 0.5 - cx) / radius;
  const double ny = 0.6 * (row + 0.5 - cy) / radius;
  const double nz = std::sqrt(std::max(0.1, 1.0 - nx * nx - ny * ny));
  Eigen::Vector3d n(nx, ny, nz);
  n.normalize();
  return n;
}

std::shared_ptr<const ContextFeaturizer> makeFeaturizer(const std::string& id,
                                                        const ModelSpec& spec) {
  if (id == "circle-center") {
    return std::make_shared<CircleCenterFeaturizer>();
  }
  if (id == "square-colour" || id == "square-side") {
    const auto& s = std::get<SquareSpec>(spec);
    GridShape shape{s.height, s.width};
    if (id == "square-colour") return std::make_shared<SquareColourFeaturizer>(shape);
    return std::make_shared<SquareSideFeaturizer>(shape);
  }
  if (id == "face-reflectance" || id == "face-light") {
    const auto& s = std::get<FaceSpec>(spec);
    GridShape shape{s.height, s.width};
    if (id == "face-reflectance") return std::make_shared<FaceReflectanceFeaturizer>(shape);
    return std::make_shared<FaceLightFeaturizer>(shape);
  }
  throw std::invalid_argument("unknown featurizer: " + id);
}

}  // namespace conmp
