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

#include "conmp/serialize.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace conmp {

Json toJson(const Eigen::VectorXd& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Json toJson(const Eigen::MatrixXd& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::VectorXd vectorFromJson(const Json& j) {
  Eigen::VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v(i) = j[i].get<double>();
  return v;
}

Eigen::MatrixXd matrixFromJson(const Json& j) {
  const std::size_t rows = j.size();
  const std::size_t cols = rows == 0 ? 0 : j[0].size();
  Eigen::MatrixXd m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t k = 0; k < cols; ++k) m(i, k) = j[i][k].get<double>();
  }
  return m;
}

namespace {

Json logOddsToJson(double lo) {
  if (std::isinf(lo)) return lo > 0 ? Json("+inf") : Json("-inf");
  return Json(lo);
}

double logOddsFromJson(const Json& j) {
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "+inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    throw std::invalid_argument("bad logOdds value: " + s);
  }
  return j.get<double>();
}

}  // namespace

Json toJson(const Message& m) {
  Json j;
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Gaussian>) {
          j["family"] = "gaussian";
          j["eta1"] = v.eta1;
          j["eta2"] = v.eta2;
        } else if constexpr (std::is_same_v<T, MvGaussian>) {
          j["family"] = "mvgaussian";
          j["h"] = toJson(v.h);
          j["K"] = toJson(v.K);
        } else if constexpr (std::is_same_v<T, Bernoulli>) {
          j["family"] = "bernoulli";
          j["logOdds"] = logOddsToJson(v.logOdds);
        } else {
          j["family"] = "pointmass";
          j["location"] = toJson(v.location);
        }
      },
      m);
  return j;
}

Message messageFromJson(const Json& j) {
  const std::string fam = j.at("family").get<std::string>();
  if (fam == "gaussian") {
    return Gaussian{j.at("eta1").get<double>(), j.at("eta2").get<double>()};
  }
  if (fam == "mvgaussian") {
    MvGaussian g;
    g.h = vectorFromJson(j.at("h"));
    g.K = matrixFromJson(j.at("K"));
    if (g.K.rows() != g.h.size() || g.K.cols() != g.h.size()) {
      throw std::invalid_argument("mvgaussian: inconsistent dimensions");
    }
    return g;
  }
  if (fam == "bernoulli") {
    return Bernoulli{logOddsFromJson(j.at("logOdds"))};
  }
  if (fam == "pointmass") {
    return PointMass{vectorFromJson(j.at("location"))};
  }
  throw std::invalid_argument("unknown message family: " + fam);
}

Json toJson(const ModelSpec& spec) {
  Json j;
  j["model"] = modelName(spec);
  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, CircleSpec>) {
          j["n"] = s.n;
          j["noiseVar"] = s.noiseVar;
          j["centerPriorMean"] = toJson(Eigen::VectorXd(s.centerPriorMean));
          j["centerPriorVar"] = s.centerPriorVar;
          j["radiusPriorMean"] = s.radiusPriorMean;
          j["radiusPriorVar"] = s.radiusPriorVar;
          j["anglePriorVar"] = s.anglePriorVar;
          j["rotationNoiseVar"] = s.rotationNoiseVar;
        } else if constexpr (std::is_same_v<T, SquareSpec>) {
          j["width"] = s.width;
          j["height"] = s.height;
          j["noiseVar"] = s.noiseVar;
          j["gateVar"] = s.gateVar;
          j["edgeWidth"] = s.edgeWidth;
          j["centerPriorMean"] = toJson(Eigen::VectorXd(s.centerPriorMean));
          j["centerPriorVar"] = s.centerPriorVar;
          j["sidePriorMean"] = s.sidePriorMean;
          j["sidePriorVar"] = s.sidePriorVar;
          j["fgPriorMean"] = s.fgPriorMean;
          j["bgPriorMean"] = s.bgPriorMean;
          j["colourPriorVar"] = s.colourPriorVar;
        } else if constexpr (std::is_same_v<T, FaceSpec>) {
          j["width"] = s.width;
          j["height"] = s.height;
          j["noiseVar"] = s.noiseVar;
          j["factorNoiseVar"] = s.factorNoiseVar;
          j["symmetryVar"] = s.symmetryVar;
          j["reflPriorMean"] = s.reflPriorMean;
          j["reflPriorVar"] = s.reflPriorVar;
          j["normalPriorVar"] = s.normalPriorVar;
          j["lightPriorMean"] = toJson(Eigen::VectorXd(s.lightPriorMean));
          j["lightPriorVar"] = s.lightPriorVar;
          j["domeNormalPrior"] = s.domeNormalPrior;
        } else {
          j["wPriorMean"] = s.wPriorMean;
          j["wPriorVar"] = s.wPriorVar;
          j["bPriorMean"] = s.bPriorMean;
          j["bPriorVar"] = s.bPriorVar;
          j["noiseVar"] = s.noiseVar;
        }
      },
      spec);
  return j;
}

namespace {

template <typename T>
void maybe(const Json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void maybeVec2(const Json& j, const char* key, Eigen::Vector2d& out) {
  if (j.contains(key)) out = vectorFromJson(j.at(key));
}
void maybeVec3(const Json& j, const char* key, Eigen::Vector3d& out) {
  if (j.contains(key)) out = vectorFromJson(j.at(key));
}

}  // namespace

ModelSpec modelSpecFromJson(const Json& j) {
  const std::string name = j.at("model").get<std::string>();
  if (name == "circle") {
    CircleSpec s;
    maybe(j, "n", s.n);
    maybe(j, "noiseVar", s.noiseVar);
    maybeVec2(j, "centerPriorMean", s.centerPriorMean);
    maybe(j, "centerPriorVar", s.centerPriorVar);
    maybe(j, "radiusPriorMean", s.radiusPriorMean);
    maybe(j, "radiusPriorVar", s.radiusPriorVar);
    maybe(j, "anglePriorVar", s.anglePriorVar);
    maybe(j, "rotationNoiseVar", s.rotationNoiseVar);
    return s;
  }
  if (name == "square") {
    int w = 16, h = 16;
    maybe(j, "width", w);
    maybe(j, "height", h);
    SquareSpec s = SquareSpec::withSize(w, h);
    maybe(j, "noiseVar", s.noiseVar);
    maybe(j, "gateVar", s.gateVar);
    maybe(j, "edgeWidth", s.edgeWidth);
    maybeVec2(j, "centerPriorMean", s.centerPriorMean);
    maybe(j, "centerPriorVar", s.centerPriorVar);
    maybe(j, "sidePriorMean", s.sidePriorMean);
    maybe(j, "sidePriorVar", s.sidePriorVar);
    maybe(j, "fgPriorMean", s.fgPriorMean);
    maybe(j, "bgPriorMean", s.bgPriorMean);
    maybe(j, "colourPriorVar", s.colourPriorVar);
    return s;
  }
  if (name == "face") {
    FaceSpec s;
    maybe(j, "width", s.width);
    maybe(j, "height", s.height);
    maybe(j, "noiseVar", s.noiseVar);
    maybe(j, "factorNoiseVar", s.factorNoiseVar);
    maybe(j, "symmetryVar", s.symmetryVar);
    maybe(j, "reflPriorMean", s.reflPriorMean);
    maybe(j, "reflPriorVar", s.reflPriorVar);
    maybe(j, "normalPriorVar", s.normalPriorVar);
    maybeVec3(j, "lightPriorMean", s.lightPriorMean);
    maybe(j, "lightPriorVar", s.lightPriorVar);
    maybe(j, "domeNormalPrior", s.domeNormalPrior);
    return s;
  }
  if (name == "chain") {
    ChainSpec s;
    maybe(j, "wPriorMean", s.wPriorMean);
    maybe(j, "wPriorVar", s.wPriorVar);
    maybe(j, "bPriorMean", s.bPriorMean);
    maybe(j, "bPriorVar", s.bPriorVar);
    maybe(j, "noiseVar", s.noiseVar);
    return s;
  }
  throw std::invalid_argument("unknown model: " + name);
}

Json graphToJson(const FactorGraph& g) {
  Json j;
  Json vars = Json::array();
  for (const auto& v : g.variables) {
    Json jv;
    jv["id"] = v.id;
    jv["family"] = familyName(v.family);
    jv["dim"] = v.dim;
    jv["layer"] = v.layer;
    jv["global"] = v.isGlobal;
    vars.push_back(std::move(jv));
  }
  j["variables"] = std::move(vars);
  Json factors = Json::array();
  for (const auto& f : g.factors) {
    Json jf;
    jf["id"] = f.id;
    jf["kind"] = factorTypeName(f.kind.type);
    Json edges = Json::array();
    for (std::size_t s = 0; s < f.edges.size(); ++s) {
      Json e;
      e["var"] = g.variables[f.edges[s]].id;
      e["role"] = f.roles.size() > s ? f.roles[s] : "";
      edges.push_back(std::move(e));
    }
    jf["edges"] = std::move(edges);
    factors.push_back(std::move(jf));
  }
  j["factors"] = std::move(factors);
  return j;
}

std::string sampleToJsonLine(std::uint64_t seed, const SampleResult& sample) {
  Json j;
  j["seed"] = seed;
  Json lat = Json::object();
  for (const auto& [id, v] : sample.latents) lat[id] = toJson(v);
  Json obs = Json::object();
  for (const auto& [id, v] : sample.observations) obs[id] = toJson(v);
  j["latents"] = std::move(lat);
  j["observations"] = std::move(obs);
  return j.dump();
}

std::pair<std::uint64_t, SampleResult> sampleFromJsonLine(const std::string& line) {
  const Json j = Json::parse(line);
  SampleResult sample;
  for (const auto& [id, v] : j.at("latents").items()) {
    sample.latents[id] = vectorFromJson(v);
  }
  for (const auto& [id, v] : j.at("observations").items()) {
    sample.observations[id] = vectorFromJson(v);
  }
  return {j.at("seed").get<std::uint64_t>(), std::move(sample)};
}

void writePgm(const std::string& path, const Eigen::MatrixXd& image, double lo,
              double hi) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "P5\n" << image.cols() << " " << image.rows() << "\n255\n";
  for (Eigen::Index i = 0; i < image.rows(); ++i) {
    for (Eigen::Index j = 0; j < image.cols(); ++j) {
      const double t = (image(i, j) - lo) / (hi - lo);
      const int v = std::clamp(static_cast<int>(std::lround(t * 255.0)), 0, 255);
      out.put(static_cast<char>(v));
    }
  }
}

}  // namespace conmp
