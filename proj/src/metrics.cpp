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

#include "conmp/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace conmp {

namespace {

std::string pix(const char* base, int i, int j) {
  return std::string(base) + "[" + std::to_string(i) + "][" + std::to_string(j) + "]";
}

const Message& need(const std::map<std::string, Message>& beliefs,
                    const std::string& id) {
  auto it = beliefs.find(id);
  if (it == beliefs.end()) {
    throw std::invalid_argument("computeMetrics: missing tracked variable " + id);
  }
  return it->second;
}

}  // namespace

std::vector<std::string> trackedVariables(const ModelSpec& spec) {
  std::vector<std::string> ids;
  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, CircleSpec>) {
          ids = {"c", "r"};
        } else if constexpr (std::is_same_v<T, SquareSpec>) {
          ids = {"c", "l", "fg", "bg"};
        } else if constexpr (std::is_same_v<T, FaceSpec>) {
          ids.push_back("l");
          for (int i = 0; i < s.height; ++i) {
            for (int j = 0; j < s.width; ++j) ids.push_back(pix("r", i, j));
          }
        } else {
          ids = {"w", "b", "z"};
        }
      },
      spec);
  return ids;
}

std::vector<std::string> metricNames(const ModelSpec& spec) {
  if (std::holds_alternative<CircleSpec>(spec)) return {"centerError", "radiusError"};
  if (std::holds_alternative<SquareSpec>(spec)) {
    return {"centerError", "sideLengthError", "fgError", "bgError"};
  }
  if (std::holds_alternative<FaceSpec>(spec)) {
    return {"lightAngleError", "reflectanceRmse"};
  }
  return {"wError"};
}

std::map<std::string, double> computeMetrics(
    const ModelSpec& spec, const std::map<std::string, Message>& beliefs,
    const std::map<std::string, Eigen::VectorXd>& truth) {
  std::map<std::string, double> out;
  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, CircleSpec>) {
          out["centerError"] =
              (meanVectorOf(need(beliefs, "c")) - truth.at("c")).norm();
          out["radiusError"] =
              std::abs(meanOf(need(beliefs, "r")) - truth.at("r")(0));
        } else if constexpr (std::is_same_v<T, SquareSpec>) {
          out["centerError"] =
              (meanVectorOf(need(beliefs, "c")) - truth.at("c")).norm();
          out["sideLengthError"] =
              std::abs(meanOf(need(beliefs, "l")) - truth.at("l")(0));
          out["fgError"] = std::abs(meanOf(need(beliefs, "fg")) - truth.at("fg")(0));
          out["bgError"] = std::abs(meanOf(need(beliefs, "bg")) - truth.at("bg")(0));
        } else if constexpr (std::is_same_v<T, FaceSpec>) {
          Eigen::VectorXd est = meanVectorOf(need(beliefs, "l"));
          Eigen::VectorXd ref = truth.at("l");
          const double dn = est.norm() * ref.norm();
          const double cosang = dn > 0 ? std::clamp(est.dot(ref) / dn, -1.0, 1.0) : 0.0;
          out["lightAngleError"] = std::acos(cosang);
          double sq = 0;
          int count = 0;
          for (int i = 0; i < s.height; ++i) {
            for (int j = 0; j < s.width; ++j) {
              const std::string id = pix("r", i, j);
              const double d = meanOf(need(beliefs, id)) - truth.at(id)(0);
              sq += d * d;
              ++count;
            }
          }
          out["reflectanceRmse"] = std::sqrt(sq / count);
        } else {
          out["wError"] = std::abs(meanOf(need(beliefs, "w")) - truth.at("w")(0));
        }
      },
      spec);
  return out;
}

}  // namespace conmp
