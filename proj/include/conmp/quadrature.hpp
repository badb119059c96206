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

#ifndef CONMP_QUADRATURE_HPP
#define CONMP_QUADRATURE_HPP

#include <Eigen/Dense>

namespace conmp {

struct QuadratureSpec {
  int nodesPerDim = 9;  // >= 3
};

// Gauss-Hermite rule adapted to a Gaussian base measure: for x ~ N(mean, var),
// E[f(x)] ~= sum_i weight(i) * f(node(i)), with weights summing to one.
// Nodes/weights come from the Golub-Welsch eigendecomposition of the Jacobi
// matrix; rules are cached per node count.
class GaussHermite {
 public:
  explicit GaussHermite(int n);

  int size() const { return static_cast<int>(nodes_.size()); }
  // Node/weight pair after the change of variables to N(mean, var).
  double node(int i, double mean, double var) const;
  double weight(int i) const { return weights_(i); }

  const Eigen::VectorXd& rawNodes() const { return nodes_; }

  static const GaussHermite& cached(int n);

 private:
  Eigen::VectorXd nodes_;    // physicists' nodes (weight exp(-x^2))
  Eigen::VectorXd weights_;  // normalized so they sum to one
};

}  // namespace conmp

#endif  // CONMP_QUADRATURE_HPP
