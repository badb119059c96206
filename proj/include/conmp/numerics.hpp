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

#ifndef CONMP_NUMERICS_HPP
#define CONMP_NUMERICS_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

namespace conmp {

inline constexpr double kLogTwoPi = 1.8378770664093454835606594728112;

inline double logistic(double x) {
  if (x >= 0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double logit(double p) {
  if (p <= 0.0) return -std::numeric_limits<double>::infinity();
  if (p >= 1.0) return std::numeric_limits<double>::infinity();
  return std::log(p) - std::log1p(-p);
}

inline double logGaussianPdf(double x, double mean, double variance) {
  const double d = x - mean;
  return -0.5 * (kLogTwoPi + std::log(variance) + d * d / variance);
}

inline double normalPdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

inline double normalCdf(double x) {
  return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

// E[phi((x - b)/w)] and the first two raw moments of x * phi((x - b)/w)
// for x ~ N(mu, sigma2), phi the standard normal CDF. Closed forms from
// the Gaussian-smoothed probit identity; used by the box-membership factor.
struct SmoothedStepMoments {
  double mass;     // E[phi]
  double first;    // E[x phi]
  double second;   // E[x^2 phi]
};

inline SmoothedStepMoments gaussianStepMoments(double mu, double sigma2, double b,
                                               double w) {
  const double s2 = sigma2 + w * w;
  const double s = std::sqrt(s2);
  const double t = (mu - b) / s;
  const double cdf = normalCdf(t);
  const double pdf = normalPdf(t);
  SmoothedStepMoments m;
  m.mass = cdf;
  m.first = mu * cdf + (sigma2 / s) * pdf;
  m.second = (mu * mu + sigma2) * cdf + (2.0 * mu * sigma2 / s) * pdf -
             (sigma2 * sigma2 / s2) * t * pdf;
  return m;
}

inline double logSumExp(const std::vector<double>& xs) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double x : xs) mx = std::max(mx, x);
  if (!std::isfinite(mx)) return mx;
  double acc = 0.0;
  for (double x : xs) acc += std::exp(x - mx);
  return mx + std::log(acc);
}

// splitmix64; used to derive independent per-problem RNG streams.
inline std::uint64_t mixSeed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Orders structured ids ("z[2]" < "z[10]") by comparing digit runs numerically.
inline bool naturalLess(const std::string& a, const std::string& b) {
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (std::isdigit(static_cast<unsigned char>(a[i])) &&
        std::isdigit(static_cast<unsigned char>(b[j]))) {
      std::size_t i2 = i, j2 = j;
      while (i2 < a.size() && std::isdigit(static_cast<unsigned char>(a[i2]))) ++i2;
      while (j2 < b.size() && std::isdigit(static_cast<unsigned char>(b[j2]))) ++j2;
      const unsigned long long va = std::stoull(a.substr(i, i2 - i));
      const unsigned long long vb = std::stoull(b.substr(j, j2 - j));
      if (va != vb) return va < vb;
      i = i2;
      j = j2;
    } else {
      if (a[i] != b[j]) return a[i] < b[j];
      ++i;
      ++j;
    }
  }
  return a.size() < b.size();
}

}  // namespace conmp

#endif  // CONMP_NUMERICS_HPP
