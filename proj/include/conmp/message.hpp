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

#ifndef CONMP_MESSAGE_HPP
#define CONMP_MESSAGE_HPP

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "conmp/numerics.hpp"

namespace conmp {

// Exponential-family messages in natural parameters. Products and quotients
// (the hot path of message passing) are parameter additions/subtractions;
// moment forms are derived on demand.

enum class Family { Gaussian, MvGaussian, Bernoulli, PointMass };

inline const char* familyName(Family f) {
  switch (f) {
    case Family::Gaussian: return "gaussian";
    case Family::MvGaussian: return "mvgaussian";
    case Family::Bernoulli: return "bernoulli";
    case Family::PointMass: return "pointmass";
  }
  return "?";
}

// Gaussians collapse to point masses below this variance.
inline constexpr double kPointMassVariance = 1e-12;
// Precisions more negative than this are rejected by multiply().
inline constexpr double kPrecisionSlack = -1e-10;

template <typename Scalar>
struct GaussianT {
  Scalar eta1{0};  // precision * mean
  Scalar eta2{0};  // -precision / 2

  Scalar precision() const { return -2 * eta2; }
  bool isUniform() const { return eta1 == Scalar(0) && eta2 == Scalar(0); }
  bool isProper() const { return precision() > Scalar(0); }
  Scalar mean() const { return eta1 / precision(); }
  Scalar variance() const { return Scalar(1) / precision(); }

  static GaussianT fromMeanVariance(Scalar mean, Scalar variance) {
    if (!(variance > Scalar(0))) {
      throw std::invalid_argument("Gaussian variance must be positive");
    }
    return GaussianT{mean / variance, Scalar(-0.5) / variance};
  }
  static GaussianT uniform() { return GaussianT{}; }
};

template <typename Scalar>
struct MvGaussianT {
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  Vec h;  // K * mean
  Mat K;  // precision matrix

  Eigen::Index dim() const { return h.size(); }
  bool isUniform() const { return h.isZero(0) && K.isZero(0); }
  bool isProper() const {
    Eigen::LDLT<Mat> ldlt(K);
    return ldlt.info() == Eigen::Success && ldlt.isPositive() &&
           K.diagonal().minCoeff() > Scalar(0);
  }
  Vec mean() const { return K.ldlt().solve(h); }
  Mat covariance() const {
    return K.ldlt().solve(Mat::Identity(dim(), dim()));
  }

  static MvGaussianT fromMeanCovariance(const Vec& mean, const Mat& cov) {
    Eigen::LDLT<Mat> ldlt(cov);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
      throw std::invalid_argument("MvGaussian covariance must be PSD");
    }
    MvGaussianT g;
    g.K = ldlt.solve(Mat::Identity(mean.size(), mean.size()));
    g.K = ((g.K + g.K.transpose()) / Scalar(2)).eval();
    g.h = g.K * mean;
    return g;
  }
  static MvGaussianT uniform(Eigen::Index d) {
    MvGaussianT g;
    g.h = Vec::Zero(d);
    g.K = Mat::Zero(d, d);
    return g;
  }
};

template <typename Scalar>
struct BernoulliT {
  Scalar logOdds{0};  // +-inf encodes a point mass on {1, 0}

  Scalar probability() const { return Scalar(logistic(double(logOdds))); }
  static BernoulliT fromProbability(Scalar p) {
    return BernoulliT{Scalar(logit(double(p)))};
  }
};

template <typename Scalar>
struct PointMassT {
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  Vec location;

  Eigen::Index dim() const { return location.size(); }
  static PointMassT at(Scalar x) {
    PointMassT p;
    p.location = Vec::Constant(1, x);
    return p;
  }
  static PointMassT at(const Vec& x) { return PointMassT{x}; }
};

template <typename Scalar>
using MessageT = std::variant<GaussianT<Scalar>, MvGaussianT<Scalar>,
                              BernoulliT<Scalar>, PointMassT<Scalar>>;

using Gaussian = GaussianT<double>;
using MvGaussian = MvGaussianT<double>;
using Bernoulli = BernoulliT<double>;
using PointMass = PointMassT<double>;
using Message = MessageT<double>;

// Moment vector of a message: first raw moment and, where defined, the raw
// second moment (scalar messages use a 1x1 matrix). Bernoulli carries only p.
template <typename Scalar>
struct MomentsT {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> first;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> second;
};
using Moments = MomentsT<double>;

template <typename Scalar>
Family family(const MessageT<Scalar>& m) {
  return std::visit(
      [](const auto& v) -> Family {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, GaussianT<Scalar>>) return Family::Gaussian;
        if constexpr (std::is_same_v<T, MvGaussianT<Scalar>>) return Family::MvGaussian;
        if constexpr (std::is_same_v<T, BernoulliT<Scalar>>) return Family::Bernoulli;
        return Family::PointMass;
      },
      m);
}

template <typename Scalar>
Eigen::Index messageDim(const MessageT<Scalar>& m) {
  return std::visit(
      [](const auto& v) -> Eigen::Index {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, MvGaussianT<Scalar>>) return v.dim();
        else if constexpr (std::is_same_v<T, PointMassT<Scalar>>) return v.dim();
        else return 1;
      },
      m);
}

template <typename Scalar>
bool isUniform(const MessageT<Scalar>& m) {
  if (const auto* g = std::get_if<GaussianT<Scalar>>(&m)) return g->isUniform();
  if (const auto* g = std::get_if<MvGaussianT<Scalar>>(&m)) return g->isUniform();
  return false;
}

// Proper = finite normalizable density, or a point mass.
template <typename Scalar>
bool isProper(const MessageT<Scalar>& m) {
  return std::visit(
      [](const auto& v) -> bool {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, GaussianT<Scalar>>) return v.isProper();
        else if constexpr (std::is_same_v<T, MvGaussianT<Scalar>>) return v.isProper();
        else return true;
      },
      m);
}

template <typename Scalar>
bool allFinite(const MessageT<Scalar>& m) {
  return std::visit(
      [](const auto& v) -> bool {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, GaussianT<Scalar>>)
          return std::isfinite(double(v.eta1)) && std::isfinite(double(v.eta2));
        else if constexpr (std::is_same_v<T, MvGaussianT<Scalar>>)
          return v.h.allFinite() && v.K.allFinite();
        else if constexpr (std::is_same_v<T, BernoulliT<Scalar>>)
          return !std::isnan(double(v.logOdds));
        else
          return v.location.allFinite();
      },
      m);
}

namespace detail {

template <typename Scalar>
[[noreturn]] void familyError(const char* op, const MessageT<Scalar>& a,
                              const MessageT<Scalar>& b) {
  throw std::invalid_argument(std::string(op) + ": family mismatch (" +
                              familyName(family(a)) + " vs " +
                              familyName(family(b)) + ")");
}

template <typename Scalar>
void checkSameDim(const char* op, const MessageT<Scalar>& a,
                  const MessageT<Scalar>& b) {
  if (messageDim(a) != messageDim(b)) {
    throw std::invalid_argument(std::string(op) + ": dimension mismatch");
  }
}

template <typename Scalar>
PointMassT<Scalar> mergePointMasses(const PointMassT<Scalar>& a,
                                    const PointMassT<Scalar>& b) {
  if (a.dim() != b.dim() || (a.location - b.location).template lpNorm<Eigen::Infinity>() > 1e-9) {
    throw std::invalid_argument("multiply: contradictory point masses");
  }
  return a;
}

}  // namespace detail

template <typename Scalar>
MessageT<Scalar> multiply(const MessageT<Scalar>& a, const MessageT<Scalar>& b) {
  using G = GaussianT<Scalar>;
  using MG = MvGaussianT<Scalar>;
  using B = BernoulliT<Scalar>;
  using PM = PointMassT<Scalar>;

  if (const auto* pa = std::get_if<PM>(&a)) {
    if (const auto* pb = std::get_if<PM>(&b)) return detail::mergePointMasses(*pa, *pb);
    if (std::holds_alternative<B>(b)) detail::familyError("multiply", a, b);
    detail::checkSameDim("multiply", a, b);
    return a;
  }
  if (std::holds_alternative<PM>(b)) return multiply(b, a);

  if (const auto* ga = std::get_if<G>(&a)) {
    const auto* gb = std::get_if<G>(&b);
    if (!gb) detail::familyError("multiply", a, b);
    G r{ga->eta1 + gb->eta1, ga->eta2 + gb->eta2};
    if (r.precision() < Scalar(kPrecisionSlack)) {
      throw std::invalid_argument("multiply: resulting Gaussian precision is negative");
    }
    return r;
  }
  if (const auto* ma = std::get_if<MG>(&a)) {
    const auto* mb = std::get_if<MG>(&b);
    if (!mb) detail::familyError("multiply", a, b);
    detail::checkSameDim("multiply", a, b);
    MG r;
    r.h = ma->h + mb->h;
    r.K = ma->K + mb->K;
    if (r.K.diagonal().minCoeff() < Scalar(kPrecisionSlack)) {
      throw std::invalid_argument("multiply: resulting MvGaussian precision is negative");
    }
    return r;
  }
  const auto& ba = std::get<B>(a);
  const auto* bb = std::get_if<B>(&b);
  if (!bb) detail::familyError("multiply", a, b);
  const Scalar lo = ba.logOdds + bb->logOdds;
  if (std::isnan(double(lo))) {
    throw std::invalid_argument("multiply: contradictory Bernoulli point masses");
  }
  return B{lo};
}

// Natural-parameter subtraction. May produce an improper (negative precision)
// Gaussian; EP cavity chains rely on that, so no properness check here.
template <typename Scalar>
MessageT<Scalar> divide(const MessageT<Scalar>& a, const MessageT<Scalar>& b) {
  using G = GaussianT<Scalar>;
  using MG = MvGaussianT<Scalar>;
  using B = BernoulliT<Scalar>;
  using PM = PointMassT<Scalar>;

  if (const auto* pa = std::get_if<PM>(&a)) {
    if (std::holds_alternative<PM>(b)) {
      throw std::invalid_argument("divide: point mass by point mass is undefined");
    }
    if (std::holds_alternative<B>(b)) detail::familyError("divide", a, b);
    detail::checkSameDim("divide", a, b);
    return *pa;
  }
  if (std::holds_alternative<PM>(b)) {
    throw std::invalid_argument("divide: cannot divide by a point mass");
  }

  if (const auto* ga = std::get_if<G>(&a)) {
    const auto* gb = std::get_if<G>(&b);
    if (!gb) detail::familyError("divide", a, b);
    return G{ga->eta1 - gb->eta1, ga->eta2 - gb->eta2};
  }
  if (const auto* ma = std::get_if<MG>(&a)) {
    const auto* mb = std::get_if<MG>(&b);
    if (!mb) detail::familyError("divide", a, b);
    detail::checkSameDim("divide", a, b);
    MG r;
    r.h = ma->h - mb->h;
    r.K = ma->K - mb->K;
    return r;
  }
  const auto& ba = std::get<B>(a);
  const auto* bb = std::get_if<B>(&b);
  if (!bb) detail::familyError("divide", a, b);
  const Scalar lo = ba.logOdds - bb->logOdds;
  if (std::isnan(double(lo))) {
    throw std::invalid_argument("divide: indeterminate Bernoulli quotient");
  }
  return B{lo};
}

template <typename Scalar>
MomentsT<Scalar> moments(const MessageT<Scalar>& m) {
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  MomentsT<Scalar> out;
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, GaussianT<Scalar>>) {
          if (!v.isProper()) {
            throw std::invalid_argument("moments: improper Gaussian has no moments");
          }
          const Scalar mean = v.mean();
          const Scalar var = v.variance();
          out.first = Vec::Constant(1, mean);
          out.second = Mat::Constant(1, 1, mean * mean + var);
        } else if constexpr (std::is_same_v<T, MvGaussianT<Scalar>>) {
          if (!v.isProper()) {
            throw std::invalid_argument("moments: improper MvGaussian has no moments");
          }
          const Vec mean = v.mean();
          const Mat cov = v.covariance();
          out.first = mean;
          out.second = cov + mean * mean.transpose();
        } else if constexpr (std::is_same_v<T, BernoulliT<Scalar>>) {
          out.first = Vec::Constant(1, v.probability());
          out.second = Mat();
        } else {
          out.first = v.location;
          out.second = v.location * v.location.transpose();
        }
      },
      m);
  return out;
}

template <typename Scalar>
MessageT<Scalar> fromMoments(Family f, const MomentsT<Scalar>& mo) {
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  switch (f) {
    case Family::Bernoulli: {
      Scalar p = mo.first(0);
      if (p < Scalar(-1e-12) || p > Scalar(1) + Scalar(1e-12)) {
        throw std::invalid_argument("fromMoments: Bernoulli p outside [0,1]");
      }
      p = std::min(Scalar(1), std::max(Scalar(0), p));
      return BernoulliT<Scalar>::fromProbability(p);
    }
    case Family::Gaussian:
    case Family::PointMass: {
      if (mo.first.size() != 1) {
        throw std::invalid_argument("fromMoments: scalar Gaussian needs 1-d moments");
      }
      const Scalar mean = mo.first(0);
      const Scalar var = mo.second(0, 0) - mean * mean;
      if (var < Scalar(-1e-10)) {
        throw std::invalid_argument("fromMoments: implied variance is negative");
      }
      if (var < Scalar(kPointMassVariance)) return PointMassT<Scalar>::at(mean);
      return GaussianT<Scalar>::fromMeanVariance(mean, var);
    }
    case Family::MvGaussian: {
      const Vec mean = mo.first;
      Mat cov = mo.second - mean * mean.transpose();
      cov = ((cov + cov.transpose()) / Scalar(2)).eval();
      Eigen::SelfAdjointEigenSolver<Mat> es(cov);
      if (es.eigenvalues().minCoeff() < Scalar(-1e-10)) {
        throw std::invalid_argument("fromMoments: implied covariance is indefinite");
      }
      if (es.eigenvalues().maxCoeff() < Scalar(kPointMassVariance)) {
        return PointMassT<Scalar>::at(mean);
      }
      Vec inv = es.eigenvalues();
      for (Eigen::Index i = 0; i < inv.size(); ++i) {
        inv(i) = Scalar(1) / std::max(inv(i), Scalar(kPointMassVariance));
      }
      MvGaussianT<Scalar> g;
      g.K = es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
      g.K = ((g.K + g.K.transpose()) / Scalar(2)).eval();
      g.h = g.K * mean;
      return g;
    }
  }
  throw std::invalid_argument("fromMoments: unknown family");
}

namespace detail {

// The fitted family momentAverage() solves for, given the member families.
template <typename Scalar>
Family ensembleFamily(const std::vector<MessageT<Scalar>>& ms) {
  bool anyBernoulli = false, anyVector = false, anyScalar = false;
  Eigen::Index d = -1;
  for (const auto& m : ms) {
    const Family f = family(m);
    if (f == Family::Bernoulli) {
      anyBernoulli = true;
    } else if (f == Family::MvGaussian ||
               (f == Family::PointMass && messageDim(m) > 1)) {
      anyVector = true;
    } else {
      anyScalar = true;
    }
    if (d < 0) d = messageDim(m);
    if (d != messageDim(m)) {
      throw std::invalid_argument("momentAverage: dimension mismatch");
    }
  }
  if (anyBernoulli && (anyVector || anyScalar)) {
    throw std::invalid_argument("momentAverage: family mismatch");
  }
  if (anyBernoulli) return Family::Bernoulli;
  if (anyVector && anyScalar) {
    throw std::invalid_argument("momentAverage: family mismatch");
  }
  return anyVector ? Family::MvGaussian : Family::Gaussian;
}

}  // namespace detail

// Ensemble combination: the moments of the result are the arithmetic mean of
// the member moments.
template <typename Scalar>
MessageT<Scalar> momentAverage(const std::vector<MessageT<Scalar>>& ms) {
  if (ms.empty()) {
    throw std::invalid_argument("momentAverage: empty list");
  }
  const Family target = detail::ensembleFamily(ms);
  MomentsT<Scalar> acc = moments(ms.front());
  for (std::size_t i = 1; i < ms.size(); ++i) {
    const MomentsT<Scalar> mi = moments(ms[i]);
    acc.first += mi.first;
    if (acc.second.size() > 0) acc.second += mi.second;
  }
  const Scalar n = Scalar(double(ms.size()));
  acc.first /= n;
  if (acc.second.size() > 0) acc.second /= n;
  return fromMoments(target, acc);
}

// Accumulates a product of messages checking properness only at the end, so
// that improper intermediates (from EP quotients) cannot abort a product whose
// final value is proper.
template <typename Scalar>
MessageT<Scalar> productOfMessages(const std::vector<const MessageT<Scalar>*>& parts,
                                   const MessageT<Scalar>* extra = nullptr) {
  using G = GaussianT<Scalar>;
  using MG = MvGaussianT<Scalar>;
  using B = BernoulliT<Scalar>;
  using PM = PointMassT<Scalar>;

  std::vector<const MessageT<Scalar>*> all = parts;
  if (extra) all.push_back(extra);
  if (all.empty()) throw std::invalid_argument("productOfMessages: empty");

  const PM* pm = nullptr;
  for (const auto* m : all) {
    if (const auto* p = std::get_if<PM>(m)) {
      if (pm) detail::mergePointMasses(*pm, *p);  // throws on contradiction
      pm = p;
    }
  }
  if (pm) return *pm;

  const Family f = family(*all.front());
  if (f == Family::Gaussian) {
    G r{};
    for (const auto* m : all) {
      const auto* g = std::get_if<G>(m);
      if (!g) detail::familyError("product", *all.front(), *m);
      r.eta1 += g->eta1;
      r.eta2 += g->eta2;
    }
    return r;
  }
  if (f == Family::MvGaussian) {
    const auto& first = std::get<MG>(*all.front());
    MG r = MG::uniform(first.dim());
    for (const auto* m : all) {
      const auto* g = std::get_if<MG>(m);
      if (!g) detail::familyError("product", *all.front(), *m);
      r.h += g->h;
      r.K += g->K;
    }
    return r;
  }
  B r{};
  for (const auto* m : all) {
    const auto* g = std::get_if<B>(m);
    if (!g) detail::familyError("product", *all.front(), *m);
    r.logOdds += g->logOdds;
  }
  return r;
}

// Convex combination in natural parameters: alpha * a + (1 - alpha) * b.
template <typename Scalar>
MessageT<Scalar> affineCombine(const MessageT<Scalar>& a, const MessageT<Scalar>& b,
                               Scalar alpha) {
  using G = GaussianT<Scalar>;
  using MG = MvGaussianT<Scalar>;
  using B = BernoulliT<Scalar>;
  using PM = PointMassT<Scalar>;

  if (std::holds_alternative<PM>(a) || std::holds_alternative<PM>(b)) {
    if (const auto* pa = std::get_if<PM>(&a)) {
      if (const auto* pb = std::get_if<PM>(&b)) {
        return detail::mergePointMasses(*pa, *pb);
      }
      if (alpha == Scalar(1)) return a;
    } else if (alpha == Scalar(0)) {
      return b;
    }
    throw std::invalid_argument("affineCombine: cannot interpolate a point mass");
  }
  if (const auto* ga = std::get_if<G>(&a)) {
    const auto* gb = std::get_if<G>(&b);
    if (!gb) detail::familyError("affineCombine", a, b);
    return G{alpha * ga->eta1 + (1 - alpha) * gb->eta1,
             alpha * ga->eta2 + (1 - alpha) * gb->eta2};
  }
  if (const auto* ma = std::get_if<MG>(&a)) {
    const auto* mb = std::get_if<MG>(&b);
    if (!mb) detail::familyError("affineCombine", a, b);
    detail::checkSameDim("affineCombine", a, b);
    MG r;
    r.h = alpha * ma->h + (1 - alpha) * mb->h;
    r.K = alpha * ma->K + (1 - alpha) * mb->K;
    return r;
  }
  const auto& ba = std::get<B>(a);
  const auto* bb = std::get_if<B>(&b);
  if (!bb) detail::familyError("affineCombine", a, b);
  return B{alpha * ba.logOdds + (1 - alpha) * bb->logOdds};
}

// Scalar-message views used throughout the factor library. Accept Gaussian or
// point mass; `uniform` maps to infinite variance.
template <typename Scalar>
Scalar meanOf(const MessageT<Scalar>& m) {
  if (const auto* g = std::get_if<GaussianT<Scalar>>(&m)) {
    if (g->isUniform()) return Scalar(0);
    return g->mean();
  }
  if (const auto* p = std::get_if<PointMassT<Scalar>>(&m)) {
    if (p->dim() != 1) throw std::invalid_argument("meanOf: not scalar");
    return p->location(0);
  }
  if (const auto* b = std::get_if<BernoulliT<Scalar>>(&m)) return b->probability();
  throw std::invalid_argument("meanOf: not a scalar message");
}

template <typename Scalar>
Scalar varianceOf(const MessageT<Scalar>& m) {
  if (const auto* g = std::get_if<GaussianT<Scalar>>(&m)) {
    if (g->isUniform()) return std::numeric_limits<Scalar>::infinity();
    return Scalar(1) / g->precision();  // negative for improper messages
  }
  if (const auto* p = std::get_if<PointMassT<Scalar>>(&m)) {
    if (p->dim() != 1) throw std::invalid_argument("varianceOf: not scalar");
    return Scalar(0);
  }
  throw std::invalid_argument("varianceOf: not a scalar Gaussian/point mass");
}

template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> meanVectorOf(const MessageT<Scalar>& m) {
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  if (const auto* g = std::get_if<MvGaussianT<Scalar>>(&m)) {
    if (g->isUniform()) return Vec::Zero(g->dim());
    return g->mean();
  }
  if (const auto* p = std::get_if<PointMassT<Scalar>>(&m)) return p->location;
  if (const auto* g = std::get_if<GaussianT<Scalar>>(&m)) {
    return Vec::Constant(1, g->isUniform() ? Scalar(0) : g->mean());
  }
  throw std::invalid_argument("meanVectorOf: unsupported family");
}

template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> covarianceOf(
    const MessageT<Scalar>& m) {
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  if (const auto* g = std::get_if<MvGaussianT<Scalar>>(&m)) {
    if (g->isUniform()) {
      return Mat::Constant(g->dim(), g->dim(),
                           std::numeric_limits<Scalar>::infinity());
    }
    return g->covariance();
  }
  if (const auto* p = std::get_if<PointMassT<Scalar>>(&m)) {
    return Mat::Zero(p->dim(), p->dim());
  }
  if (const auto* g = std::get_if<GaussianT<Scalar>>(&m)) {
    return Mat::Constant(1, 1, varianceOf(m));
  }
  throw std::invalid_argument("covarianceOf: unsupported family");
}

// Second raw moment <x^2> of a scalar belief (Gaussian or point mass).
template <typename Scalar>
Scalar secondMomentOf(const MessageT<Scalar>& m) {
  const Scalar mu = meanOf(m);
  const Scalar v = varianceOf(m);
  if (!std::isfinite(double(v)) || v < Scalar(0)) {
    throw std::invalid_argument("secondMomentOf: belief is not proper");
  }
  return mu * mu + v;
}

template <typename Scalar>
MessageT<Scalar> uniformLike(Family f, Eigen::Index d) {
  switch (f) {
    case Family::Gaussian: return GaussianT<Scalar>::uniform();
    case Family::MvGaussian: return MvGaussianT<Scalar>::uniform(d);
    case Family::Bernoulli: return BernoulliT<Scalar>{};
    case Family::PointMass: return GaussianT<Scalar>::uniform();
  }
  return GaussianT<Scalar>::uniform();
}

// Builds a Gaussian/MvGaussian/point-mass message from mean and covariance,
// collapsing near-zero covariances to point masses.
template <typename Scalar>
MessageT<Scalar> gaussianFromMoments(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& mean,
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& cov) {
  MomentsT<Scalar> mo;
  mo.first = mean;
  mo.second = cov + mean * mean.transpose();
  return fromMoments(mean.size() == 1 ? Family::Gaussian : Family::MvGaussian, mo);
}

template <typename Scalar>
bool closeTo(const MessageT<Scalar>& a, const MessageT<Scalar>& b, double tol) {
  if (family(a) != family(b) || messageDim(a) != messageDim(b)) return false;
  if (const auto* ga = std::get_if<GaussianT<Scalar>>(&a)) {
    const auto& gb = std::get<GaussianT<Scalar>>(b);
    return std::abs(double(ga->eta1 - gb.eta1)) <= tol &&
           std::abs(double(ga->eta2 - gb.eta2)) <= tol;
  }
  if (const auto* ma = std::get_if<MvGaussianT<Scalar>>(&a)) {
    const auto& mb = std::get<MvGaussianT<Scalar>>(b);
    return (ma->h - mb.h).template lpNorm<Eigen::Infinity>() <= tol &&
           (ma->K - mb.K).template lpNorm<Eigen::Infinity>() <= tol;
  }
  if (const auto* ba = std::get_if<BernoulliT<Scalar>>(&a)) {
    const auto& bb = std::get<BernoulliT<Scalar>>(b);
    if (std::isinf(double(ba->logOdds)) || std::isinf(double(bb.logOdds))) {
      return ba->logOdds == bb.logOdds;
    }
    return std::abs(double(ba->logOdds - bb.logOdds)) <= tol;
  }
  const auto& pa = std::get<PointMassT<Scalar>>(a);
  const auto& pb = std::get<PointMassT<Scalar>>(b);
  return (pa.location - pb.location).template lpNorm<Eigen::Infinity>() <= tol;
}

}  // namespace conmp

#endif  // CONMP_MESSAGE_HPP
