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

#include "conmp/factors.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "conmp/numerics.hpp"

namespace conmp {

namespace {

// Quadrature-projected scalar variances are floored here so a numerically
// degenerate tilt cannot emit a point mass and freeze a belief.
constexpr double kProjectedVarianceFloor = 1e-10;
// Bernoulli messages from gate/box are clamped to keep log-odds finite and
// the belief revisable; exp(-500) is still representable in double.
constexpr double kLogOddsClamp = 500.0;

enum class ViewState { Uniform, Proper, Improper, Point };

struct MomentView {
  ViewState state = ViewState::Uniform;
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;

  bool usable() const { return state == ViewState::Proper || state == ViewState::Point; }
};

MomentView momentView(const Message& m) {
  MomentView v;
  if (const auto* g = std::get_if<Gaussian>(&m)) {
    if (g->isUniform()) {
      v.state = ViewState::Uniform;
      v.mean = Eigen::VectorXd::Zero(1);
      v.cov = Eigen::MatrixXd::Zero(1, 1);
    } else if (g->isProper()) {
      v.state = ViewState::Proper;
      v.mean = Eigen::VectorXd::Constant(1, g->mean());
      v.cov = Eigen::MatrixXd::Constant(1, 1, g->variance());
    } else {
      v.state = ViewState::Improper;
    }
    return v;
  }
  if (const auto* g = std::get_if<MvGaussian>(&m)) {
    if (g->isUniform()) {
      v.state = ViewState::Uniform;
      v.mean = Eigen::VectorXd::Zero(g->dim());
      v.cov = Eigen::MatrixXd::Zero(g->dim(), g->dim());
    } else if (g->isProper()) {
      v.state = ViewState::Proper;
      v.mean = g->mean();
      v.cov = g->covariance();
    } else {
      v.state = ViewState::Improper;
    }
    return v;
  }
  if (const auto* p = std::get_if<PointMass>(&m)) {
    v.state = ViewState::Point;
    v.mean = p->location;
    v.cov = Eigen::MatrixXd::Zero(p->dim(), p->dim());
    return v;
  }
  throw std::invalid_argument("momentView: Bernoulli message where Gaussian expected");
}

struct ScalarView {
  ViewState state = ViewState::Uniform;
  double mean = 0;
  double var = 0;
  bool usable() const { return state == ViewState::Proper || state == ViewState::Point; }
};

ScalarView scalarView(const Message& m) {
  ScalarView v;
  if (const auto* g = std::get_if<Gaussian>(&m)) {
    if (g->isUniform()) {
      v.state = ViewState::Uniform;
    } else if (g->isProper()) {
      v.state = ViewState::Proper;
      v.mean = g->mean();
      v.var = g->variance();
    } else {
      v.state = ViewState::Improper;
    }
    return v;
  }
  if (const auto* p = std::get_if<PointMass>(&m)) {
    if (p->dim() != 1) throw std::invalid_argument("scalarView: vector point mass");
    v.state = ViewState::Point;
    v.mean = p->location(0);
    return v;
  }
  throw std::invalid_argument("scalarView: message is not a scalar Gaussian");
}

FactorResult skipResult(const std::string& why) {
  FactorResult r;
  r.skip = true;
  r.note = why;
  return r;
}

FactorResult uniformResult(Family f, Eigen::Index d, const std::string& note = {}) {
  FactorResult r;
  r.msg = uniformLike<double>(f, d);
  r.note = note;
  return r;
}

Message messageFromView(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov) {
  return gaussianFromMoments<double>(mean, cov);
}

double clampLogOdds(double lo) {
  return std::clamp(lo, -kLogOddsClamp, kLogOddsClamp);
}

// ---------------------------------------------------------------------------
// Linear-Gaussian factors (exact in both modes).

FactorResult gaussianNoiseMessage(const FactorKind& kind,
                                  const std::vector<Message>& in, int target) {
  const int other = 1 - target;
  MomentView v = momentView(in[other]);
  if (v.state == ViewState::Uniform) {
    return uniformResult(family(in[other]) == Family::PointMass ? Family::Gaussian
                                                                : family(in[other]),
                         messageDim(in[other]));
  }
  if (!v.usable()) return skipResult("gaussian-noise: improper input");
  const Eigen::Index d = v.mean.size();
  Eigen::MatrixXd cov = v.cov + kind.variance * Eigen::MatrixXd::Identity(d, d);
  FactorResult r;
  r.msg = messageFromView(v.mean, cov);
  return r;
}

FactorResult sumMessage(const std::vector<Message>& in, int target) {
  // z = a + b with slots (z, a, b); message to z convolves, to a/b deconvolves.
  int i1, i2;
  double s1, s2;
  if (target == 0) {
    i1 = 1; i2 = 2; s1 = 1; s2 = 1;
  } else if (target == 1) {
    i1 = 0; i2 = 2; s1 = 1; s2 = -1;
  } else {
    i1 = 0; i2 = 1; s1 = 1; s2 = -1;
  }
  MomentView v1 = momentView(in[i1]);
  MomentView v2 = momentView(in[i2]);
  if (v1.state == ViewState::Uniform || v2.state == ViewState::Uniform) {
    const Eigen::Index d = std::max(messageDim(in[i1]), messageDim(in[i2]));
    return uniformResult(d > 1 ? Family::MvGaussian : Family::Gaussian, d);
  }
  if (!v1.usable() || !v2.usable()) return skipResult("sum: improper input");
  if (v1.mean.size() != v2.mean.size()) {
    throw std::invalid_argument("sum: dimension mismatch");
  }
  FactorResult r;
  r.msg = messageFromView(s1 * v1.mean + s2 * v2.mean, v1.cov + v2.cov);
  return r;
}

FactorResult softSymmetryMessage(const FactorKind& kind,
                                 const std::vector<Message>& in, int target) {
  const int other = 1 - target;
  MomentView v = momentView(in[other]);
  const Eigen::Index d = messageDim(in[other]);
  if (v.state == ViewState::Uniform) {
    return uniformResult(d > 1 ? Family::MvGaussian : Family::Gaussian, d);
  }
  if (!v.usable()) return skipResult("soft-symmetry: improper input");
  Eigen::VectorXd signs = kind.signs.size() == d ? kind.signs : Eigen::VectorXd::Ones(d);
  Eigen::VectorXd mean = signs.cwiseProduct(v.mean);
  Eigen::MatrixXd cov = signs.asDiagonal() * v.cov * signs.asDiagonal();
  cov += kind.variance * Eigen::MatrixXd::Identity(d, d);
  FactorResult r;
  r.msg = messageFromView(mean, cov);
  return r;
}

// ---------------------------------------------------------------------------
// Rotation factor: point = radius * (sin angle, cos angle) + N(0, vf I).
// EP moment matching of the tilted distribution with tensor-product
// Gauss-Hermite quadrature over (angle, radius).

struct NodeSet {
  std::vector<double> x;
  std::vector<double> logw;
};

NodeSet scalarNodes(const ScalarView& v, int n) {
  NodeSet ns;
  if (v.state == ViewState::Point) {
    ns.x.push_back(v.mean);
    ns.logw.push_back(0.0);
    return ns;
  }
  const GaussHermite& gh = GaussHermite::cached(n);
  for (int i = 0; i < gh.size(); ++i) {
    ns.x.push_back(gh.node(i, v.mean, v.var));
    ns.logw.push_back(std::log(gh.weight(i)));
  }
  return ns;
}

double logMvGaussianPdf2(const Eigen::Vector2d& x, const Eigen::Vector2d& mean,
                         const Eigen::Matrix2d& cov) {
  const double det = cov(0, 0) * cov(1, 1) - cov(0, 1) * cov(1, 0);
  if (det <= 0) return -std::numeric_limits<double>::infinity();
  const Eigen::Vector2d d = x - mean;
  const double q = (d(0) * d(0) * cov(1, 1) - 2 * d(0) * d(1) * cov(0, 1) +
                    d(1) * d(1) * cov(0, 0)) / det;
  return -0.5 * (2.0 * kLogTwoPi + std::log(det) + q);
}

// Importance-corrected nodes: the base measure is the product of the incoming
// message with a Gaussian proxy of the likelihood, so nodes land where the
// tilt actually has mass; log weights carry the density ratio msg/base, which
// keeps the quadrature consistent with integrating against the message alone.
// Wide angle messages degenerate to a single replica window at the proxy.
NodeSet refinedNodes(const ScalarView& v, const Message& msg, bool hasProxy,
                     double proxyMean, double proxyVar, int n) {
  if (v.state == ViewState::Point || !hasProxy) {
    return scalarNodes(v, n);
  }
  const double prec = 1.0 / v.var + 1.0 / proxyVar;
  const double baseMean = (v.mean / v.var + proxyMean / proxyVar) / prec;
  const double baseVar = 1.0 / prec;
  const GaussHermite& gh = GaussHermite::cached(n);
  const auto& g = std::get<Gaussian>(msg);
  NodeSet ns;
  for (int i = 0; i < gh.size(); ++i) {
    const double a = baseMean + std::sqrt(2.0 * baseVar) * gh.rawNodes()(i);
    // msg(a) / base(a), both unnormalized within a shared constant.
    const double logMsg = g.eta1 * a + g.eta2 * a * a;
    const double logBase = -0.5 * (a - baseMean) * (a - baseMean) / baseVar;
    ns.x.push_back(a);
    ns.logw.push_back(std::log(gh.weight(i)) + logMsg - logBase);
  }
  return ns;
}

FactorResult rotationMessage(const FactorKind& kind, const QuadratureSpec& quad,
                             const std::vector<Message>& in, int target) {
  const double vf = kind.variance;
  const ScalarView av = scalarView(in[1]);
  const ScalarView rv = scalarView(in[2]);
  if (!av.usable() || !rv.usable()) return skipResult("rotation: angle/radius not proper");

  // Likelihood proxies from the point edge, used to refine node placement.
  // The single-mode treatment of the angle is faithful only when the point's
  // direction is determined beyond wraparound; at 4 sigma the mass on the far
  // side of the circle is negligible (~3e-4).
  bool proxyUsable = false;      // direction/norm estimates are meaningful
  bool windowJustified = false;  // single replica window is faithful
  double angleHat = 0.0;
  double radiusHat = 1.0;
  double likVar = 1.0;
  if (!isUniform(in[0]) && !std::holds_alternative<PointMass>(in[0])) {
    const auto& g = std::get<MvGaussian>(in[0]);
    if (g.isProper()) {
      const Eigen::Vector2d mu = g.mean();
      const double spread2 = g.covariance().trace() / 2.0 + vf;
      proxyUsable = mu.squaredNorm() > 4.0 * spread2;
      windowJustified = mu.squaredNorm() > 16.0 * spread2;
      if (proxyUsable) {
        angleHat = std::atan2(mu(0), mu(1));
        radiusHat = mu.norm();
        likVar = spread2;
      }
    }
  }
  // Narrow angle messages cannot straddle replicas, so refinement only needs
  // a usable direction; wide ones need it determined beyond wraparound.
  const bool angleProxy =
      av.state != ViewState::Point &&
      (std::sqrt(std::max(av.var, 0.0)) <= 0.8 ? proxyUsable : windowJustified);
  if (angleProxy) {
    const double twoPi = 2.0 * std::numbers::pi;
    angleHat += twoPi * std::round((av.mean - angleHat) / twoPi);
  }

  const NodeSet an = refinedNodes(av, in[1], angleProxy, angleHat,
                                  likVar / (radiusHat * radiusHat), quad.nodesPerDim);
  const NodeSet rn = refinedNodes(rv, in[2], proxyUsable, radiusHat, likVar,
                                  quad.nodesPerDim);

  // Point-message summary.
  const bool pUniform = isUniform(in[0]);
  bool pPoint = std::holds_alternative<PointMass>(in[0]);
  Eigen::Vector2d pMean = Eigen::Vector2d::Zero();
  Eigen::Matrix2d pCov = Eigen::Matrix2d::Zero();
  Eigen::Matrix2d pK = Eigen::Matrix2d::Zero();
  Eigen::Vector2d pH = Eigen::Vector2d::Zero();
  if (!pUniform) {
    MomentView pv = momentView(in[0]);
    if (!pv.usable()) return skipResult("rotation: point message improper");
    pMean = pv.mean;
    pCov = pv.cov;
    if (pv.state == ViewState::Proper) {
      const auto& g = std::get<MvGaussian>(in[0]);
      pK = g.K;
      pH = g.h;
    }
  }

  const int na = static_cast<int>(an.x.size());
  const int nr = static_cast<int>(rn.x.size());

  if (target == 0) {
    if (pPoint) return skipResult("rotation: point edge carries a point mass");
    // Mixture over nodes; with a proper incoming point message each component
    // is the Gaussian product of the likelihood with that message.
    Eigen::Matrix2d compCov;
    Eigen::Matrix2d compCovSolve;
    bool reweight = !pUniform;
    if (reweight) {
      Eigen::Matrix2d Kc = pK + Eigen::Matrix2d::Identity() / vf;
      compCov = Kc.inverse();
    } else {
      compCov = vf * Eigen::Matrix2d::Identity();
    }
    std::vector<double> logw(na * nr);
    std::vector<Eigen::Vector2d> mu(na * nr);
    double mx = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < na; ++i) {
      for (int j = 0; j < nr; ++j) {
        const Eigen::Vector2d g(rn.x[j] * std::sin(an.x[i]),
                                rn.x[j] * std::cos(an.x[i]));
        double lw = an.logw[i] + rn.logw[j];
        if (reweight) {
          lw += logMvGaussianPdf2(pMean, g,
                                  pCov + vf * Eigen::Matrix2d::Identity());
          mu[i * nr + j] = compCov * (pH + g / vf);
        } else {
          mu[i * nr + j] = g;
        }
        logw[i * nr + j] = lw;
        mx = std::max(mx, lw);
      }
    }
    if (!std::isfinite(mx)) {
      return uniformResult(Family::MvGaussian, 2, "rotation: zero tilted mass");
    }
    double tot = 0;
    Eigen::Vector2d mean = Eigen::Vector2d::Zero();
    Eigen::Matrix2d m2 = Eigen::Matrix2d::Zero();
    for (std::size_t k = 0; k < logw.size(); ++k) {
      const double w = std::exp(logw[k] - mx);
      tot += w;
      mean += w * mu[k];
      m2 += w * (mu[k] * mu[k].transpose());
    }
    mean /= tot;
    m2 /= tot;
    Eigen::Matrix2d cov = compCov + m2 - mean * mean.transpose();
    cov = 0.5 * (cov + cov.transpose());
    FactorResult r;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(cov);
    if (es.eigenvalues().minCoeff() <= 0) {
      cov += (1e-8 + std::max(0.0, -es.eigenvalues().minCoeff())) *
             Eigen::Matrix2d::Identity();
      r.note = "rotation: jittered non-PSD covariance";
    }
    Message tilted = gaussianFromMoments<double>(mean, cov);
    r.msg = pUniform ? tilted : divide(tilted, in[0]);
    return r;
  }

  // Messages to angle or radius require information from the point edge.
  if (pUniform) {
    return uniformResult(Family::Gaussian, 1);
  }
  const ScalarView& tv = target == 1 ? av : rv;
  if (tv.state == ViewState::Point) return skipResult("rotation: target is a point mass");
  const Eigen::Matrix2d covTot = pCov + vf * Eigen::Matrix2d::Identity();
  std::vector<double> logw(na * nr);
  double mx = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < na; ++i) {
    for (int j = 0; j < nr; ++j) {
      const Eigen::Vector2d g(rn.x[j] * std::sin(an.x[i]),
                              rn.x[j] * std::cos(an.x[i]));
      const double lw = an.logw[i] + rn.logw[j] + logMvGaussianPdf2(pMean, g, covTot);
      logw[i * nr + j] = lw;
      mx = std::max(mx, lw);
    }
  }
  if (!std::isfinite(mx)) {
    return uniformResult(Family::Gaussian, 1, "rotation: zero tilted mass");
  }
  double tot = 0, m1 = 0, m2 = 0;
  for (int i = 0; i < na; ++i) {
    for (int j = 0; j < nr; ++j) {
      const double w = std::exp(logw[i * nr + j] - mx);
      const double x = target == 1 ? an.x[i] : rn.x[j];
      tot += w;
      m1 += w * x;
      m2 += w * x * x;
    }
  }
  m1 /= tot;
  m2 /= tot;
  const double var = std::max(m2 - m1 * m1, kProjectedVarianceFloor);
  FactorResult r;
  Message tilted = Gaussian::fromMeanVariance(m1, var);
  r.msg = divide(tilted, in[target]);
  return r;
}

// Variational update for the noise-augmented rotation factor, mirroring the
// product/inner-product recipe: messages are exponentiated expected
// log-factors under the current beliefs. The angle term is a von Mises
// log-density kappa*cos(a - phi); for the concentrations the tiny noise
// variance induces, its Gaussian projection at the replica nearest the
// incoming message is exact to machine precision.
FactorResult rotationMessageVMP(const FactorKind& kind, const std::vector<Message>& in,
                                int target) {
  const double vf = kind.variance;
  switch (target) {
    case 0: {  // point: N(<r> E[u(a)], vf I)
      const ScalarView a = scalarView(in[1]);
      const ScalarView r = scalarView(in[2]);
      if (!a.usable() || !r.usable()) return skipResult("rotation: beliefs not proper");
      const double shrink = std::exp(-0.5 * a.var);
      const Eigen::Vector2d mean =
          r.mean * shrink * Eigen::Vector2d(std::sin(a.mean), std::cos(a.mean));
      FactorResult res;
      res.msg = MvGaussian::fromMeanCovariance(mean, vf * Eigen::Matrix2d::Identity());
      return res;
    }
    case 2: {  // radius: precision E[|u(a)|^2]/vf = 1/vf
      MomentView p = momentView(in[0]);
      const ScalarView a = scalarView(in[1]);
      if (!p.usable() || !a.usable()) return skipResult("rotation: beliefs not proper");
      const double shrink = std::exp(-0.5 * a.var);
      const Eigen::Vector2d u =
          shrink * Eigen::Vector2d(std::sin(a.mean), std::cos(a.mean));
      FactorResult res;
      res.msg = Gaussian{p.mean.dot(u) / vf, -0.5 / vf};
      return res;
    }
    case 1: {  // angle: Gaussian projection of exp(kappa cos(a - phi))
      MomentView p = momentView(in[0]);
      const ScalarView r = scalarView(in[2]);
      if (!p.usable() || !r.usable()) return skipResult("rotation: beliefs not proper");
      const double norm = p.mean.norm();
      const double kappa = std::abs(r.mean) * norm / vf;
      if (kappa < 10.0) {
        // Point belief near the origin: direction uninformative.
        return uniformResult(Family::Gaussian, 1);
      }
      double phi = std::atan2(p.mean(0), p.mean(1));
      if (r.mean < 0) phi += std::numbers::pi;
      // Replica nearest the incoming angle message (the cavity).
      double ref = 0.0;
      const ScalarView cav = scalarView(in[1]);
      if (cav.usable()) ref = cav.mean;
      const double twoPi = 2.0 * std::numbers::pi;
      phi += twoPi * std::round((ref - phi) / twoPi);
      FactorResult res;
      res.msg = Gaussian{kappa * phi, -0.5 * kappa};
      return res;
    }
  }
  throw std::invalid_argument("rotation: bad target");
}

// ---------------------------------------------------------------------------
// Gate factor: child = switch ? fg : bg, with internal branch variance vg.

struct MixtureComp {
  double w;
  double mean;
  double var;
};

std::pair<double, double> projectMixture(const std::vector<MixtureComp>& comps) {
  double tot = 0, m1 = 0, m2 = 0;
  for (const auto& c : comps) {
    tot += c.w;
    m1 += c.w * c.mean;
    m2 += c.w * (c.var + c.mean * c.mean);
  }
  m1 /= tot;
  m2 /= tot;
  return {m1, m2 - m1 * m1};
}

FactorResult gateMessageEP(const FactorKind& kind, const std::vector<Message>& in,
                           int target) {
  const double vg = kind.variance;
  const double p1 = std::get<Bernoulli>(in[1]).probability();
  const double p0 = 1.0 - p1;
  const ScalarView z = scalarView(in[0]);
  const ScalarView fg = scalarView(in[2]);
  const ScalarView bg = scalarView(in[3]);

  switch (target) {
    case 1: {  // switch: log marginal-likelihood ratio of the two branches
      if (!z.usable() || !fg.usable() || !bg.usable()) {
        return uniformResult(Family::Bernoulli, 1, "gate: uninformative branch");
      }
      const double l1 = logGaussianPdf(z.mean, fg.mean, z.var + vg + fg.var);
      const double l0 = logGaussianPdf(z.mean, bg.mean, z.var + vg + bg.var);
      FactorResult r;
      r.msg = Bernoulli{clampLogOdds(l1 - l0)};
      return r;
    }
    case 0: {  // child: Bernoulli-weighted mixture, moment matched
      if (z.state == ViewState::Point) return skipResult("gate: child is observed");
      if (p1 >= 1.0 || p0 >= 1.0) {  // degenerate gate: equality to one branch
        const ScalarView& on = p1 >= 1.0 ? fg : bg;
        if (!on.usable()) return skipResult("gate: branch not proper");
        FactorResult r;
        r.msg = Gaussian::fromMeanVariance(on.mean, vg + on.var);
        return r;
      }
      if (!fg.usable() || !bg.usable()) return skipResult("gate: branch not proper");
      std::vector<MixtureComp> comps;
      if (z.state == ViewState::Uniform) {
        if (p1 > 0) comps.push_back({p1, fg.mean, vg + fg.var});
        if (p0 > 0) comps.push_back({p0, bg.mean, vg + bg.var});
        auto [m, v] = projectMixture(comps);
        FactorResult r;
        r.msg = Gaussian::fromMeanVariance(m, std::max(v, kProjectedVarianceFloor));
        return r;
      }
      if (z.state != ViewState::Proper) return skipResult("gate: child message improper");
      // Evidence-weighted Gaussian products per branch.
      std::vector<double> logws;
      std::vector<MixtureComp> post;
      const double branchMean[2] = {fg.mean, bg.mean};
      const double branchVar[2] = {vg + fg.var, vg + bg.var};
      const double pr[2] = {p1, p0};
      for (int k = 0; k < 2; ++k) {
        if (pr[k] <= 0) continue;
        const double lz = logGaussianPdf(z.mean, branchMean[k], z.var + branchVar[k]);
        const double prec = 1.0 / z.var + 1.0 / branchVar[k];
        const double mean = (z.mean / z.var + branchMean[k] / branchVar[k]) / prec;
        logws.push_back(std::log(pr[k]) + lz);
        post.push_back({0.0, mean, 1.0 / prec});
      }
      const double lse = logSumExp(logws);
      if (!std::isfinite(lse)) {
        return uniformResult(Family::Gaussian, 1, "gate: zero tilted mass");
      }
      for (std::size_t k = 0; k < post.size(); ++k) {
        post[k].w = std::exp(logws[k] - lse);
      }
      auto [m, v] = projectMixture(post);
      Message tilted = Gaussian::fromMeanVariance(m, std::max(v, kProjectedVarianceFloor));
      FactorResult r;
      r.msg = divide(tilted, in[0]);
      return r;
    }
    case 2:
    case 3: {  // branch variables
      const bool isFg = target == 2;
      const ScalarView& own = isFg ? fg : bg;
      const ScalarView& other = isFg ? bg : fg;
      const double pOwn = isFg ? p1 : p0;
      const double pOther = 1.0 - pOwn;
      if (!z.usable()) return skipResult("gate: child not proper");
      // Degenerate switch: the gate is an equality factor to this branch.
      if (pOwn >= 1.0) {
        FactorResult r;
        r.msg = Gaussian::fromMeanVariance(z.mean, vg + z.var);
        return r;
      }
      if (pOwn <= 0.0) {
        return uniformResult(Family::Gaussian, 1);
      }
      if (own.state != ViewState::Proper) {
        // Without a proper cavity the mixture has unbounded mass on the
        // "switch off" component; fall back to the responsibility-scaled
        // likelihood message.
        Gaussian lik = Gaussian::fromMeanVariance(z.mean, vg + z.var);
        FactorResult r;
        r.msg = Gaussian{pOwn * lik.eta1, pOwn * lik.eta2};
        r.note = "gate: branch cavity not proper, responsibility-scaled message";
        return r;
      }
      const double likVar = vg + z.var;
      const double zOwn = logGaussianPdf(z.mean, own.mean, likVar + own.var);
      double logwOn = std::log(pOwn) + zOwn;
      double logwOff;
      if (other.usable()) {
        logwOff = std::log(pOther) +
                  logGaussianPdf(z.mean, other.mean, z.var + vg + other.var);
      } else {
        logwOff = std::log(pOther);  // unnormalized; uniform other branch
      }
      const double lse = logSumExp({logwOn, logwOff});
      const double prec = 1.0 / own.var + 1.0 / likVar;
      const double postMean = (own.mean / own.var + z.mean / likVar) / prec;
      std::vector<MixtureComp> comps = {
          {std::exp(logwOn - lse), postMean, 1.0 / prec},
          {std::exp(logwOff - lse), own.mean, own.var}};
      auto [m, v] = projectMixture(comps);
      Message tilted = Gaussian::fromMeanVariance(m, std::max(v, kProjectedVarianceFloor));
      FactorResult r;
      r.msg = divide(tilted, in[target]);
      return r;
    }
  }
  throw std::invalid_argument("gate: bad target");
}

FactorResult gateMessageVMP(const FactorKind& kind, const std::vector<Message>& in,
                            int target) {
  const double vg = kind.variance;
  switch (target) {
    case 1: {  // expected log-density difference of the two branches
      const ScalarView z = scalarView(in[0]);
      const ScalarView fg = scalarView(in[2]);
      const ScalarView bg = scalarView(in[3]);
      if (!z.usable() || !fg.usable() || !bg.usable()) {
        return skipResult("gate: beliefs not proper");
      }
      const double m2fg = fg.var + fg.mean * fg.mean;
      const double m2bg = bg.var + bg.mean * bg.mean;
      const double lo =
          (2.0 * z.mean * (fg.mean - bg.mean) - m2fg + m2bg) / (2.0 * vg);
      FactorResult r;
      r.msg = Bernoulli{clampLogOdds(lo)};
      return r;
    }
    case 0: {
      const double q1 = std::get<Bernoulli>(in[1]).probability();
      const ScalarView fg = scalarView(in[2]);
      const ScalarView bg = scalarView(in[3]);
      if (!fg.usable() || !bg.usable()) return skipResult("gate: beliefs not proper");
      FactorResult r;
      r.msg = Gaussian::fromMeanVariance(q1 * fg.mean + (1 - q1) * bg.mean, vg);
      return r;
    }
    case 2:
    case 3: {
      const double q1 = std::get<Bernoulli>(in[1]).probability();
      const double resp = target == 2 ? q1 : 1 - q1;
      const ScalarView z = scalarView(in[0]);
      if (!z.usable()) return skipResult("gate: beliefs not proper");
      if (resp <= 0) return uniformResult(Family::Gaussian, 1);
      FactorResult r;
      r.msg = Gaussian{resp * z.mean / vg, -0.5 * resp / vg};
      return r;
    }
  }
  throw std::invalid_argument("gate: bad target");
}

// ---------------------------------------------------------------------------
// Box membership: switch = [|px-cx| <= l/2 and |py-cy| <= l/2], edges smoothed
// by a probit step of width `edgeWidth`. All center-axis integrals are
// analytic; quadrature runs over the side length only.

struct AxisStats {
  double M;   // E[membership]
  double A;   // E[1 - membership], computed stably
  double F;   // E[c_axis * membership]
  double S;   // E[c_axis^2 * membership]
};

AxisStats axisStats(double mu, double var, double pixel, double side, double w) {
  if (side <= 0) {  // an empty box contains nothing
    return {0.0, 1.0, 0.0, 0.0};
  }
  const double bLo = pixel - side / 2;
  const double bHi = pixel + side / 2;
  const SmoothedStepMoments lo = gaussianStepMoments(mu, var, bLo, w);
  const SmoothedStepMoments hi = gaussianStepMoments(mu, var, bHi, w);
  AxisStats st;
  st.M = lo.mass - hi.mass;
  const double s = std::sqrt(var + w * w);
  st.A = normalCdf(-(mu - bLo) / s) + normalCdf((mu - bHi) / s);
  st.F = lo.first - hi.first;
  st.S = lo.second - hi.second;
  return st;
}

struct CenterView {
  ScalarView x, y;
};

CenterView centerView(const Message& m) {
  CenterView cv;
  if (const auto* p = std::get_if<PointMass>(&m)) {
    if (p->dim() != 2) throw std::invalid_argument("box: center must be 2-d");
    cv.x.state = cv.y.state = ViewState::Point;
    cv.x.mean = p->location(0);
    cv.y.mean = p->location(1);
    return cv;
  }
  const auto& g = std::get<MvGaussian>(m);
  if (g.dim() != 2) throw std::invalid_argument("box: center must be 2-d");
  if (g.isUniform()) {
    cv.x.state = cv.y.state = ViewState::Uniform;
    return cv;
  }
  if (!g.isProper()) {
    cv.x.state = cv.y.state = ViewState::Improper;
    return cv;
  }
  const Eigen::Vector2d mean = g.mean();
  const Eigen::Matrix2d cov = g.covariance();
  cv.x = {ViewState::Proper, mean(0), cov(0, 0)};
  cv.y = {ViewState::Proper, mean(1), cov(1, 1)};
  return cv;
}

FactorResult boxMembershipMessage(const FactorKind& kind, const QuadratureSpec& quad,
                                  const std::vector<Message>& in, int target) {
  const double w = kind.edgeWidth;
  const double px = kind.pixel(0);
  const double py = kind.pixel(1);
  const double p1 = std::get<Bernoulli>(in[0]).probability();
  const double p0 = 1.0 - p1;
  const CenterView c = centerView(in[1]);
  const ScalarView l = scalarView(in[2]);
  if (!c.x.usable() || !c.y.usable()) return skipResult("box: center not proper");
  if (!l.usable()) return skipResult("box: side length not proper");

  const NodeSet ln = scalarNodes(l, quad.nodesPerDim);
  const int n = static_cast<int>(ln.x.size());

  std::vector<AxisStats> sx(n), sy(n);
  for (int i = 0; i < n; ++i) {
    sx[i] = axisStats(c.x.mean, c.x.var, px, ln.x[i], w);
    sy[i] = axisStats(c.y.mean, c.y.var, py, ln.x[i], w);
  }

  switch (target) {
    case 0: {  // switch
      double num = 0, den = 0;
      for (int i = 0; i < n; ++i) {
        const double wl = std::exp(ln.logw[i]);
        num += wl * sx[i].M * sy[i].M;
        den += wl * (sx[i].A + sx[i].M * sy[i].A);
      }
      FactorResult r;
      if (num <= 0 && den <= 0) {
        return uniformResult(Family::Bernoulli, 1, "box: zero tilted mass");
      }
      double lo;
      if (num <= 0) {
        lo = -kLogOddsClamp;
      } else if (den <= 0) {
        lo = kLogOddsClamp;
      } else {
        lo = std::log(num) - std::log(den);
      }
      r.msg = Bernoulli{clampLogOdds(lo)};
      return r;
    }
    case 2: {  // side length
      if (l.state == ViewState::Point) return skipResult("box: side is a point mass");
      double tot = 0, m1 = 0, m2 = 0;
      for (int i = 0; i < n; ++i) {
        const double Mi = sx[i].M * sy[i].M;
        const double Qi = sx[i].A + sx[i].M * sy[i].A;
        const double t = std::exp(ln.logw[i]) * (p1 * Mi + p0 * Qi);
        tot += t;
        m1 += t * ln.x[i];
        m2 += t * ln.x[i] * ln.x[i];
      }
      if (tot <= 0) {
        return uniformResult(Family::Gaussian, 1, "box: zero tilted mass");
      }
      m1 /= tot;
      m2 /= tot;
      const double var = std::max(m2 - m1 * m1, kProjectedVarianceFloor);
      FactorResult r;
      r.msg = divide(Message(Gaussian::fromMeanVariance(m1, var)), in[2]);
      return r;
    }
    case 1: {  // center
      if (c.x.state == ViewState::Point) return skipResult("box: center is a point mass");
      double tot = 0;
      double m1x = 0, m2x = 0, m1y = 0, m2y = 0;
      const double ex = c.x.mean, ex2 = c.x.var + ex * ex;
      const double ey = c.y.mean, ey2 = c.y.var + ey * ey;
      for (int i = 0; i < n; ++i) {
        const double wl = std::exp(ln.logw[i]);
        const double Mi = sx[i].M * sy[i].M;
        const double Qi = sx[i].A + sx[i].M * sy[i].A;
        tot += wl * (p1 * Mi + p0 * Qi);
        // E[cx * factor]: the cy integral is the same for both on/off terms.
        m1x += wl * (p1 * sx[i].F * sy[i].M + p0 * (ex - sx[i].F * sy[i].M));
        m2x += wl * (p1 * sx[i].S * sy[i].M + p0 * (ex2 - sx[i].S * sy[i].M));
        m1y += wl * (p1 * sy[i].F * sx[i].M + p0 * (ey - sy[i].F * sx[i].M));
        m2y += wl * (p1 * sy[i].S * sx[i].M + p0 * (ey2 - sy[i].S * sx[i].M));
      }
      if (tot <= 0) {
        return uniformResult(Family::MvGaussian, 2, "box: zero tilted mass");
      }
      m1x /= tot;
      m2x /= tot;
      m1y /= tot;
      m2y /= tot;
      Eigen::Vector2d mean(m1x, m1y);
      Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
      cov(0, 0) = std::max(m2x - m1x * m1x, kProjectedVarianceFloor);
      cov(1, 1) = std::max(m2y - m1y * m1y, kProjectedVarianceFloor);
      FactorResult r;
      r.msg = divide(gaussianFromMoments<double>(mean, cov), in[1]);
      return r;
    }
  }
  throw std::invalid_argument("box: bad target");
}

// ---------------------------------------------------------------------------
// Variational messages for the noise-augmented inner product and product.

FactorResult innerProductMessage(const FactorKind& kind,
                                 const std::vector<Message>& in, int target) {
  const double vf = kind.variance;
  MomentView nv = momentView(in[1]);
  MomentView lv = momentView(in[2]);
  if (target == 0) {
    if (!nv.usable() || !lv.usable()) return skipResult("inner: beliefs not proper");
    FactorResult r;
    const double m = nv.mean.dot(lv.mean);
    r.msg = Gaussian{m / vf, -0.5 / vf};
    return r;
  }
  const ScalarView sv = scalarView(in[0]);
  if (!sv.usable()) return skipResult("inner: out belief not proper");
  const MomentView& other = target == 1 ? lv : nv;
  if (!other.usable()) return skipResult("inner: beliefs not proper");
  MvGaussian g;
  g.K = (other.cov + other.mean * other.mean.transpose()) / vf;
  g.h = other.mean * (sv.mean / vf);
  FactorResult r;
  r.msg = g;
  return r;
}

FactorResult productMessage(const FactorKind& kind, const std::vector<Message>& in,
                            int target) {
  const double vf = kind.variance;
  const ScalarView z = scalarView(in[0]);
  const ScalarView s = scalarView(in[1]);
  const ScalarView r2 = scalarView(in[2]);
  if (target == 0) {
    if (!s.usable() || !r2.usable()) return skipResult("product: beliefs not proper");
    FactorResult r;
    r.msg = Gaussian{s.mean * r2.mean / vf, -0.5 / vf};
    return r;
  }
  const ScalarView& other = target == 1 ? r2 : s;
  if (!z.usable() || !other.usable()) return skipResult("product: beliefs not proper");
  const double m2 = other.var + other.mean * other.mean;
  FactorResult r;
  r.msg = Gaussian{other.mean * z.mean / vf, -0.5 * m2 / vf};
  return r;
}

}  // namespace

const char* factorTypeName(FactorType t) {
  switch (t) {
    case FactorType::GaussianNoise: return "GaussianNoise";
    case FactorType::Sum: return "Sum";
    case FactorType::Rotation: return "Rotation";
    case FactorType::Gate: return "Gate";
    case FactorType::BoxMembership: return "BoxMembership";
    case FactorType::InnerProduct: return "InnerProduct";
    case FactorType::Product: return "Product";
    case FactorType::SoftSymmetry: return "SoftSymmetry";
    case FactorType::Prior: return "Prior";
  }
  return "?";
}

FactorType factorTypeFromName(const std::string& name) {
  for (FactorType t : {FactorType::GaussianNoise, FactorType::Sum, FactorType::Rotation,
                       FactorType::Gate, FactorType::BoxMembership,
                       FactorType::InnerProduct, FactorType::Product,
                       FactorType::SoftSymmetry, FactorType::Prior}) {
    if (name == factorTypeName(t)) return t;
  }
  throw std::invalid_argument("unknown factor type: " + name);
}

FactorKind FactorKind::gaussianNoise(double v) {
  FactorKind k;
  k.type = FactorType::GaussianNoise;
  k.variance = v;
  return k;
}
FactorKind FactorKind::sum() {
  FactorKind k;
  k.type = FactorType::Sum;
  return k;
}
FactorKind FactorKind::rotation(double noiseVar) {
  FactorKind k;
  k.type = FactorType::Rotation;
  k.variance = noiseVar;
  return k;
}
FactorKind FactorKind::gate(double branchVar) {
  FactorKind k;
  k.type = FactorType::Gate;
  k.variance = branchVar;
  return k;
}
FactorKind FactorKind::boxMembership(const Eigen::Vector2d& pixel, double edgeWidth) {
  FactorKind k;
  k.type = FactorType::BoxMembership;
  k.pixel = pixel;
  k.edgeWidth = edgeWidth;
  return k;
}
FactorKind FactorKind::innerProduct(double noiseVar) {
  FactorKind k;
  k.type = FactorType::InnerProduct;
  k.variance = noiseVar;
  return k;
}
FactorKind FactorKind::product(double noiseVar) {
  FactorKind k;
  k.type = FactorType::Product;
  k.variance = noiseVar;
  return k;
}
FactorKind FactorKind::softSymmetry(double v, const Eigen::VectorXd& signs) {
  FactorKind k;
  k.type = FactorType::SoftSymmetry;
  k.variance = v;
  k.signs = signs;
  return k;
}
FactorKind FactorKind::priorOn(const Message& m) {
  FactorKind k;
  k.type = FactorType::Prior;
  k.prior = m;
  return k;
}

int factorEdgeCount(FactorType t) {
  switch (t) {
    case FactorType::GaussianNoise: return 2;
    case FactorType::Sum: return 3;
    case FactorType::Rotation: return 3;
    case FactorType::Gate: return 4;
    case FactorType::BoxMembership: return 3;
    case FactorType::InnerProduct: return 3;
    case FactorType::Product: return 3;
    case FactorType::SoftSymmetry: return 2;
    case FactorType::Prior: return 1;
  }
  return 0;
}

bool factorUsesBeliefs(FactorType t, InferenceMode mode) {
  switch (t) {
    case FactorType::InnerProduct:
    case FactorType::Product:
      return true;
    case FactorType::Gate:
    case FactorType::Rotation:
      return mode == InferenceMode::VMP;
    default:
      return false;
  }
}

FactorResult factorMessage(const FactorKind& kind, InferenceMode mode,
                           const QuadratureSpec& quad,
                           const std::vector<Message>& in, int target) {
  if (static_cast<int>(in.size()) != factorEdgeCount(kind.type) || target < 0 ||
      target >= factorEdgeCount(kind.type)) {
    throw std::invalid_argument("factorMessage: bad edge count or target");
  }
  switch (kind.type) {
    case FactorType::GaussianNoise: return gaussianNoiseMessage(kind, in, target);
    case FactorType::Sum: return sumMessage(in, target);
    case FactorType::Rotation:
      return mode == InferenceMode::EP ? rotationMessage(kind, quad, in, target)
                                       : rotationMessageVMP(kind, in, target);
    case FactorType::Gate:
      return mode == InferenceMode::EP ? gateMessageEP(kind, in, target)
                                       : gateMessageVMP(kind, in, target);
    case FactorType::BoxMembership: return boxMembershipMessage(kind, quad, in, target);
    case FactorType::InnerProduct: return innerProductMessage(kind, in, target);
    case FactorType::Product: return productMessage(kind, in, target);
    case FactorType::SoftSymmetry: return softSymmetryMessage(kind, in, target);
    case FactorType::Prior: {
      FactorResult r;
      r.msg = kind.prior;
      return r;
    }
  }
  throw std::invalid_argument("factorMessage: unknown factor type");
}

}  // namespace conmp
