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

#include "conmp/validate.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "conmp/numerics.hpp"

namespace conmp {

namespace {

struct Grid1 {
  Eigen::ArrayXd x;
  Eigen::ArrayXd logPdf;  // log density of the incoming message at x
  double step;
};

Grid1 messageGrid(const Message& m, int n) {
  double mean, var;
  if (const auto* g = std::get_if<Gaussian>(&m)) {
    if (!g->isProper()) throw std::invalid_argument("grid oracle: improper message");
    mean = g->mean();
    var = g->variance();
  } else {
    const auto& p = std::get<PointMass>(m);
    Grid1 grid;
    grid.x = Eigen::ArrayXd::Constant(1, p.location(0));
    grid.logPdf = Eigen::ArrayXd::Zero(1);
    grid.step = 1.0;
    return grid;
  }
  const double lo = mean - 6.0 * std::sqrt(var);
  const double hi = mean + 6.0 * std::sqrt(var);
  Grid1 grid;
  grid.x = Eigen::ArrayXd::LinSpaced(n, lo, hi);
  grid.logPdf = -0.5 * ((grid.x - mean).square() / var) - 0.5 * std::log(var);
  grid.step = (hi - lo) / (n - 1);
  return grid;
}

TiltedMoments scalarTilted(const Eigen::ArrayXd& x, const Eigen::ArrayXd& w) {
  const double tot = w.sum();
  const double m1 = (w * x).sum() / tot;
  const double m2 = (w * x.square()).sum() / tot;
  TiltedMoments t;
  t.mean = Eigen::VectorXd::Constant(1, m1);
  t.cov = Eigen::MatrixXd::Constant(1, 1, m2 - m1 * m1);
  return t;
}

}  // namespace

TiltedMoments rotationGridOracle(const FactorKind& kind, const std::vector<Message>& in,
                                 int target, int gridN) {
  const double vf = kind.variance;
  const Grid1 ga = messageGrid(in[1], gridN);
  const Grid1 gr = messageGrid(in[2], gridN);
  const int na = static_cast<int>(ga.x.size());
  const int nr = static_cast<int>(gr.x.size());

  const bool pUniform = isUniform(in[0]);
  Eigen::Vector2d pMean = Eigen::Vector2d::Zero();
  Eigen::Matrix2d pCov = Eigen::Matrix2d::Zero();
  Eigen::Matrix2d postCov = vf * Eigen::Matrix2d::Identity();
  Eigen::Matrix2d pK = Eigen::Matrix2d::Zero();
  Eigen::Vector2d pH = Eigen::Vector2d::Zero();
  if (!pUniform) {
    const auto& g = std::get<MvGaussian>(in[0]);
    pMean = g.mean();
    pCov = g.covariance();
    pK = g.K;
    pH = g.h;
    postCov = (pK + Eigen::Matrix2d::Identity() / vf).inverse();
  }

  const Eigen::ArrayXd sinA = ga.x.sin();
  const Eigen::ArrayXd cosA = ga.x.cos();

  // Row-wise accumulation over the radius axis keeps this vectorized.
  double tot = 0;
  double sumA = 0, sumA2 = 0, sumR = 0, sumR2 = 0;
  Eigen::Vector2d sumP = Eigen::Vector2d::Zero();
  Eigen::Matrix2d sumPP = Eigen::Matrix2d::Zero();
  const Eigen::Matrix2d covTot = pCov + vf * Eigen::Matrix2d::Identity();
  const Eigen::Matrix2d covTotInv = covTot.inverse();

  for (int i = 0; i < na; ++i) {
    const Eigen::ArrayXd gx = gr.x * sinA(i);
    const Eigen::ArrayXd gy = gr.x * cosA(i);
    Eigen::ArrayXd logw = ga.logPdf(i) + gr.logPdf;
    if (!pUniform) {
      const Eigen::ArrayXd dx = gx - pMean(0);
      const Eigen::ArrayXd dy = gy - pMean(1);
      logw += -0.5 * (dx.square() * covTotInv(0, 0) + 2 * dx * dy * covTotInv(0, 1) +
                      dy.square() * covTotInv(1, 1));
    }
    const Eigen::ArrayXd w = (logw - 0.0).exp();
    const double rowTot = w.sum();
    tot += rowTot;
    sumA += rowTot * ga.x(i);
    sumA2 += rowTot * ga.x(i) * ga.x(i);
    sumR += (w * gr.x).sum();
    sumR2 += (w * gr.x.square()).sum();
    if (target == 0) {
      for (int j = 0; j < nr; ++j) {
        Eigen::Vector2d mu;
        if (pUniform) {
          mu = Eigen::Vector2d(gx(j), gy(j));
        } else {
          mu = postCov * (pH + Eigen::Vector2d(gx(j), gy(j)) / vf);
        }
        sumP += w(j) * mu;
        sumPP += w(j) * mu * mu.transpose();
      }
    }
  }

  TiltedMoments t;
  if (target == 0) {
    const Eigen::Vector2d mean = sumP / tot;
    t.mean = mean;
    t.cov = postCov + sumPP / tot - mean * mean.transpose();
  } else if (target == 1) {
    const double m1 = sumA / tot;
    t.mean = Eigen::VectorXd::Constant(1, m1);
    t.cov = Eigen::MatrixXd::Constant(1, 1, sumA2 / tot - m1 * m1);
  } else {
    const double m1 = sumR / tot;
    t.mean = Eigen::VectorXd::Constant(1, m1);
    t.cov = Eigen::MatrixXd::Constant(1, 1, sumR2 / tot - m1 * m1);
  }
  return t;
}

TiltedMoments boxGridOracle(const FactorKind& kind, const std::vector<Message>& in,
                            int target, int gridN) {
  const double w = kind.edgeWidth;
  const double px = kind.pixel(0);
  const double py = kind.pixel(1);
  const double p1 = std::get<Bernoulli>(in[0]).probability();
  const double p0 = 1.0 - p1;

  const auto& cmsg = std::get<MvGaussian>(in[1]);
  const Eigen::Vector2d cMean = cmsg.mean();
  const Eigen::Matrix2d cCov = cmsg.covariance();
  Message cxMsg = Gaussian::fromMeanVariance(cMean(0), cCov(0, 0));
  Message cyMsg = Gaussian::fromMeanVariance(cMean(1), cCov(1, 1));
  const Grid1 gx = messageGrid(cxMsg, gridN);
  const Grid1 gy = messageGrid(cyMsg, gridN);
  const Grid1 gl = messageGrid(in[2], gridN);

  const Eigen::ArrayXd wx = gx.logPdf.exp();
  const Eigen::ArrayXd wy = gy.logPdf.exp();
  const Eigen::ArrayXd wl = gl.logPdf.exp();

  const int nl = static_cast<int>(gl.x.size());

  double massOn = 0, massOff = 0;
  double sCx = 0, sCx2 = 0, sCy = 0, sCy2 = 0, sL = 0, sL2 = 0;

  Eigen::ArrayXd mx(gx.x.size()), my(gy.x.size());
  for (int k = 0; k < nl; ++k) {
    const double half = std::max(gl.x(k), 0.0) / 2.0;  // l <= 0 is an empty box
    // Per-axis membership on this side-length slice.
    for (int i = 0; i < gx.x.size(); ++i) {
      mx(i) = normalCdf((gx.x(i) - px + half) / w) - normalCdf((gx.x(i) - px - half) / w);
    }
    for (int i = 0; i < gy.x.size(); ++i) {
      my(i) = normalCdf((gy.x(i) - py + half) / w) - normalCdf((gy.x(i) - py - half) / w);
    }
    const double Zx = wx.sum();
    const double Zy = wy.sum();
    const double Ex = (wx * mx).sum();
    const double Ey = (wy * my).sum();
    const double ExCx = (wx * mx * gx.x).sum();
    const double ExCx2 = (wx * mx * gx.x.square()).sum();
    const double EyCy = (wy * my * gy.x).sum();
    const double EyCy2 = (wy * my * gy.x.square()).sum();
    const double Cx1 = (wx * gx.x).sum();
    const double Cx2 = (wx * gx.x.square()).sum();
    const double Cy1 = (wy * gy.x).sum();
    const double Cy2 = (wy * gy.x.square()).sum();

    const double wk = wl(k);
    const double on = Ex * Ey;           // integral of mx*my against c densities
    const double off = Zx * Zy - on;     // integral of 1 - mx*my
    massOn += wk * on;
    massOff += wk * off;
    sL += wk * (p1 * on + p0 * off) * gl.x(k);
    sL2 += wk * (p1 * on + p0 * off) * gl.x(k) * gl.x(k);
    sCx += wk * (p1 * ExCx * Ey + p0 * (Cx1 * Zy - ExCx * Ey));
    sCx2 += wk * (p1 * ExCx2 * Ey + p0 * (Cx2 * Zy - ExCx2 * Ey));
    sCy += wk * (p1 * EyCy * Ex + p0 * (Cy1 * Zx - EyCy * Ex));
    sCy2 += wk * (p1 * EyCy2 * Ex + p0 * (Cy2 * Zx - EyCy2 * Ex));
  }

  TiltedMoments t;
  const double tot = p1 * massOn + p0 * massOff;
  if (target == 0) {
    t.mean = Eigen::VectorXd::Zero(1);
    t.cov = Eigen::MatrixXd::Zero(1, 1);
    t.bernoulliP = p1 * massOn / (p1 * massOn + p0 * massOff);
    return t;
  }
  if (target == 2) {
    const double m1 = sL / tot;
    t.mean = Eigen::VectorXd::Constant(1, m1);
    t.cov = Eigen::MatrixXd::Constant(1, 1, sL2 / tot - m1 * m1);
    return t;
  }
  const double mx1 = sCx / tot;
  const double my1 = sCy / tot;
  t.mean = Eigen::VectorXd(2);
  t.mean << mx1, my1;
  t.cov = Eigen::MatrixXd::Zero(2, 2);
  t.cov(0, 0) = sCx2 / tot - mx1 * mx1;
  t.cov(1, 1) = sCy2 / tot - my1 * my1;
  return t;
}

TiltedMoments gateGridOracle(const FactorKind& kind, const std::vector<Message>& in,
                             int target, int gridN) {
  const double vg = kind.variance;
  const double p1 = std::get<Bernoulli>(in[1]).probability();
  const double p0 = 1.0 - p1;
  const Grid1 gz = messageGrid(in[0], gridN);
  const Grid1 gf = messageGrid(in[2], gridN);
  const Grid1 gb = messageGrid(in[3], gridN);

  const Eigen::ArrayXd wz = gz.logPdf.exp();
  const Eigen::ArrayXd wf = gf.logPdf.exp();
  const Eigen::ArrayXd wb = gb.logPdf.exp();

  // For each z, integrate the branch densities over fg and bg.
  const int nz = static_cast<int>(gz.x.size());
  Eigen::ArrayXd likFg(nz), likBg(nz);
  for (int i = 0; i < nz; ++i) {
    likFg(i) = (wf * (-0.5 * (gz.x(i) - gf.x).square() / vg).exp()).sum() /
               std::sqrt(2 * std::numbers::pi * vg) * gf.step;
    likBg(i) = (wb * (-0.5 * (gz.x(i) - gb.x).square() / vg).exp()).sum() /
               std::sqrt(2 * std::numbers::pi * vg) * gb.step;
  }
  const double Zf = (wz * likFg).sum() * gz.step / (wz.sum() * gz.step) /
                    (wf.sum() * gf.step);
  const double Zb = (wz * likBg).sum() * gz.step / (wz.sum() * gz.step) /
                    (wb.sum() * gb.step);

  TiltedMoments t;
  if (target == 1) {
    t.mean = Eigen::VectorXd::Zero(1);
    t.cov = Eigen::MatrixXd::Zero(1, 1);
    t.bernoulliP = p1 * Zf / (p1 * Zf + p0 * Zb);
    return t;
  }
  if (target == 0) {
    const Eigen::ArrayXd w =
        wz * (p1 * likFg / (wf.sum() * gf.step) + p0 * likBg / (wb.sum() * gb.step));
    return scalarTilted(gz.x, w);
  }
  const bool isFg = target == 2;
  const Grid1& gown = isFg ? gf : gb;
  const Eigen::ArrayXd& wown = isFg ? wf : wb;
  const double pOwn = isFg ? p1 : p0;
  const double zOther = isFg ? Zb : Zf;
  const int n = static_cast<int>(gown.x.size());
  Eigen::ArrayXd lik(n);
  for (int i = 0; i < n; ++i) {
    lik(i) = (wz * (-0.5 * (gown.x(i) - gz.x).square() / vg).exp()).sum() /
             std::sqrt(2 * std::numbers::pi * vg) * gz.step / (wz.sum() * gz.step);
  }
  const Eigen::ArrayXd w = wown * (pOwn * lik + (1 - pOwn) * zOther);
  return scalarTilted(gown.x, w);
}

TiltedMoments impliedTiltedMoments(const Message& message, const Message& incoming) {
  Message tilted = isUniform(incoming) ? message : multiply(message, incoming);
  TiltedMoments t;
  if (const auto* b = std::get_if<Bernoulli>(&tilted)) {
    t.mean = Eigen::VectorXd::Zero(1);
    t.cov = Eigen::MatrixXd::Zero(1, 1);
    t.bernoulliP = b->probability();
    return t;
  }
  const Moments mo = moments(tilted);
  t.mean = mo.first;
  t.cov = mo.second - mo.first * mo.first.transpose();
  return t;
}

ChainPosterior chainClosedForm(double wMean, double wVar, double bMean, double bVar,
                               double noiseVar, double x) {
  Eigen::Matrix2d K;
  K << 1.0 / wVar + 1.0 / noiseVar, 1.0 / noiseVar, 1.0 / noiseVar,
      1.0 / bVar + 1.0 / noiseVar;
  Eigen::Vector2d h(wMean / wVar + x / noiseVar, bMean / bVar + x / noiseVar);
  const Eigen::Matrix2d cov = K.inverse();
  const Eigen::Vector2d mean = cov * h;
  ChainPosterior p;
  p.wMean = mean(0);
  p.wVar = cov(0, 0);
  p.bMean = mean(1);
  p.bVar = cov(1, 1);
  p.zMean = mean(0) + mean(1);
  p.zVar = cov(0, 0) + cov(1, 1) + 2 * cov(0, 1);
  return p;
}

CircleFit kasaCircleFit(const std::vector<Eigen::Vector2d>& points) {
  const int n = static_cast<int>(points.size());
  if (n < 3) throw std::invalid_argument("kasa fit: need at least 3 points");
  Eigen::MatrixXd A(n, 3);
  Eigen::VectorXd rhs(n);
  for (int i = 0; i < n; ++i) {
    A(i, 0) = 2 * points[i](0);
    A(i, 1) = 2 * points[i](1);
    A(i, 2) = 1.0;
    rhs(i) = points[i].squaredNorm();
  }
  const Eigen::Vector3d sol = A.colPivHouseholderQr().solve(rhs);
  CircleFit fit;
  fit.center = sol.head<2>();
  fit.radius = std::sqrt(std::max(0.0, sol(2) + sol.head<2>().squaredNorm()));
  return fit;
}

namespace {

double relErr(const TiltedMoments& impl, const TiltedMoments& oracle) {
  if (oracle.bernoulliP >= 0) {
    return std::abs(impl.bernoulliP - oracle.bernoulliP) /
           std::max(1e-6, std::max(oracle.bernoulliP, 1 - oracle.bernoulliP));
  }
  const double meanScale = std::max(1.0, oracle.mean.lpNorm<Eigen::Infinity>());
  const double covScale = std::max(1e-6, oracle.cov.lpNorm<Eigen::Infinity>());
  const double em = (impl.mean - oracle.mean).lpNorm<Eigen::Infinity>() / meanScale;
  const double ec = (impl.cov - oracle.cov).lpNorm<Eigen::Infinity>() / covScale;
  return std::max(em, ec);
}

}  // namespace

OracleReport checkRotationOracle(int instances, double tol, std::uint64_t seed,
                                 int gridN) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const FactorKind kind = FactorKind::rotation(1e-4);
  const QuadratureSpec quad;
  OracleReport report;
  report.name = "rotation-vs-grid";
  report.instances = instances;
  for (int it = 0; it < instances; ++it) {
    const double muA = -std::numbers::pi + 2 * std::numbers::pi * u(rng);
    const double sdA = 0.05 + 0.25 * u(rng);
    const double muR = 0.5 + 1.5 * u(rng);
    const double sdR = 0.05 + 0.2 * u(rng);
    std::vector<Message> in(3, Message(Gaussian::uniform()));
    in[1] = Gaussian::fromMeanVariance(muA, sdA * sdA);
    in[2] = Gaussian::fromMeanVariance(muR, sdR * sdR);
    const bool pProper = u(rng) > 0.3;
    if (pProper) {
      // Point message roughly consistent with the angle/radius messages, and
      // wide enough that a 9-node rule resolves the tilt.
      const Eigen::Vector2d g(muR * std::sin(muA), muR * std::cos(muA));
      Eigen::Vector2d mu = g + 0.3 * Eigen::Vector2d(u(rng) - 0.5, u(rng) - 0.5);
      const double sd = std::max(0.2, muR * sdA) + 0.3 * u(rng);
      in[0] = MvGaussian::fromMeanCovariance(mu, sd * sd * Eigen::Matrix2d::Identity());
    } else {
      in[0] = MvGaussian::uniform(2);
    }
    for (int target = 0; target < 3; ++target) {
      if (!pProper && target != 0) continue;  // message is uniform by construction
      const FactorResult res = factorMessage(kind, InferenceMode::EP, quad, in, target);
      if (res.skip) continue;
      const TiltedMoments impl = impliedTiltedMoments(res.msg, in[target]);
      const TiltedMoments oracle = rotationGridOracle(kind, in, target, gridN);
      report.maxRelativeError = std::max(report.maxRelativeError, relErr(impl, oracle));
    }
  }
  report.pass = report.maxRelativeError <= tol;
  return report;
}

OracleReport checkBoxOracle(int instances, double tol, std::uint64_t seed, int gridN) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const QuadratureSpec quad;
  OracleReport report;
  report.name = "box-vs-grid";
  report.instances = instances;
  for (int it = 0; it < instances; ++it) {
    const Eigen::Vector2d pixel(3 * (u(rng) - 0.5), 3 * (u(rng) - 0.5));
    const FactorKind kind = FactorKind::boxMembership(pixel, 0.05);
    std::vector<Message> in(3, Message(Gaussian::uniform()));
    in[0] = Bernoulli::fromProbability(0.05 + 0.9 * u(rng));
    Eigen::Vector2d cMean(2 * (u(rng) - 0.5), 2 * (u(rng) - 0.5));
    const double sdX = 0.2 + 0.6 * u(rng);
    const double sdY = 0.2 + 0.6 * u(rng);
    Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
    cov(0, 0) = sdX * sdX;
    cov(1, 1) = sdY * sdY;
    in[1] = MvGaussian::fromMeanCovariance(cMean, cov);
    const double muL = 1.0 + 2.0 * u(rng);
    const double sdL = 0.2 + 0.4 * u(rng);
    in[2] = Gaussian::fromMeanVariance(muL, sdL * sdL);
    for (int target = 0; target < 3; ++target) {
      const FactorResult res = factorMessage(kind, InferenceMode::EP, quad, in, target);
      if (res.skip) continue;
      const TiltedMoments impl = impliedTiltedMoments(res.msg, in[target]);
      const TiltedMoments oracle = boxGridOracle(kind, in, target, gridN);
      report.maxRelativeError = std::max(report.maxRelativeError, relErr(impl, oracle));
    }
  }
  report.pass = report.maxRelativeError <= tol;
  return report;
}

OracleReport checkGateOracle(int instances, double tol, std::uint64_t seed, int gridN) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const QuadratureSpec quad;
  OracleReport report;
  report.name = "gate-vs-grid";
  report.instances = instances;
  for (int it = 0; it < instances; ++it) {
    const FactorKind kind = FactorKind::gate(1e-4 + 0.005 * u(rng));
    std::vector<Message> in(4, Message(Gaussian::uniform()));
    in[1] = Bernoulli::fromProbability(0.05 + 0.9 * u(rng));
    if (u(rng) < 0.3) {
      in[0] = PointMass::at(u(rng));
    } else {
      in[0] = Gaussian::fromMeanVariance(u(rng), 0.01 + 0.04 * u(rng));
    }
    in[2] = Gaussian::fromMeanVariance(0.5 + 0.5 * u(rng), 0.01 + 0.04 * u(rng));
    in[3] = Gaussian::fromMeanVariance(0.5 * u(rng), 0.01 + 0.04 * u(rng));
    for (int target = 0; target < 4; ++target) {
      if (target == 0 && std::holds_alternative<PointMass>(in[0])) continue;
      const FactorResult res = factorMessage(kind, InferenceMode::EP, quad, in, target);
      if (res.skip) continue;
      const TiltedMoments impl = impliedTiltedMoments(res.msg, in[target]);
      const TiltedMoments oracle = gateGridOracle(kind, in, target, gridN);
      report.maxRelativeError = std::max(report.maxRelativeError, relErr(impl, oracle));
    }
  }
  report.pass = report.maxRelativeError <= tol;
  return report;
}

}  // namespace conmp
