#include <algorithm>
#include <cmath>

#include "surrex/common.hpp"
#include "surrex/survival.hpp"

namespace surrex {

namespace {

// Counts at one distinct event time: events and at-risk subjects by arm.
struct EventBlock {
  int d1 = 0;  // treated events
  int d0 = 0;
  int n1 = 0;  // treated at risk
  int n0 = 0;
};

struct Objective {
  double loglik = 0.0;
  double score = 0.0;
  double info = 0.0;
};

// Efron-adjusted partial likelihood for a binary covariate. With x in {0,1},
// S2 terms coincide with S1 terms so the information is sum of p(1-p).
Objective evaluate(const std::vector<EventBlock>& blocks, double beta) {
  Objective obj;
  const double eb = std::exp(beta);
  for (const auto& b : blocks) {
    const int d = b.d1 + b.d0;
    const double s0 = b.n0 + b.n1 * eb;
    const double s1 = b.n1 * eb;
    const double s0d = b.d0 + b.d1 * eb;
    const double s1d = b.d1 * eb;
    obj.loglik += beta * b.d1;
    for (int l = 0; l < d; ++l) {
      const double frac = static_cast<double>(l) / d;
      const double denom = s0 - frac * s0d;
      const double num = s1 - frac * s1d;
      obj.loglik -= std::log(denom);
      const double p = num / denom;
      obj.score -= p;
      obj.info += p * (1.0 - p);
    }
    obj.score += b.d1;
  }
  return obj;
}

std::vector<EventBlock> build_blocks(std::vector<Subject> pooled) {
  std::sort(pooled.begin(), pooled.end(),
            [](const Subject& a, const Subject& b) { return a.time < b.time; });
  std::vector<EventBlock> blocks;
  std::size_t i = 0;
  while (i < pooled.size()) {
    const double t = pooled[i].time;
    EventBlock blk;
    // at risk: everyone with time >= t
    for (std::size_t k = i; k < pooled.size(); ++k) {
      if (pooled[k].arm == 1) ++blk.n1;
      else ++blk.n0;
    }
    std::size_t j = i;
    while (j < pooled.size() && pooled[j].time == t) {
      if (pooled[j].event == 1) {
        if (pooled[j].arm == 1) ++blk.d1;
        else ++blk.d0;
      }
      ++j;
    }
    if (blk.d1 + blk.d0 > 0) blocks.push_back(blk);
    i = j;
  }
  return blocks;
}

constexpr int kMaxIterations = 50;
constexpr int kMaxHalvings = 10;
constexpr double kScoreTol = 1e-8;
constexpr double kBetaDivergence = 15.0;

}  // namespace

HazardFit fit_cox(const PseudoIpd& treated, const PseudoIpd& control) {
  if (treated.subjects.empty() || control.subjects.empty())
    throw ValidationError("fit_cox: both arms must be non-empty");

  std::vector<Subject> pooled;
  pooled.reserve(treated.subjects.size() + control.subjects.size());
  for (auto s : treated.subjects) {
    s.arm = 1;
    pooled.push_back(s);
  }
  for (auto s : control.subjects) {
    s.arm = 0;
    pooled.push_back(s);
  }
  int n_events = 0;
  for (const auto& s : pooled) n_events += s.event;
  if (n_events == 0)
    throw ValidationError("fit_cox: no events in the pooled data");

  const auto blocks = build_blocks(std::move(pooled));
  const double direction0 = evaluate(blocks, 0.0).score;

  double beta = 0.0;
  Objective cur = evaluate(blocks, beta);
  int iter = 0;
  while (iter < kMaxIterations) {
    if (cur.info < 1e-10 || std::fabs(beta) > kBetaDivergence)
      throw NumericError(
          std::string("fit_cox: monotone partial likelihood, logHR diverges "
                      "toward ") +
          (direction0 > 0 ? "+inf" : "-inf"));
    if (std::fabs(cur.score) < kScoreTol) break;
    const double step = cur.score / cur.info;
    double scale = 1.0;
    Objective next;
    double beta_next = beta;
    for (int h = 0; h <= kMaxHalvings; ++h) {
      beta_next = beta + scale * step;
      next = evaluate(blocks, beta_next);
      if (next.loglik >= cur.loglik || !std::isfinite(cur.loglik)) break;
      scale *= 0.5;
    }
    beta = beta_next;
    cur = next;
    ++iter;
  }
  if (std::fabs(cur.score) >= kScoreTol)
    throw NumericError("fit_cox: Newton iteration failed to converge after " +
                       std::to_string(kMaxIterations) + " iterations");

  HazardFit fit;
  fit.loghr = beta;
  fit.se = 1.0 / std::sqrt(cur.info);
  fit.n_events = n_events;
  fit.iterations = iter;
  fit.converged = true;
  return fit;
}

namespace {

const DigitizedCurve& require_curve(const EndpointArm& arm,
                                    const char* endpoint, const char* side) {
  if (!arm.curve)
    throw ValidationError(std::string("missing ") + endpoint + " curve for " +
                          side + " arm");
  return *arm.curve;
}

}  // namespace

EffectPair derive_effect_pair(const EndpointPair& pfs, const EndpointPair& os,
                              std::vector<std::string>* warnings) {
  EffectPair pair;
  const struct {
    const char* name;
    const EndpointPair& data;
    double& y;
    double& se;
  } endpoints[] = {{"PFS", pfs, pair.y1, pair.se1},
                   {"OS", os, pair.y2, pair.se2}};
  for (const auto& ep : endpoints) {
    const auto& tc = require_curve(ep.data.treatment, ep.name, "treatment");
    const auto& cc = require_curve(ep.data.control, ep.name, "control");
    auto treated = reconstruct_ipd(tc, ep.data.treatment.risk, 1);
    auto ctrl = reconstruct_ipd(cc, ep.data.control.risk, 0);
    if (warnings) {
      for (auto& w : treated.warnings)
        warnings->push_back(std::string(ep.name) + " treatment: " + w);
      for (auto& w : ctrl.warnings)
        warnings->push_back(std::string(ep.name) + " control: " + w);
    }
    const HazardFit fit = fit_cox(treated.ipd, ctrl.ipd);
    ep.y = fit.loghr;
    ep.se = fit.se;
  }
  return pair;
}

}  // namespace surrex
