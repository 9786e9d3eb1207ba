#pragma once

// Test-only generators and independent oracles shared by the unit and
// acceptance suites. Everything here stays independent of the library
// implementation paths it is used to check.

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "surrex/common.hpp"
#include "surrex/evidence.hpp"
#include "surrex/matching.hpp"
#include "surrex/survival.hpp"

namespace synthetic {

using namespace surrex;

// --------------------------- evidence fixtures -------------------------------

struct DhTruth {
  double lambda0 = 0.0;
  double lambda1 = 0.7;
  double psi2_sq = 0.01;
  double delta1_mean = -0.35;
  double delta1_sd = 0.3;
  double se1 = 0.08;
  double se2 = 0.08;
  double rho_w = 0.3;  // recorded as fixed in the records
};

// Bivariate-normal draw with correlation rho.
inline void bvn_draw(Rng& rng, double rho, double& z1, double& z2) {
  z1 = rng.normal();
  z2 = rho * z1 + std::sqrt(1.0 - rho * rho) * rng.normal();
}

inline std::vector<StudyRecord> make_dh_records(int n, const DhTruth& t,
                                                std::uint64_t seed,
                                                StudyClass cls = StudyClass::Rct) {
  Rng rng(seed);
  std::vector<StudyRecord> records;
  for (int i = 0; i < n; ++i) {
    const double d1 = t.delta1_mean + t.delta1_sd * rng.normal();
    const double d2 =
        t.lambda0 + t.lambda1 * d1 + std::sqrt(t.psi2_sq) * rng.normal();
    double z1, z2;
    bvn_draw(rng, t.rho_w, z1, z2);
    StudyRecord r;
    r.study_id = "S" + std::to_string(i + 1);
    r.label = r.study_id;
    r.evidence.cls = cls;
    if (cls == StudyClass::MatchedSrwe) {
      r.evidence.source_treatment = r.study_id + "t";
      r.evidence.source_control = r.study_id + "c";
    }
    r.effects.y1 = d1 + t.se1 * z1;
    r.effects.y2 = d2 + t.se2 * z2;
    r.effects.se1 = t.se1;
    r.effects.se2 = t.se2;
    r.effects.rho_w = t.rho_w;
    r.source = "reported";
    records.push_back(std::move(r));
  }
  return records;
}

struct PnfTruth {
  double d1 = -0.36;
  double lambda0 = 0.0;
  double tau1 = 0.27;
  double tau2 = 0.21;
  double rho = 0.75;
  double se1 = 0.08;
  double se2 = 0.08;
  double rho_w = 0.3;
};

inline std::vector<StudyRecord> make_pnf_records(int n, const PnfTruth& t,
                                                 std::uint64_t seed,
                                                 StudyClass cls = StudyClass::Rct) {
  Rng rng(seed);
  const double lam1 = t.tau2 / t.tau1 * t.rho;
  const double psi2 = std::sqrt(
      std::max(0.0, t.tau2 * t.tau2 - lam1 * lam1 * t.tau1 * t.tau1));
  std::vector<StudyRecord> records;
  for (int i = 0; i < n; ++i) {
    const double d1i = t.d1 + t.tau1 * rng.normal();
    const double d2i = t.lambda0 + lam1 * d1i + psi2 * rng.normal();
    double z1, z2;
    bvn_draw(rng, t.rho_w, z1, z2);
    StudyRecord r;
    r.study_id = "P" + std::to_string(i + 1);
    r.label = r.study_id;
    r.evidence.cls = cls;
    if (cls == StudyClass::MatchedSrwe) {
      r.evidence.source_treatment = r.study_id + "t";
      r.evidence.source_control = r.study_id + "c";
    }
    r.effects.y1 = d1i + t.se1 * z1;
    r.effects.y2 = d2i + t.se2 * z2;
    r.effects.se1 = t.se1;
    r.effects.se2 = t.se2;
    r.effects.rho_w = t.rho_w;
    r.source = "reported";
    records.push_back(std::move(r));
  }
  return records;
}

// y2 = y1 exactly with equal tiny SEs; the identity relationship.
inline std::vector<StudyRecord> make_identity_records(int n, double se,
                                                      std::uint64_t seed) {
  Rng rng(seed);
  std::vector<StudyRecord> records;
  for (int i = 0; i < n; ++i) {
    const double y = -0.8 + 1.2 * rng.uniform();
    StudyRecord r;
    r.study_id = "I" + std::to_string(i + 1);
    r.label = r.study_id;
    r.evidence.cls = StudyClass::Rct;
    r.effects = {y, se, y, se, 0.0};
    r.source = "reported";
    records.push_back(std::move(r));
  }
  return records;
}

// --------------------------- matching oracle ---------------------------------

// Sequential-minimum pairing by repeated full-matrix scan: at each step pick
// the smallest remaining candidate entry (lexicographic tie-break), retire
// both arms. Independent of the library's sort-based greedy implementation.
inline MatchResult brute_force_match(std::span<const ArmSummary> treatment,
                                     std::span<const ArmSummary> control,
                                     std::span<const CovariateSpec> specs,
                                     double threshold) {
  struct Entry {
    double d;
    std::string t, c;
    bool used = false;
  };
  std::vector<Entry> entries;
  for (const auto& t : treatment)
    for (const auto& c : control) {
      const double d = distance_total(specs, t, c);
      if (d <= threshold) entries.push_back({d, t.arm_id, c.arm_id});
    }
  MatchResult result;
  result.threshold = threshold;
  result.candidate_count = static_cast<int>(entries.size());
  std::set<std::string> used;
  while (true) {
    const Entry* best = nullptr;
    for (const auto& e : entries) {
      if (used.count(e.t) || used.count(e.c)) continue;
      if (!best || e.d < best->d ||
          (e.d == best->d &&
           (e.t < best->t || (e.t == best->t && e.c < best->c))))
        best = &e;
    }
    if (!best) break;
    used.insert(best->t);
    used.insert(best->c);
    result.pairs.push_back({best->t, best->c, best->d});
  }
  return result;
}

inline ArmSummary random_arm(Rng& rng, std::span<const CovariateSpec> specs,
                             const std::string& id,
                             ArmSummary::Role role) {
  ArmSummary arm;
  arm.arm_id = id;
  arm.study_id = id;
  arm.role = role;
  for (const auto& s : specs) {
    if (s.kind == CovariateSpec::Kind::Proportion)
      arm.values[s.name] = rng.uniform();
    else
      arm.values[s.name] = rng.uniform(s.lo, s.hi);
  }
  return arm;
}

// --------------------------- survival truth ----------------------------------

struct SurvivalTruth {
  PseudoIpd ipd;                // the generating subjects
  DigitizedCurve curve;         // KM sampled at grid times
  std::optional<RiskTable> risk;
};

// Simulates a tied-event survival process the way reconstructed IPD looks:
// deaths happen at up to max_steps distinct times (per-step hazard from the
// exponential rate over the gap), censorings fall uniformly between steps and
// the survivors are cut administratively at follow_up. The digitised curve
// holds the true KM value at every step time; risk tables, when requested,
// tabulate the true at-risk counts at five regular ticks.
inline SurvivalTruth simulate_survival(Rng& rng, int n, double event_rate,
                                       double censor_fraction, double follow_up,
                                       int max_steps, bool with_risk_table,
                                       int arm_label = 0) {
  const int steps = std::max(1, max_steps);
  std::vector<double> step_times;
  for (int m = 0; m < steps; ++m)
    step_times.push_back(rng.uniform(0.05 * follow_up, 0.97 * follow_up));
  std::sort(step_times.begin(), step_times.end());

  SurvivalTruth truth;
  int alive = n;
  int events = 0;
  double prev_t = 0.0;
  // per-gap censoring probability that spends censor_fraction over all gaps
  const double q = censor_fraction / static_cast<double>(steps + 1);
  for (double t : step_times) {
    int censored_here = 0;
    for (int i = 0; i < alive; ++i)
      if (q > 0.0 && rng.uniform() < q) ++censored_here;
    for (int c = 0; c < censored_here; ++c)
      truth.ipd.subjects.push_back(
          {rng.uniform(prev_t + 1e-9 * follow_up, t), 0, arm_label});
    alive -= censored_here;

    const double p = 1.0 - std::exp(-event_rate * (t - prev_t) / follow_up);
    int deaths = 0;
    for (int i = 0; i < alive; ++i)
      if (rng.uniform() < p) ++deaths;
    for (int d = 0; d < deaths; ++d)
      truth.ipd.subjects.push_back({t, 1, arm_label});
    alive -= deaths;
    events += deaths;
    prev_t = t;
  }
  for (int i = 0; i < alive; ++i)
    truth.ipd.subjects.push_back({follow_up, 0, arm_label});

  const auto km = km_curve(truth.ipd.subjects);
  truth.curve.n_start = n;
  truth.curve.total_events = events;
  for (double t : step_times)
    truth.curve.points.push_back({t, km_survival_at(km, t)});
  truth.curve.points.push_back({follow_up, km_survival_at(km, follow_up)});

  if (with_risk_table) {
    RiskTable table;
    const int k_intervals = 4;
    for (int k = 0; k <= k_intervals; ++k) {
      const double t = follow_up * static_cast<double>(k) / k_intervals;
      int at_risk = 0;
      for (const auto& s : truth.ipd.subjects)
        if (s.time >= t) ++at_risk;
      if (k == 0) at_risk = n;  // by definition at time 0
      table.entries.push_back({t, at_risk});
    }
    truth.risk = std::move(table);
  }
  return truth;
}

// Two exponential arms with a known hazard ratio, no censoring.
inline std::pair<PseudoIpd, PseudoIpd> exponential_two_arm(int n_per_arm,
                                                           double hr,
                                                           std::uint64_t seed) {
  Rng rng(seed);
  PseudoIpd treated, control;
  for (int i = 0; i < n_per_arm; ++i)
    treated.subjects.push_back({rng.exponential(hr), 1, 1});
  for (int i = 0; i < n_per_arm; ++i)
    control.subjects.push_back({rng.exponential(1.0), 1, 0});
  return {std::move(treated), std::move(control)};
}

}  // namespace synthetic
