#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "surrex/evidence.hpp"

namespace surrex {

struct Subject {
  double time = 0.0;
  int event = 0;  // 1 event, 0 censored
  int arm = 0;    // 1 treatment, 0 control
};

struct PseudoIpd {
  std::vector<Subject> subjects;
};

struct KmPoint {
  double time = 0.0;
  double survival = 1.0;
};

// Kaplan-Meier step values at event times for a single arm. Censorings tied
// with events count in the risk set at that time.
std::vector<KmPoint> km_curve(std::span<const Subject> subjects);
double km_survival_at(std::span<const KmPoint> curve, double t);

// Digitised survival-curve coordinates for one arm.
struct DigitizedCurve {
  std::vector<KmPoint> points;  // strictly increasing times
  int n_start = 0;              // patients at risk at time 0
  std::optional<int> total_events;
};

struct RiskTable {
  struct Entry {
    double time = 0.0;
    int n_at_risk = 0;
  };
  std::vector<Entry> entries;  // strictly increasing times starting at 0
};

void validate_curve(const DigitizedCurve& curve);
void validate_risk_table(const RiskTable& risk);

struct ReconstructResult {
  PseudoIpd ipd;
  std::vector<std::string> warnings;
};

// Interval-by-interval allocation of events and censorings. The KM estimate
// of the output reproduces each digitised survival value to within the
// rounding resolution of the risk set; risk-table counts are met exactly when
// arithmetically feasible. Without a risk table, total_events anchors the
// event count and censoring is spread uniformly within intervals.
ReconstructResult reconstruct_ipd(const DigitizedCurve& curve,
                                  const std::optional<RiskTable>& risk,
                                  int arm_label = 0);

struct HazardFit {
  double loghr = 0.0;
  double se = 0.0;
  int n_events = 0;
  int iterations = 0;
  bool converged = false;
};

// Cox proportional hazards with a single treatment-arm covariate: Efron tie
// handling, damped Newton (max 50 iterations, 10 halvings), convergence when
// |score| < 1e-8, se from the inverse observed information.
HazardFit fit_cox(const PseudoIpd& treated, const PseudoIpd& control);

struct EndpointArm {
  std::optional<DigitizedCurve> curve;
  std::optional<RiskTable> risk;
};

struct EndpointPair {
  EndpointArm treatment;
  EndpointArm control;
};

// Reconstructs both arms for both endpoints and fits one Cox model per
// endpoint; rho_w is left unset (estimated downstream).
EffectPair derive_effect_pair(const EndpointPair& pfs, const EndpointPair& os,
                              std::vector<std::string>* warnings = nullptr);

// Curve CSV: time,survival. Risk-table CSV: time,n_at_risk.
DigitizedCurve read_curve_csv(const std::string& path, int n_start,
                              std::optional<int> total_events);
RiskTable read_risk_csv(const std::string& path);

}  // namespace surrex
