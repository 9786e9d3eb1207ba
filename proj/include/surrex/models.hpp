#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "surrex/evidence.hpp"
#include "surrex/mcmc.hpp"

namespace surrex::models {

enum class ModelKind { DanielsHughes, Pnf, PnfBias };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& s);  // dh|pnf|pnf-bias

// Links between the (tau1, tau2, rho) parameterisation and the conditional
// regression parameters: lambda1 = (tau2/tau1)*rho and
// psi2_sq = tau2^2 - lambda1^2*tau1^2 (non-negative by construction).
double pnf_lambda1(double tau1, double tau2, double rho);
double pnf_psi2_sq(double tau1, double tau2, double rho);

struct FitOptions {
  // vague-prior defaults; presets widen or narrow them for sensitivity runs
  double normal_prior_variance = 1e4;
  double psi2_upper = 2.0;  // psi2 ~ Unif(0, psi2_upper)
  double tau_upper = 2.0;   // tau1, tau2 ~ Unif(0, tau_upper)
  double cond_var_bound = 0.05;
  double iqwig_bound = 0.85;
  bool pin_bias_to_zero = false;  // bias-model code path with zero bias
  bool compute_summaries = true;

  static FitOptions preset(const std::string& name);  // default|wide|narrow
};

struct StudyData {
  std::string id;
  StudyClass cls = StudyClass::Rct;
  double y1 = 0.0, se1 = 0.0, y2 = 0.0, se2 = 0.0;
  std::optional<double> rho_w;
  bool y2_missing = false;
};

struct SurrogacyFit {
  ModelKind kind = ModelKind::DanielsHughes;
  FitOptions options;
  std::vector<StudyData> studies;
  mcmc::PosteriorSample sample;
  std::vector<mcmc::PosteriorSummary> summaries;  // when compute_summaries
  mcmc::ConvergenceReport convergence;

  // row set of the parameter-summary table, in report order
  std::vector<std::string> report_names() const;
  const mcmc::PosteriorSummary& summary_of(const std::string& name) const;
};

// Daniels & Hughes: fixed independent true surrogate effects delta1[i], a
// linear relationship for the true final-outcome effect and the bivariate
// within-study likelihood with the final-outcome residual variance folded in.
SurrogacyFit fit_dh(const EvidenceBase& base, const mcmc::SamplerConfig& cfg,
                    const FitOptions& options = {},
                    const std::vector<bool>& y2_missing = {});

// BRMA product normal formulation on (tau1, tau2, rho) with the exchangeable
// random effects marginalised out analytically; lambda1, psi1_sq, psi2_sq and
// r_squared are derived at every retained draw. With bias_adjust, cRWE and
// matched-sRWE likelihood means carry additive bias terms.
SurrogacyFit fit_pnf(const EvidenceBase& base, const mcmc::SamplerConfig& cfg,
                     bool bias_adjust, const FitOptions& options = {},
                     const std::vector<bool>& y2_missing = {});

SurrogacyFit fit_model(ModelKind kind, const EvidenceBase& base,
                       const mcmc::SamplerConfig& cfg,
                       const FitOptions& options = {},
                       const std::vector<bool>& y2_missing = {});

struct SurrogacyVerdict {
  bool intercept_zero = false;   // CrI(lambda0) contains 0
  bool slope_nonzero = false;    // CrI(lambda1) excludes 0
  bool cond_var_small = false;   // posterior median psi2_sq below bound
  std::optional<bool> iqwig_pass;  // PNF only: lower CrI of |rho| >= bound
  std::string overall;           // pass | inconclusive | fail
};

SurrogacyVerdict evaluate_surrogacy(
    std::span<const mcmc::PosteriorSummary> summaries,
    const FitOptions& bounds, ModelKind kind);

struct Prediction {
  double mean = 0.0;
  double sd = 0.0;
  double lo = 0.0;  // mean - 1.96 sd
  double hi = 0.0;
};

// Predicts the final-outcome logHR of a study from its surrogate effect.
// se2_new supplies the new study's within-study sd on the final outcome (in
// cross-validation it is the held-out study's observed value).
Prediction predict_final_effect(const SurrogacyFit& fit, double y1_new,
                                double se1_new, std::optional<double> se2_new,
                                StudyClass cls = StudyClass::Rct);

// Parameter-summary table (report rows): adds a column recommending mean or
// median per the skewness rule.
std::string fit_summary_csv_text(const SurrogacyFit& fit);
std::string verdict_json_text(const SurrogacyVerdict& verdict,
                              const SurrogacyFit& fit);

}  // namespace surrex::models
