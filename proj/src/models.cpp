#include "surrex/models.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include <json.hpp>

#include "surrex/csv.hpp"

namespace surrex::models {

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::DanielsHughes: return "dh";
    case ModelKind::Pnf: return "pnf";
    case ModelKind::PnfBias: return "pnf-bias";
  }
  return "?";
}

ModelKind model_kind_from_string(const std::string& s) {
  if (s == "dh") return ModelKind::DanielsHughes;
  if (s == "pnf") return ModelKind::Pnf;
  if (s == "pnf-bias") return ModelKind::PnfBias;
  throw ValidationError("unknown model '" + s +
                        "' (expected dh, pnf or pnf-bias)");
}

double pnf_lambda1(double tau1, double tau2, double rho) {
  return tau2 / tau1 * rho;
}

double pnf_psi2_sq(double tau1, double tau2, double rho) {
  const double lam1 = pnf_lambda1(tau1, tau2, rho);
  return std::max(0.0, tau2 * tau2 - lam1 * lam1 * tau1 * tau1);
}

FitOptions FitOptions::preset(const std::string& name) {
  FitOptions opt;
  if (name == "default") return opt;
  if (name == "wide") {
    opt.normal_prior_variance = 1e6;
    opt.psi2_upper = 5.0;
    opt.tau_upper = 5.0;
    return opt;
  }
  if (name == "narrow") {
    opt.normal_prior_variance = 1e2;
    opt.psi2_upper = 1.0;
    opt.tau_upper = 1.0;
    return opt;
  }
  throw ValidationError("unknown prior preset '" + name +
                        "' (expected default, wide or narrow)");
}

namespace {

constexpr double kVarFloor = 1e-12;

double log_normal_pdf(double y, double mean, double var) {
  var = std::max(var, kVarFloor);
  const double d = y - mean;
  return -0.5 * (std::log(2.0 * M_PI * var) + d * d / var);
}

double log_bvn_pdf(double y1, double y2, double m1, double m2, double v11,
                   double v12, double v22) {
  const double det = std::max(v11 * v22 - v12 * v12, kVarFloor);
  const double r1 = y1 - m1;
  const double r2 = y2 - m2;
  const double quad =
      (r1 * r1 * v22 - 2.0 * r1 * r2 * v12 + r2 * r2 * v11) / det;
  return -std::log(2.0 * M_PI) - 0.5 * std::log(det) - 0.5 * quad;
}

// Accumulates the Gaussian full conditional of a scalar that enters the
// likelihood mean linearly: y ~ N(a*x + b, V) per study.
struct ConjugateAccumulator {
  double precision;
  double weighted_sum = 0.0;

  explicit ConjugateAccumulator(double prior_variance)
      : precision(1.0 / prior_variance) {}

  void add_bivariate(double a1, double a2, double r1, double r2, double v11,
                     double v12, double v22) {
    const double det = std::max(v11 * v22 - v12 * v12, kVarFloor);
    precision += (a1 * a1 * v22 - 2.0 * a1 * a2 * v12 + a2 * a2 * v11) / det;
    weighted_sum +=
        (a1 * (v22 * r1 - v12 * r2) + a2 * (-v12 * r1 + v11 * r2)) / det;
  }

  void add_univariate(double a, double r, double var) {
    var = std::max(var, kVarFloor);
    precision += a * a / var;
    weighted_sum += a * r / var;
  }

  double draw(Rng& rng) const {
    const double mean = weighted_sum / precision;
    return mean + rng.normal() / std::sqrt(precision);
  }
};

std::vector<StudyData> make_study_data(const EvidenceBase& base,
                                       const std::vector<bool>& y2_missing) {
  if (base.size() < 3)
    throw ValidationError("fitting needs at least 3 studies, got " +
                          std::to_string(base.size()));
  if (!y2_missing.empty() && y2_missing.size() != base.size())
    throw ValidationError("y2_missing mask size does not match study count");
  std::vector<std::string> problems;
  std::vector<StudyData> studies;
  for (std::size_t i = 0; i < base.studies.size(); ++i) {
    const auto& r = base.studies[i];
    for (const auto& v : validate_effect_pair(r.effects))
      problems.push_back(r.study_id + ": " + v);
    StudyData s;
    s.id = r.study_id;
    s.cls = r.evidence.cls;
    s.y1 = r.effects.y1;
    s.se1 = r.effects.se1;
    s.y2 = r.effects.y2;
    s.se2 = r.effects.se2;
    s.rho_w = r.effects.rho_w;
    s.y2_missing = !y2_missing.empty() && y2_missing[i];
    studies.push_back(std::move(s));
  }
  if (!problems.empty()) {
    std::string msg = "invalid effect pairs:";
    for (const auto& p : problems) msg += " " + p + ";";
    throw ValidationError(msg);
  }
  return studies;
}

// Shared context for the model closures; owned by shared_ptr so the Model can
// outlive the builder scope.
struct DhContext {
  std::vector<StudyData> studies;
  FitOptions opt;
  // parameter layout
  int i_lambda0 = 0, i_lambda1 = 1, i_psi2 = 2, i_delta1 = 3;
  std::vector<int> i_rho_w;  // -1 where rho_w is fixed

  double rho_of(std::size_t s, mcmc::ParamView x) const {
    return i_rho_w[s] >= 0 ? x[i_rho_w[s]] : *studies[s].rho_w;
  }
};

mcmc::Model build_dh_model(std::shared_ptr<DhContext> ctx) {
  const auto& studies = ctx->studies;
  const auto n = studies.size();
  const double vp = ctx->opt.normal_prior_variance;

  mcmc::Model model;
  model.params.push_back({"lambda0", mcmc::PriorSpec::normal(0.0, vp), 0.0, 0.3});
  model.params.push_back({"lambda1", mcmc::PriorSpec::normal(0.0, vp), 0.0, 0.5});
  model.params.push_back(
      {"psi2", mcmc::PriorSpec::uniform(0.0, ctx->opt.psi2_upper), 0.2, 0.1});
  for (std::size_t s = 0; s < n; ++s)
    model.params.push_back({"delta1[" + studies[s].id + "]",
                            mcmc::PriorSpec::normal(0.0, vp), studies[s].y1,
                            std::max(studies[s].se1, 0.1)});
  ctx->i_rho_w.assign(n, -1);
  for (std::size_t s = 0; s < n; ++s) {
    if (studies[s].rho_w) continue;
    ctx->i_rho_w[s] = static_cast<int>(model.params.size());
    model.params.push_back({"rho_w[" + studies[s].id + "]",
                            mcmc::PriorSpec::uniform(0.0, 1.0), 0.5, 0.2});
  }

  for (std::size_t s = 0; s < n; ++s) {
    model.terms.push_back([ctx, s](mcmc::ParamView x) {
      const auto& st = ctx->studies[s];
      const double d1 = x[ctx->i_delta1 + static_cast<int>(s)];
      if (st.y2_missing) return log_normal_pdf(st.y1, d1, st.se1 * st.se1);
      const double rho = ctx->rho_of(s, x);
      const double psi2 = x[ctx->i_psi2];
      return log_bvn_pdf(st.y1, st.y2, d1, x[ctx->i_lambda0] + x[ctx->i_lambda1] * d1,
                         st.se1 * st.se1, rho * st.se1 * st.se2,
                         st.se2 * st.se2 + psi2 * psi2);
    });
  }

  model.param_terms.assign(model.params.size(), {});
  for (std::size_t s = 0; s < n; ++s) {
    model.param_terms[ctx->i_delta1 + s] = {static_cast<int>(s)};
    if (ctx->i_rho_w[s] >= 0)
      model.param_terms[ctx->i_rho_w[s]] = {static_cast<int>(s)};
  }
  // lambda0, lambda1, psi2 touch every study term (empty list means all)

  // conjugate draws for the normal-prior parameters
  model.gibbs[ctx->i_lambda0] = [ctx](mcmc::ParamView x, Rng& rng) {
    ConjugateAccumulator acc(ctx->opt.normal_prior_variance);
    for (std::size_t s = 0; s < ctx->studies.size(); ++s) {
      const auto& st = ctx->studies[s];
      if (st.y2_missing) continue;
      const double d1 = x[ctx->i_delta1 + static_cast<int>(s)];
      const double rho = ctx->rho_of(s, x);
      const double psi2 = x[ctx->i_psi2];
      acc.add_bivariate(0.0, 1.0, st.y1 - d1,
                        st.y2 - x[ctx->i_lambda1] * d1, st.se1 * st.se1,
                        rho * st.se1 * st.se2,
                        st.se2 * st.se2 + psi2 * psi2);
    }
    return acc.draw(rng);
  };
  model.gibbs[ctx->i_lambda1] = [ctx](mcmc::ParamView x, Rng& rng) {
    ConjugateAccumulator acc(ctx->opt.normal_prior_variance);
    for (std::size_t s = 0; s < ctx->studies.size(); ++s) {
      const auto& st = ctx->studies[s];
      if (st.y2_missing) continue;
      const double d1 = x[ctx->i_delta1 + static_cast<int>(s)];
      const double rho = ctx->rho_of(s, x);
      const double psi2 = x[ctx->i_psi2];
      acc.add_bivariate(0.0, d1, st.y1 - d1, st.y2 - x[ctx->i_lambda0],
                        st.se1 * st.se1, rho * st.se1 * st.se2,
                        st.se2 * st.se2 + psi2 * psi2);
    }
    return acc.draw(rng);
  };
  for (std::size_t s = 0; s < n; ++s) {
    model.gibbs[ctx->i_delta1 + static_cast<int>(s)] =
        [ctx, s](mcmc::ParamView x, Rng& rng) {
          const auto& st = ctx->studies[s];
          ConjugateAccumulator acc(ctx->opt.normal_prior_variance);
          if (st.y2_missing) {
            acc.add_univariate(1.0, st.y1, st.se1 * st.se1);
          } else {
            const double rho = ctx->rho_of(s, x);
            const double psi2 = x[ctx->i_psi2];
            acc.add_bivariate(1.0, x[ctx->i_lambda1], st.y1,
                              st.y2 - x[ctx->i_lambda0], st.se1 * st.se1,
                              rho * st.se1 * st.se2,
                              st.se2 * st.se2 + psi2 * psi2);
          }
          return acc.draw(rng);
        };
  }

  model.derived.push_back({"psi2_sq", [ctx](mcmc::ParamView x) {
                             const double p = x[ctx->i_psi2];
                             return p * p;
                           }});
  return model;
}

struct PnfContext {
  std::vector<StudyData> studies;
  FitOptions opt;
  bool bias = false;
  int i_d1 = 0, i_lambda0 = 1, i_tau1 = 2, i_tau2 = 3, i_rho = 4;
  int i_alpha1 = -1, i_alpha2 = -1, i_beta1 = -1, i_beta2 = -1;
  std::vector<int> i_rho_w;

  double rho_w_of(std::size_t s, mcmc::ParamView x) const {
    return i_rho_w[s] >= 0 ? x[i_rho_w[s]] : *studies[s].rho_w;
  }
  double bias1_of(std::size_t s, mcmc::ParamView x) const {
    if (studies[s].cls == StudyClass::Crwe && i_alpha1 >= 0) return x[i_alpha1];
    if (studies[s].cls == StudyClass::MatchedSrwe && i_beta1 >= 0)
      return x[i_beta1];
    return 0.0;
  }
  double bias2_of(std::size_t s, mcmc::ParamView x) const {
    if (studies[s].cls == StudyClass::Crwe && i_alpha2 >= 0) return x[i_alpha2];
    if (studies[s].cls == StudyClass::MatchedSrwe && i_beta2 >= 0)
      return x[i_beta2];
    return 0.0;
  }
  double lambda1_of(mcmc::ParamView x) const {
    return pnf_lambda1(x[i_tau1], x[i_tau2], x[i_rho]);
  }
  // marginal covariance of (Y1, Y2) for study s
  void cov_of(std::size_t s, mcmc::ParamView x, double& w11, double& w12,
              double& w22) const {
    const auto& st = studies[s];
    const double t1 = x[i_tau1], t2 = x[i_tau2];
    w11 = st.se1 * st.se1 + t1 * t1;
    w12 = rho_w_of(s, x) * st.se1 * st.se2 + x[i_rho] * t1 * t2;
    w22 = st.se2 * st.se2 + t2 * t2;
  }
};

mcmc::Model build_pnf_model(std::shared_ptr<PnfContext> ctx) {
  const auto& studies = ctx->studies;
  const auto n = studies.size();
  const double vp = ctx->opt.normal_prior_variance;

  double y1_mean = 0.0;
  for (const auto& s : studies) y1_mean += s.y1;
  y1_mean /= static_cast<double>(n);

  mcmc::Model model;
  model.params.push_back({"d1", mcmc::PriorSpec::normal(0.0, vp), y1_mean, 0.3});
  model.params.push_back({"lambda0", mcmc::PriorSpec::normal(0.0, vp), 0.0, 0.3});
  model.params.push_back(
      {"tau1", mcmc::PriorSpec::uniform(0.0, ctx->opt.tau_upper), 0.3, 0.15});
  model.params.push_back(
      {"tau2", mcmc::PriorSpec::uniform(0.0, ctx->opt.tau_upper), 0.3, 0.15});
  model.params.push_back({"rho", mcmc::PriorSpec::uniform(-1.0, 1.0), 0.0, 0.4});
  if (ctx->bias) {
    ctx->i_alpha1 = static_cast<int>(model.params.size());
    model.params.push_back({"alpha1", mcmc::PriorSpec::normal(0.0, vp), 0.0, 0.2});
    ctx->i_alpha2 = static_cast<int>(model.params.size());
    model.params.push_back({"alpha2", mcmc::PriorSpec::normal(0.0, vp), 0.0, 0.2});
    ctx->i_beta1 = static_cast<int>(model.params.size());
    model.params.push_back({"beta1", mcmc::PriorSpec::normal(0.0, vp), 0.0, 0.2});
    ctx->i_beta2 = static_cast<int>(model.params.size());
    model.params.push_back({"beta2", mcmc::PriorSpec::normal(0.0, vp), 0.0, 0.2});
  }
  ctx->i_rho_w.assign(n, -1);
  for (std::size_t s = 0; s < n; ++s) {
    if (studies[s].rho_w) continue;
    ctx->i_rho_w[s] = static_cast<int>(model.params.size());
    model.params.push_back({"rho_w[" + studies[s].id + "]",
                            mcmc::PriorSpec::uniform(0.0, 1.0), 0.5, 0.2});
  }

  for (std::size_t s = 0; s < n; ++s) {
    model.terms.push_back([ctx, s](mcmc::ParamView x) {
      const auto& st = ctx->studies[s];
      const double m1 = x[ctx->i_d1] + ctx->bias1_of(s, x);
      if (st.y2_missing) {
        const double t1 = x[ctx->i_tau1];
        return log_normal_pdf(st.y1, m1, st.se1 * st.se1 + t1 * t1);
      }
      const double lam1 = ctx->lambda1_of(x);
      const double m2 = x[ctx->i_lambda0] + lam1 * x[ctx->i_d1] +
                        ctx->bias2_of(s, x);
      double w11, w12, w22;
      ctx->cov_of(s, x, w11, w12, w22);
      return log_bvn_pdf(st.y1, st.y2, m1, m2, w11, w12, w22);
    });
  }

  model.param_terms.assign(model.params.size(), {});
  for (std::size_t s = 0; s < n; ++s)
    if (ctx->i_rho_w[s] >= 0)
      model.param_terms[ctx->i_rho_w[s]] = {static_cast<int>(s)};
  if (ctx->bias) {
    std::vector<int> crwe_terms, srwe_terms;
    for (std::size_t s = 0; s < n; ++s) {
      if (studies[s].cls == StudyClass::Crwe)
        crwe_terms.push_back(static_cast<int>(s));
      if (studies[s].cls == StudyClass::MatchedSrwe)
        srwe_terms.push_back(static_cast<int>(s));
    }
    model.param_terms[ctx->i_alpha1] = crwe_terms;
    model.param_terms[ctx->i_alpha2] = crwe_terms;
    model.param_terms[ctx->i_beta1] = srwe_terms;
    model.param_terms[ctx->i_beta2] = srwe_terms;
  }

  model.gibbs[ctx->i_d1] = [ctx](mcmc::ParamView x, Rng& rng) {
    ConjugateAccumulator acc(ctx->opt.normal_prior_variance);
    const double lam1 = ctx->lambda1_of(x);
    for (std::size_t s = 0; s < ctx->studies.size(); ++s) {
      const auto& st = ctx->studies[s];
      const double b1 = ctx->bias1_of(s, x);
      if (st.y2_missing) {
        const double t1 = x[ctx->i_tau1];
        acc.add_univariate(1.0, st.y1 - b1, st.se1 * st.se1 + t1 * t1);
        continue;
      }
      double w11, w12, w22;
      ctx->cov_of(s, x, w11, w12, w22);
      acc.add_bivariate(1.0, lam1, st.y1 - b1,
                        st.y2 - x[ctx->i_lambda0] - ctx->bias2_of(s, x), w11,
                        w12, w22);
    }
    return acc.draw(rng);
  };
  model.gibbs[ctx->i_lambda0] = [ctx](mcmc::ParamView x, Rng& rng) {
    ConjugateAccumulator acc(ctx->opt.normal_prior_variance);
    const double lam1 = ctx->lambda1_of(x);
    for (std::size_t s = 0; s < ctx->studies.size(); ++s) {
      const auto& st = ctx->studies[s];
      if (st.y2_missing) continue;
      double w11, w12, w22;
      ctx->cov_of(s, x, w11, w12, w22);
      acc.add_bivariate(0.0, 1.0, st.y1 - x[ctx->i_d1] - ctx->bias1_of(s, x),
                        st.y2 - lam1 * x[ctx->i_d1] - ctx->bias2_of(s, x), w11,
                        w12, w22);
    }
    return acc.draw(rng);
  };
  if (ctx->bias) {
    const auto bias_gibbs = [ctx](StudyClass cls, bool first_outcome) {
      return [ctx, cls, first_outcome](mcmc::ParamView x, Rng& rng) {
        ConjugateAccumulator acc(ctx->opt.normal_prior_variance);
        const double lam1 = ctx->lambda1_of(x);
        for (std::size_t s = 0; s < ctx->studies.size(); ++s) {
          const auto& st = ctx->studies[s];
          if (st.cls != cls) continue;
          const double other1 = first_outcome ? 0.0 : ctx->bias1_of(s, x);
          const double other2 = first_outcome ? ctx->bias2_of(s, x) : 0.0;
          if (st.y2_missing) {
            if (first_outcome) {
              const double t1 = x[ctx->i_tau1];
              acc.add_univariate(1.0, st.y1 - x[ctx->i_d1],
                                 st.se1 * st.se1 + t1 * t1);
            }
            continue;
          }
          double w11, w12, w22;
          ctx->cov_of(s, x, w11, w12, w22);
          const double r1 = st.y1 - x[ctx->i_d1] - other1;
          const double r2 = st.y2 - x[ctx->i_lambda0] - lam1 * x[ctx->i_d1] -
                            other2;
          if (first_outcome) acc.add_bivariate(1.0, 0.0, r1, r2, w11, w12, w22);
          else acc.add_bivariate(0.0, 1.0, r1, r2, w11, w12, w22);
        }
        return acc.draw(rng);
      };
    };
    model.gibbs[ctx->i_alpha1] = bias_gibbs(StudyClass::Crwe, true);
    model.gibbs[ctx->i_alpha2] = bias_gibbs(StudyClass::Crwe, false);
    model.gibbs[ctx->i_beta1] = bias_gibbs(StudyClass::MatchedSrwe, true);
    model.gibbs[ctx->i_beta2] = bias_gibbs(StudyClass::MatchedSrwe, false);
  }

  model.derived.push_back(
      {"lambda1", [ctx](mcmc::ParamView x) { return ctx->lambda1_of(x); }});
  model.derived.push_back({"psi1_sq", [ctx](mcmc::ParamView x) {
                             return x[ctx->i_tau1] * x[ctx->i_tau1];
                           }});
  model.derived.push_back({"psi2_sq", [ctx](mcmc::ParamView x) {
                             return pnf_psi2_sq(x[ctx->i_tau1], x[ctx->i_tau2],
                                                x[ctx->i_rho]);
                           }});
  model.derived.push_back({"r_squared", [ctx](mcmc::ParamView x) {
                             return x[ctx->i_rho] * x[ctx->i_rho];
                           }});
  model.derived.push_back({"abs_rho", [ctx](mcmc::ParamView x) {
                             return std::fabs(x[ctx->i_rho]);
                           }});
  model.derived.push_back({"d2_implied", [ctx](mcmc::ParamView x) {
                             return x[ctx->i_lambda0] +
                                    ctx->lambda1_of(x) * x[ctx->i_d1];
                           }});
  model.derived.push_back({"d2_studies", [ctx](mcmc::ParamView x) {
    // mean over studies of E[delta2_i | data, hyperparameters]
    const double lam1 = ctx->lambda1_of(x);
    const double mu2 = x[ctx->i_lambda0] + lam1 * x[ctx->i_d1];
    const double t1 = x[ctx->i_tau1], t2 = x[ctx->i_tau2];
    double total = 0.0;
    for (std::size_t s = 0; s < ctx->studies.size(); ++s) {
      const auto& st = ctx->studies[s];
      const double m1 = x[ctx->i_d1] + ctx->bias1_of(s, x);
      const double c1 = x[ctx->i_rho] * t1 * t2;
      if (st.y2_missing) {
        const double w11 = st.se1 * st.se1 + t1 * t1;
        total += mu2 + c1 / w11 * (st.y1 - m1);
        continue;
      }
      const double m2 = mu2 + ctx->bias2_of(s, x);
      double w11, w12, w22;
      ctx->cov_of(s, x, w11, w12, w22);
      const double det = std::max(w11 * w22 - w12 * w12, kVarFloor);
      const double r1 = st.y1 - m1, r2 = st.y2 - m2;
      const double c2 = t2 * t2;
      total += mu2 + (c1 * (w22 * r1 - w12 * r2) + c2 * (-w12 * r1 + w11 * r2)) /
                         det;
    }
    return total / static_cast<double>(ctx->studies.size());
  }});
  return model;
}

SurrogacyFit finish_fit(ModelKind kind, const FitOptions& options,
                        std::vector<StudyData> studies,
                        const mcmc::Model& model,
                        const mcmc::SamplerConfig& cfg) {
  SurrogacyFit fit;
  fit.kind = kind;
  fit.options = options;
  fit.studies = std::move(studies);
  fit.sample = mcmc::run_chains(model, cfg);
  if (options.compute_summaries) {
    fit.summaries = mcmc::summarize_all(fit.sample);
    fit.convergence = mcmc::check_convergence(fit.summaries);
  }
  return fit;
}

}  // namespace

SurrogacyFit fit_dh(const EvidenceBase& base, const mcmc::SamplerConfig& cfg,
                    const FitOptions& options,
                    const std::vector<bool>& y2_missing) {
  auto ctx = std::make_shared<DhContext>();
  ctx->studies = make_study_data(base, y2_missing);
  ctx->opt = options;
  const auto model = build_dh_model(ctx);
  return finish_fit(ModelKind::DanielsHughes, options, ctx->studies, model,
                    cfg);
}

SurrogacyFit fit_pnf(const EvidenceBase& base, const mcmc::SamplerConfig& cfg,
                     bool bias_adjust, const FitOptions& options,
                     const std::vector<bool>& y2_missing) {
  auto ctx = std::make_shared<PnfContext>();
  ctx->studies = make_study_data(base, y2_missing);
  ctx->opt = options;
  ctx->bias = bias_adjust && !options.pin_bias_to_zero;
  if (bias_adjust) {
    bool any_rwe = false;
    for (const auto& s : ctx->studies)
      if (s.cls != StudyClass::Rct) any_rwe = true;
    if (!any_rwe)
      throw ValidationError(
          "bias adjustment requires at least one non-RCT study");
  }
  const auto model = build_pnf_model(ctx);
  return finish_fit(bias_adjust ? ModelKind::PnfBias : ModelKind::Pnf, options,
                    ctx->studies, model, cfg);
}

SurrogacyFit fit_model(ModelKind kind, const EvidenceBase& base,
                       const mcmc::SamplerConfig& cfg, const FitOptions& options,
                       const std::vector<bool>& y2_missing) {
  switch (kind) {
    case ModelKind::DanielsHughes:
      return fit_dh(base, cfg, options, y2_missing);
    case ModelKind::Pnf:
      return fit_pnf(base, cfg, false, options, y2_missing);
    case ModelKind::PnfBias:
      return fit_pnf(base, cfg, true, options, y2_missing);
  }
  throw ValidationError("unknown model kind");
}

std::vector<std::string> SurrogacyFit::report_names() const {
  std::vector<std::string> names;
  if (kind == ModelKind::DanielsHughes) {
    names = {"lambda0", "lambda1", "psi2_sq"};
  } else {
    names = {"d1",      "d2_implied", "d2_studies", "rho",      "tau1",
             "tau2",    "lambda0",    "lambda1",    "psi2_sq",  "r_squared"};
    if (kind == ModelKind::PnfBias && !options.pin_bias_to_zero) {
      names.insert(names.end(), {"alpha1", "alpha2", "beta1", "beta2"});
    }
  }
  for (const auto& s : studies) {
    if (kind == ModelKind::DanielsHughes) names.push_back("delta1[" + s.id + "]");
  }
  for (const auto& s : studies)
    if (!s.rho_w) names.push_back("rho_w[" + s.id + "]");
  return names;
}

const mcmc::PosteriorSummary& SurrogacyFit::summary_of(
    const std::string& name) const {
  for (const auto& s : summaries)
    if (s.name == name) return s;
  throw ValidationError("no posterior summary for parameter '" + name + "'");
}

SurrogacyVerdict evaluate_surrogacy(
    std::span<const mcmc::PosteriorSummary> summaries, const FitOptions& bounds,
    ModelKind kind) {
  const auto find = [&](const std::string& name) -> const mcmc::PosteriorSummary& {
    for (const auto& s : summaries)
      if (s.name == name) return s;
    throw ValidationError("evaluate_surrogacy: missing parameter '" + name +
                          "'");
  };
  const auto& l0 = find("lambda0");
  const auto& l1 = find("lambda1");
  const auto& p2 = find("psi2_sq");

  SurrogacyVerdict v;
  v.intercept_zero = l0.cri_low <= 0.0 && 0.0 <= l0.cri_high;
  v.slope_nonzero = l1.cri_low > 0.0 || l1.cri_high < 0.0;
  v.cond_var_small = p2.median < bounds.cond_var_bound;
  if (kind != ModelKind::DanielsHughes)
    v.iqwig_pass = find("abs_rho").cri_low >= bounds.iqwig_bound;
  if (v.intercept_zero && v.slope_nonzero && v.cond_var_small)
    v.overall = "pass";
  else if (!v.slope_nonzero)
    v.overall = "fail";
  else
    v.overall = "inconclusive";
  return v;
}

Prediction predict_final_effect(const SurrogacyFit& fit, double y1_new,
                                double se1_new, std::optional<double> se2_new,
                                StudyClass cls) {
  if (!(se1_new > 0.0))
    throw ValidationError("predict_final_effect: se1 must be positive");
  if (!se2_new || !(*se2_new > 0.0))
    throw ValidationError(
        "predict_final_effect: the new study's se2 (within-study sd on the "
        "final outcome) is required");

  const auto lambda0 = fit.sample.pooled("lambda0");
  const auto lambda1 = fit.sample.pooled("lambda1");
  const auto psi2_sq = fit.sample.pooled("psi2_sq");
  const std::size_t n_draws = lambda0.size();
  if (n_draws == 0) throw ValidationError("predict_final_effect: empty fit");

  const double s1_sq = se1_new * se1_new;
  std::vector<double> mu(n_draws);
  double mean_cond_var = 0.0;

  if (fit.kind == ModelKind::DanielsHughes) {
    // delta1_new given only (y1, se1) and its vague prior
    const double prec = 1.0 / s1_sq + 1.0 / fit.options.normal_prior_variance;
    const double v1 = 1.0 / prec;
    const double m1 = v1 * (y1_new / s1_sq);
    for (std::size_t i = 0; i < n_draws; ++i) {
      mu[i] = lambda0[i] + lambda1[i] * m1;
      mean_cond_var += lambda1[i] * lambda1[i] * v1 + psi2_sq[i];
    }
  } else {
    const auto d1 = fit.sample.pooled("d1");
    const auto tau1 = fit.sample.pooled("tau1");
    std::vector<double> bias1(n_draws, 0.0), bias2(n_draws, 0.0);
    if (fit.kind == ModelKind::PnfBias && !fit.options.pin_bias_to_zero) {
      if (cls == StudyClass::Crwe) {
        bias1 = fit.sample.pooled("alpha1");
        bias2 = fit.sample.pooled("alpha2");
      } else if (cls == StudyClass::MatchedSrwe) {
        bias1 = fit.sample.pooled("beta1");
        bias2 = fit.sample.pooled("beta2");
      }
    }
    for (std::size_t i = 0; i < n_draws; ++i) {
      const double t1_sq = tau1[i] * tau1[i];
      const double shrink = t1_sq / (t1_sq + s1_sq);
      const double m1 = d1[i] + shrink * (y1_new - bias1[i] - d1[i]);
      const double v1 = t1_sq * s1_sq / (t1_sq + s1_sq);
      mu[i] = lambda0[i] + lambda1[i] * m1 + bias2[i];
      mean_cond_var += lambda1[i] * lambda1[i] * v1 + psi2_sq[i];
    }
  }
  mean_cond_var /= static_cast<double>(n_draws);

  Prediction p;
  p.mean = mean_of(mu);
  const double between = sd_of(mu);
  const double var_delta2 = between * between + mean_cond_var;
  p.sd = std::sqrt(var_delta2 + *se2_new * *se2_new);
  p.lo = p.mean - 1.96 * p.sd;
  p.hi = p.mean + 1.96 * p.sd;
  return p;
}

std::string fit_summary_csv_text(const SurrogacyFit& fit) {
  if (fit.summaries.empty())
    throw ValidationError("fit has no summaries (compute_summaries was off)");
  std::string out =
      "name,mean,median,sd,cri_low,cri_high,rhat,ess,skewness,report\n";
  for (const auto& name : fit.report_names()) {
    const auto& s = fit.summary_of(name);
    out += csv::join_row({s.name, format_double(s.mean), format_double(s.median),
                          format_double(s.sd), format_double(s.cri_low),
                          format_double(s.cri_high), format_double(s.rhat),
                          format_double(s.ess), format_double(s.skewness),
                          s.prefer_median() ? "median" : "mean"});
  }
  return out;
}

std::string verdict_json_text(const SurrogacyVerdict& verdict,
                              const SurrogacyFit& fit) {
  nlohmann::json j;
  j["model"] = to_string(fit.kind);
  j["intercept_zero"] = verdict.intercept_zero;
  j["slope_nonzero"] = verdict.slope_nonzero;
  j["cond_var_small"] = verdict.cond_var_small;
  if (verdict.iqwig_pass) j["iqwig_pass"] = *verdict.iqwig_pass;
  else j["iqwig_pass"] = nullptr;
  j["overall"] = verdict.overall;
  j["cond_var_bound"] = fit.options.cond_var_bound;
  j["iqwig_bound"] = fit.options.iqwig_bound;
  j["n_studies"] = fit.studies.size();
  j["converged"] = fit.convergence.all_pass;
  return j.dump(2) + "\n";
}

}  // namespace surrex::models
