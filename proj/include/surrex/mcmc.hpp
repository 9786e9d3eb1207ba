#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "surrex/common.hpp"

namespace surrex::mcmc {

struct PriorSpec {
  enum class Shape { Normal, Uniform };

  Shape shape = Shape::Normal;
  double a = 0.0;  // Normal: mean,  Uniform: lo
  double b = 1.0;  // Normal: variance,  Uniform: hi

  static PriorSpec normal(double mean, double variance);
  static PriorSpec uniform(double lo, double hi);

  bool bounded() const { return shape == Shape::Uniform; }
  double log_density(double x) const;
  double quantile(double p) const;
  void validate() const;
};

using ParamView = std::span<const double>;

struct Parameter {
  std::string name;
  PriorSpec prior;
  double init = 0.0;
  double init_jitter = 0.0;  // 0 means a prior-informed default
};

// Full conditional draw for one parameter given all others.
using GibbsDraw = std::function<double(ParamView, Rng&)>;

struct DerivedQuantity {
  std::string name;
  std::function<double(ParamView)> fn;
};

// Log-density factor graph: each term is a function of the parameter vector;
// per-parameter term lists let scalar updates recompute only what changed.
struct Model {
  std::vector<Parameter> params;
  std::vector<std::function<double(ParamView)>> terms;
  std::vector<std::vector<int>> param_terms;  // empty => every term
  std::map<int, GibbsDraw> gibbs;
  std::vector<DerivedQuantity> derived;

  int param_index(const std::string& name) const;
};

struct SamplerConfig {
  long iterations = 150000;
  long burn_in = 50000;
  int n_chains = 4;
  std::uint64_t seed = 1;
  long thin = 1;
  long adapt_window = 50;
  // extra stream entropy so scenarios/folds never share draws
  std::string stream_tag;

  void validate() const;
  long retained_per_chain() const { return (iterations - burn_in) / thin; }
};

struct ChainResult {
  // [param-or-derived][draw]
  std::vector<std::vector<double>> draws;
  std::vector<double> scales_at_burn_in;  // per sampled parameter
  std::vector<double> scales_at_end;
  std::vector<double> acceptance_rate;  // post burn-in, Metropolis params only
};

struct PosteriorSample {
  std::vector<std::string> names;  // params then derived quantities
  std::vector<ChainResult> chains;

  int index_of(const std::string& name) const;
  // pooled draws across chains, chain-order concatenation
  std::vector<double> pooled(const std::string& name) const;
  std::vector<std::span<const double>> chain_views(int index) const;
  long n_retained() const;
};

// Runs config.n_chains chains concurrently, each with its own RNG stream
// derived from (seed, stream_tag, chain). Proposal scales adapt toward 0.44
// acceptance during burn-in and are frozen afterwards.
PosteriorSample run_chains(const Model& model, const SamplerConfig& config);

struct PosteriorSummary {
  std::string name;
  double mean = 0.0;
  double median = 0.0;
  double sd = 0.0;
  double cri_low = 0.0;   // 2.5%
  double cri_high = 0.0;  // 97.5%
  double rhat = 1.0;
  double ess = 0.0;
  double skewness = 0.0;

  // medians are reported for visibly skewed posteriors
  bool prefer_median() const { return std::abs(skewness) > 0.5; }
};

// Requires at least 1000 retained draws in total.
PosteriorSummary summarize(const std::string& name,
                           std::span<const std::span<const double>> chains);
PosteriorSummary summarize(const std::string& name,
                           const std::vector<std::vector<double>>& chains);
std::vector<PosteriorSummary> summarize_all(const PosteriorSample& sample);

struct ConvergenceEntry {
  std::string param;
  bool pass = false;
  std::string message;
};

struct ConvergenceReport {
  std::vector<ConvergenceEntry> entries;
  bool all_pass = true;
};

ConvergenceReport check_convergence(std::span<const PosteriorSummary> summaries,
                                    double rhat_max = 1.05,
                                    double ess_min = 400.0);

// name,mean,median,sd,cri_low,cri_high,rhat,ess
std::string summary_csv_text(std::span<const PosteriorSummary> summaries);
// chain,draw,<param...> thinned to at most max_rows_per_chain rows
std::string trace_csv_text(const PosteriorSample& sample,
                           long max_rows_per_chain = 500);
// param,lag,autocorr averaged across chains
std::string autocorr_csv_text(const PosteriorSample& sample, int max_lag = 50);

// Sampler config JSON: iterations, burn_in, chains, seed, thin, adapt_window.
SamplerConfig sampler_config_from_json_text(const std::string& text,
                                            const std::string& context);

}  // namespace surrex::mcmc
