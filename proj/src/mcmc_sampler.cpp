#include <algorithm>
#include <cmath>
#include <future>
#include <limits>

#include <json.hpp>

#include "surrex/csv.hpp"
#include "surrex/mcmc.hpp"

namespace surrex::mcmc {

PriorSpec PriorSpec::normal(double mean, double variance) {
  PriorSpec p;
  p.shape = Shape::Normal;
  p.a = mean;
  p.b = variance;
  p.validate();
  return p;
}

PriorSpec PriorSpec::uniform(double lo, double hi) {
  PriorSpec p;
  p.shape = Shape::Uniform;
  p.a = lo;
  p.b = hi;
  p.validate();
  return p;
}

void PriorSpec::validate() const {
  if (shape == Shape::Normal) {
    if (!(b > 0.0)) throw ValidationError("normal prior: variance must be > 0");
  } else {
    if (!(b > a)) throw ValidationError("uniform prior: hi must exceed lo");
  }
}

double PriorSpec::log_density(double x) const {
  if (shape == Shape::Normal) {
    const double d = x - a;
    return -0.5 * (std::log(2.0 * M_PI * b) + d * d / b);
  }
  if (x < a || x > b) return -std::numeric_limits<double>::infinity();
  return -std::log(b - a);
}

double PriorSpec::quantile(double p) const {
  if (shape == Shape::Uniform) return a + (b - a) * p;
  // Acklam's rational approximation of the normal quantile
  static const double pa[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                              -2.759285104469687e+02, 1.383577518672690e+02,
                              -3.066479806614716e+01, 2.506628277459239e+00};
  static const double pb[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                              -1.556989798598866e+02, 6.680131188771972e+01,
                              -1.328068155288572e+01};
  static const double pc[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                              -2.400758277161838e+00, -2.549732539343734e+00,
                              4.374664141464968e+00,  2.938163982698783e+00};
  static const double pd[] = {7.784695709041462e-03, 3.224671290700398e-01,
                              2.445134137142996e+00, 3.754408661907416e+00};
  if (!(p > 0.0 && p < 1.0))
    throw NumericError("normal quantile needs p in (0,1)");
  double z;
  if (p < 0.02425) {
    const double q = std::sqrt(-2.0 * std::log(p));
    z = (((((pc[0] * q + pc[1]) * q + pc[2]) * q + pc[3]) * q + pc[4]) * q +
         pc[5]) /
        ((((pd[0] * q + pd[1]) * q + pd[2]) * q + pd[3]) * q + 1.0);
  } else if (p > 1.0 - 0.02425) {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    z = -(((((pc[0] * q + pc[1]) * q + pc[2]) * q + pc[3]) * q + pc[4]) * q +
          pc[5]) /
        ((((pd[0] * q + pd[1]) * q + pd[2]) * q + pd[3]) * q + 1.0);
  } else {
    const double q = p - 0.5;
    const double r = q * q;
    z = (((((pa[0] * r + pa[1]) * r + pa[2]) * r + pa[3]) * r + pa[4]) * r +
         pa[5]) *
        q /
        (((((pb[0] * r + pb[1]) * r + pb[2]) * r + pb[3]) * r + pb[4]) * r +
         1.0);
  }
  return a + std::sqrt(b) * z;
}

int Model::param_index(const std::string& name) const {
  for (std::size_t i = 0; i < params.size(); ++i)
    if (params[i].name == name) return static_cast<int>(i);
  return -1;
}

void SamplerConfig::validate() const {
  if (iterations <= 0) throw ValidationError("sampler: iterations must be > 0");
  if (burn_in < 0 || burn_in >= iterations)
    throw ValidationError("sampler: burn_in must lie in [0, iterations)");
  if (n_chains < 2) throw ValidationError("sampler: need at least 2 chains");
  if (thin < 1) throw ValidationError("sampler: thin must be >= 1");
  if (adapt_window < 1)
    throw ValidationError("sampler: adapt_window must be >= 1");
}

namespace {

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// Bounded parameters are random-walked on the logit scale; the Jacobian of
// x = lo + (hi-lo)*sigmoid(z) keeps the target invariant.
struct Transform {
  bool bounded = false;
  double lo = 0.0, hi = 1.0;

  double to_unconstrained(double x) const {
    if (!bounded) return x;
    double u = (x - lo) / (hi - lo);
    u = std::clamp(u, 1e-12, 1.0 - 1e-12);
    return std::log(u / (1.0 - u));
  }
  double to_constrained(double z) const {
    if (!bounded) return z;
    return lo + (hi - lo) * sigmoid(z);
  }
  double log_jacobian(double z) const {
    if (!bounded) return 0.0;
    const double s = sigmoid(z);
    return std::log(hi - lo) + std::log(std::max(s, 1e-300)) +
           std::log(std::max(1.0 - s, 1e-300));
  }
};

struct ChainWorkspace {
  std::vector<double> x;           // constrained values
  std::vector<double> z;           // unconstrained values (bounded params)
  std::vector<double> term_value;  // cached term values
  double prior_total = 0.0;
};

class ChainRunner {
 public:
  ChainRunner(const Model& model, const SamplerConfig& config, int chain_index)
      : model_(model),
        config_(config),
        rng_(derive_seed(config.seed, config.stream_tag + "/chain",
                         static_cast<std::uint64_t>(chain_index))) {
    const auto n = model.params.size();
    transforms_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& prior = model.params[i].prior;
      if (prior.bounded()) transforms_[i] = {true, prior.a, prior.b};
    }
    scales_.assign(n, 1.0);
    accept_count_.assign(n, 0);
    attempt_count_.assign(n, 0);
    post_accept_.assign(n, 0);
    post_attempt_.assign(n, 0);
  }

  ChainResult run() {
    initialize();
    ChainResult result;
    const long n_out = config_.retained_per_chain();
    result.draws.assign(model_.params.size() + model_.derived.size(), {});
    for (auto& d : result.draws) d.reserve(n_out);

    for (long iter = 1; iter <= config_.iterations; ++iter) {
      sweep(iter <= config_.burn_in);
      if (iter <= config_.burn_in) {
        if (iter % config_.adapt_window == 0) adapt(iter);
        if (iter == config_.burn_in) result.scales_at_burn_in = scales_;
      } else if ((iter - config_.burn_in) % config_.thin == 0) {
        record(result);
      }
    }
    if (result.scales_at_burn_in.empty()) result.scales_at_burn_in = scales_;
    result.scales_at_end = scales_;
    result.acceptance_rate.resize(model_.params.size(), 0.0);
    for (std::size_t i = 0; i < model_.params.size(); ++i)
      if (post_attempt_[i] > 0)
        result.acceptance_rate[i] =
            static_cast<double>(post_accept_[i]) / post_attempt_[i];
    return result;
  }

 private:
  const std::vector<int>& terms_of(std::size_t p) const {
    if (!model_.param_terms.empty() && !model_.param_terms[p].empty())
      return model_.param_terms[p];
    return all_terms_;
  }

  double recompute_terms(const std::vector<int>& idx) {
    double total = 0.0;
    for (int t : idx) {
      ws_.term_value[t] = model_.terms[t](ws_.x);
      total += ws_.term_value[t];
    }
    return total;
  }

  double total_log_density() const {
    double total = ws_.prior_total;
    for (double v : ws_.term_value) total += v;
    return total;
  }

  void initialize() {
    const auto n = model_.params.size();
    ws_.x.resize(n);
    ws_.z.resize(n);
    ws_.term_value.assign(model_.terms.size(), 0.0);
    all_terms_.resize(model_.terms.size());
    for (std::size_t t = 0; t < model_.terms.size(); ++t)
      all_terms_[t] = static_cast<int>(t);

    for (int attempt = 0; attempt < 100; ++attempt) {
      for (std::size_t i = 0; i < n; ++i) {
        const auto& par = model_.params[i];
        double jitter = par.init_jitter;
        if (jitter <= 0.0) {
          jitter = par.prior.bounded() ? 0.1 * (par.prior.b - par.prior.a)
                                       : std::min(1.0, std::sqrt(par.prior.b));
        }
        double x = par.init + (attempt == 0 ? 0.5 : 1.0) * jitter * rng_.normal();
        if (par.prior.bounded()) {
          const double lo = par.prior.a, hi = par.prior.b;
          const double width = hi - lo;
          x = std::clamp(x, lo + 1e-9 * width, hi - 1e-9 * width);
        }
        ws_.x[i] = x;
        ws_.z[i] = transforms_[i].to_unconstrained(x);
      }
      ws_.prior_total = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        ws_.prior_total += model_.params[i].prior.log_density(ws_.x[i]);
      const double ll = recompute_terms(all_terms_);
      if (std::isfinite(ll) && std::isfinite(ws_.prior_total)) return;
    }
    throw NumericError(
        "sampler initialization failed: log-density not finite after 100 "
        "jittered retries");
  }

  void sweep(bool adapting) {
    for (std::size_t p = 0; p < model_.params.size(); ++p) {
      const auto git = model_.gibbs.find(static_cast<int>(p));
      if (git != model_.gibbs.end()) {
        const double x_new = git->second(ws_.x, rng_);
        ws_.prior_total += model_.params[p].prior.log_density(x_new) -
                           model_.params[p].prior.log_density(ws_.x[p]);
        ws_.x[p] = x_new;
        ws_.z[p] = transforms_[p].to_unconstrained(x_new);
        recompute_terms(terms_of(p));
        continue;
      }
      metropolis_step(p, adapting);
    }
  }

  void metropolis_step(std::size_t p, bool adapting) {
    const auto& terms = terms_of(p);
    const auto& tf = transforms_[p];
    const auto& prior = model_.params[p].prior;

    double old_terms_total = 0.0;
    for (int t : terms) old_terms_total += ws_.term_value[t];
    const double old_x = ws_.x[p];
    const double old_z = ws_.z[p];
    const double old_local = old_terms_total + prior.log_density(old_x) +
                             tf.log_jacobian(old_z);

    const double new_z = old_z + scales_[p] * rng_.normal();
    const double new_x = tf.to_constrained(new_z);

    ws_.x[p] = new_x;
    double new_terms_total = 0.0;
    std::vector<double> saved;
    saved.reserve(terms.size());
    for (int t : terms) {
      saved.push_back(ws_.term_value[t]);
      ws_.term_value[t] = model_.terms[t](ws_.x);
      new_terms_total += ws_.term_value[t];
    }
    const double new_local = new_terms_total + prior.log_density(new_x) +
                             tf.log_jacobian(new_z);

    const double log_alpha = new_local - old_local;
    const bool accept =
        std::isfinite(new_local) &&
        (log_alpha >= 0.0 || std::log(rng_.uniform() + 1e-300) < log_alpha);

    if (accept) {
      ws_.z[p] = new_z;
      ws_.prior_total += prior.log_density(new_x) - prior.log_density(old_x);
      if (adapting) ++accept_count_[p];
      else ++post_accept_[p];
    } else {
      ws_.x[p] = old_x;
      for (std::size_t k = 0; k < terms.size(); ++k)
        ws_.term_value[terms[k]] = saved[k];
    }
    if (adapting) ++attempt_count_[p];
    else ++post_attempt_[p];
  }

  void adapt(long iter) {
    const double batch = static_cast<double>(iter) / config_.adapt_window;
    const double gain = std::min(1.0, 4.0 / std::sqrt(batch));
    for (std::size_t p = 0; p < model_.params.size(); ++p) {
      if (attempt_count_[p] == 0) continue;
      const double rate =
          static_cast<double>(accept_count_[p]) / attempt_count_[p];
      double log_s = std::log(scales_[p]) + gain * (rate - 0.44);
      log_s = std::clamp(log_s, std::log(1e-6), std::log(1e6));
      scales_[p] = std::exp(log_s);
      accept_count_[p] = 0;
      attempt_count_[p] = 0;
    }
  }

  void record(ChainResult& result) {
    for (std::size_t i = 0; i < model_.params.size(); ++i)
      result.draws[i].push_back(ws_.x[i]);
    for (std::size_t d = 0; d < model_.derived.size(); ++d)
      result.draws[model_.params.size() + d].push_back(
          model_.derived[d].fn(ws_.x));
  }

  const Model& model_;
  const SamplerConfig& config_;
  Rng rng_;
  std::vector<Transform> transforms_;
  std::vector<double> scales_;
  std::vector<long> accept_count_, attempt_count_;
  std::vector<long> post_accept_, post_attempt_;
  std::vector<int> all_terms_;
  ChainWorkspace ws_;
};

}  // namespace

PosteriorSample run_chains(const Model& model, const SamplerConfig& config) {
  config.validate();
  if (model.params.empty()) throw ValidationError("model has no parameters");
  for (const auto& p : model.params) p.prior.validate();
  if (!model.param_terms.empty() &&
      model.param_terms.size() != model.params.size())
    throw ValidationError("param_terms size mismatch");

  PosteriorSample sample;
  for (const auto& p : model.params) sample.names.push_back(p.name);
  for (const auto& d : model.derived) sample.names.push_back(d.name);

  std::vector<std::future<ChainResult>> futures;
  futures.reserve(config.n_chains);
  for (int c = 0; c < config.n_chains; ++c)
    futures.push_back(std::async(std::launch::async, [&model, &config, c] {
      return ChainRunner(model, config, c).run();
    }));
  for (auto& f : futures) sample.chains.push_back(f.get());
  return sample;
}

int PosteriorSample::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return static_cast<int>(i);
  throw ValidationError("no posterior draws for parameter '" + name + "'");
}

std::vector<double> PosteriorSample::pooled(const std::string& name) const {
  const int idx = index_of(name);
  std::vector<double> out;
  for (const auto& chain : chains)
    out.insert(out.end(), chain.draws[idx].begin(), chain.draws[idx].end());
  return out;
}

std::vector<std::span<const double>> PosteriorSample::chain_views(
    int index) const {
  std::vector<std::span<const double>> views;
  views.reserve(chains.size());
  for (const auto& chain : chains)
    views.emplace_back(chain.draws[index].data(), chain.draws[index].size());
  return views;
}

long PosteriorSample::n_retained() const {
  long total = 0;
  for (const auto& chain : chains)
    if (!chain.draws.empty()) total += static_cast<long>(chain.draws[0].size());
  return total;
}

SamplerConfig sampler_config_from_json_text(const std::string& text,
                                            const std::string& context) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(context + ": invalid JSON: " + e.what());
  }
  SamplerConfig cfg;
  if (j.contains("iterations")) cfg.iterations = j["iterations"].get<long>();
  if (j.contains("burn_in")) cfg.burn_in = j["burn_in"].get<long>();
  if (j.contains("chains")) cfg.n_chains = j["chains"].get<int>();
  if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("thin")) cfg.thin = j["thin"].get<long>();
  if (j.contains("adapt_window"))
    cfg.adapt_window = j["adapt_window"].get<long>();
  cfg.validate();
  return cfg;
}

}  // namespace surrex::mcmc
