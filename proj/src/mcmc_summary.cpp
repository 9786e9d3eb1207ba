#include <algorithm>
#include <cmath>

#include "surrex/csv.hpp"
#include "surrex/mcmc.hpp"

namespace surrex::mcmc {

namespace {

// Split each chain in half so within-chain drift shows up in rhat.
std::vector<std::vector<double>> split_chains(
    std::span<const std::span<const double>> chains) {
  std::vector<std::vector<double>> out;
  for (const auto& c : chains) {
    if (c.size() < 4) {
      out.emplace_back(c.begin(), c.end());
      continue;
    }
    const std::size_t half = c.size() / 2;
    out.emplace_back(c.begin(), c.begin() + half);
    out.emplace_back(c.begin() + half, c.begin() + 2 * half);
  }
  return out;
}

double autocov(std::span<const double> xs, double mean, std::size_t lag) {
  double s = 0.0;
  for (std::size_t i = 0; i + lag < xs.size(); ++i)
    s += (xs[i] - mean) * (xs[i + lag] - mean);
  return s / static_cast<double>(xs.size());
}

}  // namespace

PosteriorSummary summarize(const std::string& name,
                           std::span<const std::span<const double>> chains) {
  std::vector<double> pooled;
  for (const auto& c : chains) pooled.insert(pooled.end(), c.begin(), c.end());
  if (pooled.size() < 1000)
    throw ValidationError("summarize('" + name + "'): needs at least 1000 "
                          "retained draws, got " +
                          std::to_string(pooled.size()));

  PosteriorSummary s;
  s.name = name;
  s.mean = mean_of(pooled);
  s.sd = sd_of(pooled);
  s.skewness = skewness_of(pooled);

  std::vector<double> sorted = pooled;
  std::sort(sorted.begin(), sorted.end());
  s.median = quantile_sorted(sorted, 0.5);
  s.cri_low = quantile_sorted(sorted, 0.025);
  s.cri_high = quantile_sorted(sorted, 0.975);

  const auto seqs = split_chains(chains);
  const std::size_t m = seqs.size();
  const std::size_t n = seqs.empty() ? 0 : seqs.front().size();
  if (m < 2 || n < 4) {
    s.rhat = 1.0;
    s.ess = static_cast<double>(pooled.size());
    return s;
  }

  std::vector<double> seq_mean(m), seq_var(m);
  double grand = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    seq_mean[i] = mean_of(seqs[i]);
    const double sdv = sd_of(seqs[i]);
    seq_var[i] = sdv * sdv;
    grand += seq_mean[i];
  }
  grand /= static_cast<double>(m);

  double w = 0.0;
  for (double v : seq_var) w += v;
  w /= static_cast<double>(m);
  double b_over_n = 0.0;
  for (double mu : seq_mean) b_over_n += (mu - grand) * (mu - grand);
  b_over_n /= static_cast<double>(m - 1);

  const double nn = static_cast<double>(n);
  const double var_plus = (nn - 1.0) / nn * w + b_over_n;
  if (w <= 0.0 || var_plus <= 0.0) {
    s.rhat = 1.0;
    s.ess = static_cast<double>(pooled.size());
    return s;
  }
  s.rhat = std::sqrt(var_plus / w);

  // Geyer initial-positive-sequence estimate of the autocorrelation time.
  const std::size_t max_lag = std::min<std::size_t>(n - 1, 500);
  std::vector<double> rho(max_lag + 1, 0.0);
  std::vector<double> acov0(m);
  for (std::size_t i = 0; i < m; ++i) acov0[i] = autocov(seqs[i], seq_mean[i], 0);
  double tau = 1.0;
  for (std::size_t t = 1; t + 1 <= max_lag; t += 2) {
    double mean_ct = 0.0, mean_ct1 = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      mean_ct += autocov(seqs[i], seq_mean[i], t);
      mean_ct1 += autocov(seqs[i], seq_mean[i], t + 1);
    }
    mean_ct /= static_cast<double>(m);
    mean_ct1 /= static_cast<double>(m);
    const double rho_t = 1.0 - (w - mean_ct) / var_plus;
    const double rho_t1 = 1.0 - (w - mean_ct1) / var_plus;
    if (rho_t + rho_t1 <= 0.0) break;
    tau += 2.0 * (rho_t + rho_t1);
  }
  const double total = static_cast<double>(m) * nn;
  s.ess = std::clamp(total / tau, 1.0, total);
  return s;
}

PosteriorSummary summarize(const std::string& name,
                           const std::vector<std::vector<double>>& chains) {
  std::vector<std::span<const double>> views;
  views.reserve(chains.size());
  for (const auto& c : chains) views.emplace_back(c.data(), c.size());
  return summarize(name, views);
}

std::vector<PosteriorSummary> summarize_all(const PosteriorSample& sample) {
  std::vector<PosteriorSummary> out;
  out.reserve(sample.names.size());
  for (std::size_t i = 0; i < sample.names.size(); ++i)
    out.push_back(
        summarize(sample.names[i], sample.chain_views(static_cast<int>(i))));
  return out;
}

ConvergenceReport check_convergence(std::span<const PosteriorSummary> summaries,
                                    double rhat_max, double ess_min) {
  ConvergenceReport report;
  for (const auto& s : summaries) {
    ConvergenceEntry e;
    e.param = s.name;
    std::string problems;
    if (!(s.rhat < rhat_max))
      problems += "rhat=" + format_double(s.rhat) + " >= " +
                  format_double(rhat_max) + "; ";
    if (!(s.ess > ess_min))
      problems += "ess=" + format_double(s.ess) + " <= " +
                  format_double(ess_min) + "; ";
    e.pass = problems.empty();
    e.message = e.pass ? "ok" : problems;
    if (!e.pass) report.all_pass = false;
    report.entries.push_back(std::move(e));
  }
  return report;
}

std::string summary_csv_text(std::span<const PosteriorSummary> summaries) {
  std::string out = "name,mean,median,sd,cri_low,cri_high,rhat,ess\n";
  for (const auto& s : summaries)
    out += csv::join_row({s.name, format_double(s.mean), format_double(s.median),
                          format_double(s.sd), format_double(s.cri_low),
                          format_double(s.cri_high), format_double(s.rhat),
                          format_double(s.ess)});
  return out;
}

std::string trace_csv_text(const PosteriorSample& sample,
                           long max_rows_per_chain) {
  std::string out = "chain,draw";
  for (const auto& n : sample.names) out += "," + n;
  out += '\n';
  for (std::size_t c = 0; c < sample.chains.size(); ++c) {
    const auto& draws = sample.chains[c].draws;
    if (draws.empty()) continue;
    const long n = static_cast<long>(draws[0].size());
    const long stride = std::max(1L, n / max_rows_per_chain);
    for (long i = 0; i < n; i += stride) {
      out += std::to_string(c) + "," + std::to_string(i);
      for (const auto& d : draws) out += "," + format_double(d[i]);
      out += '\n';
    }
  }
  return out;
}

std::string autocorr_csv_text(const PosteriorSample& sample, int max_lag) {
  std::string out = "param,lag,autocorr\n";
  for (std::size_t p = 0; p < sample.names.size(); ++p) {
    const auto views = sample.chain_views(static_cast<int>(p));
    for (int lag = 0; lag <= max_lag; ++lag) {
      double num = 0.0, den = 0.0;
      int used = 0;
      for (const auto& v : views) {
        if (static_cast<std::size_t>(lag) >= v.size()) continue;
        const double mu = mean_of(v);
        num += autocov(v, mu, static_cast<std::size_t>(lag));
        den += autocov(v, mu, 0);
        ++used;
      }
      if (used == 0 || den <= 0.0) break;
      out += csv::join_row({sample.names[p], std::to_string(lag),
                            format_double(num / den)});
    }
  }
  return out;
}

}  // namespace surrex::mcmc
