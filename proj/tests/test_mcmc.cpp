#include <cmath>

#include <doctest.h>

#include "surrex/mcmc.hpp"
#include "synthetic.hpp"

using namespace surrex;
using namespace surrex::mcmc;

namespace {

// Normal likelihood with known unit variance; the posterior under a
// N(0, v0) prior is available in closed form.
Model conjugate_model(const std::vector<double>& data, bool with_gibbs) {
  Model model;
  model.params.push_back({"mu", PriorSpec::normal(0.0, 1e4), 0.0, 1.0});
  model.terms.push_back([data](ParamView x) {
    double ll = 0.0;
    for (double y : data) ll += -0.5 * (y - x[0]) * (y - x[0]);
    return ll;
  });
  if (with_gibbs) {
    model.gibbs[0] = [data](ParamView, Rng& rng) {
      const double prec = data.size() + 1.0 / 1e4;
      double sum = 0.0;
      for (double y : data) sum += y;
      return sum / prec + rng.normal() / std::sqrt(prec);
    };
  }
  return model;
}

SamplerConfig small_config(std::uint64_t seed) {
  SamplerConfig cfg;
  cfg.iterations = 6000;
  cfg.burn_in = 2000;
  cfg.n_chains = 2;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_SUITE("mcmc") {

TEST_CASE("conjugate posterior is recovered by the random-walk path") {
  const std::vector<double> data = {0.0, 1.0, 2.0, 3.0, 4.0};  // sums to 10
  const double post_mean = 10.0 / (5.0 + 1e-4);
  const double post_sd = 1.0 / std::sqrt(5.0 + 1e-4);

  for (const bool gibbs : {false, true}) {
    CAPTURE(gibbs);
    SamplerConfig cfg;
    cfg.iterations = 20000;
    cfg.burn_in = 5000;
    cfg.n_chains = 4;
    cfg.seed = 31 + (gibbs ? 1 : 0);
    const auto sample = run_chains(conjugate_model(data, gibbs), cfg);
    const auto summary = summarize("mu", sample.chain_views(0));
    const double mcse = summary.sd / std::sqrt(summary.ess);
    CHECK(std::fabs(summary.mean - post_mean) < 3.0 * mcse);
    CHECK(summary.sd == doctest::Approx(post_sd).epsilon(0.1));
    CHECK(summary.rhat < 1.05);
    CHECK(summary.ess > 400.0);
  }
}

TEST_CASE("prior-only sampling recovers both prior shapes") {
  SUBCASE("normal prior") {
    Model model;
    model.params.push_back({"theta", PriorSpec::normal(1.0, 4.0), 1.0, 1.0});
    const auto sample = run_chains(model, small_config(7));
    const auto s = summarize("theta", sample.chain_views(0));
    const double mcse = s.sd / std::sqrt(s.ess);
    CHECK(std::fabs(s.mean - 1.0) < 4.0 * mcse);
    CHECK(s.sd == doctest::Approx(2.0).epsilon(0.15));
    // analytic quantiles of N(1, 4)
    CHECK(s.cri_low ==
          doctest::Approx(PriorSpec::normal(1.0, 4.0).quantile(0.025))
              .epsilon(0.12));
    CHECK(s.cri_high ==
          doctest::Approx(PriorSpec::normal(1.0, 4.0).quantile(0.975))
              .epsilon(0.12));
  }
  SUBCASE("uniform prior") {
    Model model;
    model.params.push_back({"u", PriorSpec::uniform(-1.0, 3.0), 0.5, 0.5});
    const auto sample = run_chains(model, small_config(8));
    const auto draws = sample.pooled("u");
    for (double d : draws) {
      REQUIRE(d >= -1.0);
      REQUIRE(d <= 3.0);
    }
    const auto s = summarize("u", sample.chain_views(0));
    CHECK(s.mean == doctest::Approx(1.0).epsilon(0.15));
    CHECK(s.cri_low == doctest::Approx(-0.9).epsilon(0.15));
    CHECK(s.cri_high == doctest::Approx(2.9).epsilon(0.05));
  }
}

TEST_CASE("degenerate uniform support is respected by every draw") {
  Model model;
  model.params.push_back({"d", PriorSpec::uniform(0.5, 0.5001), 0.50005, 0.0});
  const auto sample = run_chains(model, small_config(9));
  for (double d : sample.pooled("d")) {
    REQUIRE(d >= 0.5);
    REQUIRE(d <= 0.5001);
  }
}

TEST_CASE("identical seeds reproduce draws bitwise, different seeds differ") {
  const std::vector<double> data = {0.5, 1.5};
  const auto a = run_chains(conjugate_model(data, false), small_config(123));
  const auto b = run_chains(conjugate_model(data, false), small_config(123));
  const auto c = run_chains(conjugate_model(data, false), small_config(124));
  REQUIRE(a.chains.size() == b.chains.size());
  for (std::size_t ch = 0; ch < a.chains.size(); ++ch) {
    REQUIRE(a.chains[ch].draws[0].size() == b.chains[ch].draws[0].size());
    for (std::size_t i = 0; i < a.chains[ch].draws[0].size(); ++i)
      REQUIRE(a.chains[ch].draws[0][i] == b.chains[ch].draws[0][i]);
  }
  bool any_diff = false;
  for (std::size_t i = 0; i < a.chains[0].draws[0].size(); ++i)
    if (a.chains[0].draws[0][i] != c.chains[0].draws[0][i]) any_diff = true;
  CHECK(any_diff);
}

TEST_CASE("stream tags decouple draws") {
  auto cfg1 = small_config(5);
  cfg1.stream_tag = "scenario:A";
  auto cfg2 = small_config(5);
  cfg2.stream_tag = "scenario:B";
  const std::vector<double> data = {0.5, 1.5};
  const auto a = run_chains(conjugate_model(data, false), cfg1);
  const auto b = run_chains(conjugate_model(data, false), cfg2);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.chains[0].draws[0].size(); ++i)
    if (a.chains[0].draws[0][i] != b.chains[0].draws[0][i]) any_diff = true;
  CHECK(any_diff);
}

TEST_CASE("pooled means agree across seeds within Monte-Carlo error") {
  const std::vector<double> data = {0.0, 1.0, 2.0, 3.0, 4.0};
  std::vector<double> means;
  double mcse = 0.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto sample = run_chains(conjugate_model(data, false),
                                   small_config(seed));
    const auto s = summarize("mu", sample.chain_views(0));
    means.push_back(s.mean);
    mcse = std::max(mcse, s.sd / std::sqrt(s.ess));
  }
  const double post_mean = 10.0 / (5.0 + 1e-4);
  for (double m : means) CHECK(std::fabs(m - post_mean) < 4.0 * mcse);
}

TEST_CASE("adaptation freezes at burn-in") {
  const std::vector<double> data = {0.0, 1.0, 2.0, 3.0, 4.0};
  const auto sample = run_chains(conjugate_model(data, false),
                                 small_config(77));
  for (const auto& chain : sample.chains) {
    REQUIRE(chain.scales_at_burn_in.size() == chain.scales_at_end.size());
    for (std::size_t i = 0; i < chain.scales_at_end.size(); ++i)
      CHECK(chain.scales_at_burn_in[i] == chain.scales_at_end[i]);
  }
}

TEST_CASE("metropolis acceptance lands near the 0.44 target") {
  const std::vector<double> data = {0.0, 1.0, 2.0, 3.0, 4.0};
  SamplerConfig cfg;
  cfg.iterations = 20000;
  cfg.burn_in = 8000;
  cfg.n_chains = 2;
  cfg.seed = 3;
  const auto sample = run_chains(conjugate_model(data, false), cfg);
  for (const auto& chain : sample.chains)
    CHECK(chain.acceptance_rate[0] == doctest::Approx(0.44).epsilon(0.25));
}

TEST_CASE("initialization failure is reported after retries") {
  Model model;
  model.params.push_back({"x", PriorSpec::normal(0.0, 1.0), 0.0, 1.0});
  model.terms.push_back([](ParamView) {
    return -std::numeric_limits<double>::infinity();
  });
  CHECK_THROWS_WITH_AS(run_chains(model, small_config(1)),
                       doctest::Contains("initialization"), NumericError);
}

TEST_CASE("summarize handles constant chains") {
  std::vector<std::vector<double>> chains(2, std::vector<double>(1000, 3.25));
  const auto s = summarize("c", chains);
  CHECK(s.mean == 3.25);
  CHECK(s.median == 3.25);
  CHECK(s.sd == 0.0);
  CHECK(s.cri_low == 3.25);
  CHECK(s.cri_high == 3.25);
  CHECK(s.ess > 0.0);
}

TEST_CASE("summarize recovers standard-normal quantiles") {
  Rng rng(2718);
  std::vector<std::vector<double>> chains(4);
  for (auto& c : chains)
    for (int i = 0; i < 25000; ++i) c.push_back(rng.normal());
  const auto s = summarize("z", chains);
  CHECK(std::fabs(s.cri_low - (-1.959964)) < 0.03);
  CHECK(std::fabs(s.cri_high - 1.959964) < 0.03);
  CHECK(std::fabs(s.mean) < 0.02);
  CHECK(std::fabs(s.skewness) < 0.05);
  CHECK(s.rhat < 1.01);
}

TEST_CASE("disjoint modes are flagged by split-chain rhat") {
  Rng rng(4);
  std::vector<std::vector<double>> chains(2);
  for (int i = 0; i < 2000; ++i) {
    chains[0].push_back(-5.0 + rng.normal());
    chains[1].push_back(5.0 + rng.normal());
  }
  const auto s = summarize("bimodal", chains);
  CHECK(s.rhat > 1.1);
}

TEST_CASE("too few draws is an error") {
  std::vector<std::vector<double>> chains(2, std::vector<double>(100, 1.0));
  CHECK_THROWS_AS(summarize("short", chains), ValidationError);
}

TEST_CASE("skewed posteriors recommend the median") {
  Rng rng(5);
  std::vector<std::vector<double>> chains(2);
  for (int i = 0; i < 3000; ++i) {
    const double z1 = rng.normal();
    const double z2 = rng.normal();
    chains[0].push_back(z1 * z1);  // chi-square(1): strongly right-skewed
    chains[1].push_back(z2 * z2);
  }
  const auto s = summarize("sq", chains);
  CHECK(s.prefer_median());
  CHECK(s.skewness > 0.5);
}

TEST_CASE("convergence report never passes silently") {
  PosteriorSummary good;
  good.name = "ok";
  good.rhat = 1.01;
  good.ess = 1000.0;
  PosteriorSummary bad;
  bad.name = "sticky";
  bad.rhat = 1.2;
  bad.ess = 1000.0;

  const std::vector<PosteriorSummary> all_good = {good};
  auto report = check_convergence(all_good);
  CHECK(report.all_pass);
  REQUIRE(report.entries.size() == 1);
  CHECK(report.entries[0].message == "ok");

  const std::vector<PosteriorSummary> mixed = {good, bad};
  report = check_convergence(mixed);
  CHECK(!report.all_pass);
  CHECK(report.entries[1].param == "sticky");
  CHECK(report.entries[1].message.find("rhat") != std::string::npos);

  report = check_convergence(std::vector<PosteriorSummary>{});
  CHECK(report.entries.empty());
  CHECK(report.all_pass);
}

TEST_CASE("uniform-prior parameters never leave the support under a likelihood") {
  // skewed likelihood pushing against the upper bound
  Model model;
  model.params.push_back({"p", PriorSpec::uniform(0.0, 1.0), 0.5, 0.2});
  model.terms.push_back([](ParamView x) { return 5.0 * std::log(x[0]); });
  const auto sample = run_chains(model, small_config(6));
  for (double d : sample.pooled("p")) {
    REQUIRE(d > 0.0);
    REQUIRE(d < 1.0);
  }
}

TEST_CASE("sampler config validation") {
  SamplerConfig cfg;
  cfg.iterations = 100;
  cfg.burn_in = 100;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg.burn_in = 50;
  cfg.n_chains = 1;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg.n_chains = 2;
  cfg.thin = 0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg.thin = 1;
  CHECK_NOTHROW(cfg.validate());
  CHECK(SamplerConfig{}.iterations == 150000);
  CHECK(SamplerConfig{}.burn_in == 50000);
}

TEST_CASE("sampler config json") {
  const auto cfg = sampler_config_from_json_text(
      R"({"iterations": 5000, "burn_in": 1000, "chains": 3, "seed": 42,
          "thin": 2, "adapt_window": 25})",
      "test");
  CHECK(cfg.iterations == 5000);
  CHECK(cfg.n_chains == 3);
  CHECK(cfg.seed == 42);
  CHECK(cfg.thin == 2);
  CHECK_THROWS_AS(sampler_config_from_json_text("not json", "test"),
                  ValidationError);
  CHECK_THROWS_AS(
      sampler_config_from_json_text(R"({"iterations": 0})", "test"),
      ValidationError);
}

TEST_CASE("thinning reduces retained draws") {
  auto cfg = small_config(11);
  cfg.thin = 4;
  const std::vector<double> data = {1.0};
  const auto sample = run_chains(conjugate_model(data, false), cfg);
  CHECK(sample.chains[0].draws[0].size() ==
        static_cast<std::size_t>((cfg.iterations - cfg.burn_in) / 4));
}

}  // TEST_SUITE
