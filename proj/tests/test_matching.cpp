#include <cmath>

#include <doctest.h>

#include "surrex/matching.hpp"
#include "synthetic.hpp"

using namespace surrex;

namespace {

ArmSummary arm_with(const std::vector<CovariateSpec>& specs,
                    const std::vector<double>& values, const std::string& id,
                    ArmSummary::Role role = ArmSummary::Role::Treatment) {
  ArmSummary arm;
  arm.arm_id = id;
  arm.study_id = id;
  arm.role = role;
  for (std::size_t i = 0; i < specs.size(); ++i)
    arm.values[specs[i].name] = values[i];
  return arm;
}

}  // namespace

TEST_SUITE("matching") {

TEST_CASE("normalized difference for a bounded covariate") {
  const auto age = CovariateSpec::bounded("age", 2.0, 18.0, 100.0);
  CHECK(normalized_difference(age, 60.0, 70.0) == 10.0 / 82.0);
  CHECK(normalized_difference(age, 47.0, 47.0) == 0.0);
  const auto sex = CovariateSpec::proportion("sex", 1.0);
  CHECK(normalized_difference(sex, 0.0, 1.0) == 1.0);
}

TEST_CASE("out-of-range values name the covariate") {
  const auto age = CovariateSpec::bounded("age", 2.0, 18.0, 100.0);
  CHECK_THROWS_WITH_AS(normalized_difference(age, 110.0, 60.0),
                       doctest::Contains("age"), ValidationError);
  const auto sex = CovariateSpec::proportion("sex", 1.0);
  CHECK_THROWS_AS(normalized_difference(sex, -0.1, 0.5), ValidationError);
}

TEST_CASE("distance is the weighted mean of differences") {
  std::vector<CovariateSpec> specs;
  for (int i = 0; i < 4; ++i)
    specs.push_back(
        CovariateSpec::proportion("p" + std::to_string(i), 2.0));
  specs.push_back(CovariateSpec::proportion("p4", 1.0));

  const auto a = arm_with(specs, {0.5, 0.2, 0.2, 0.2, 0.2}, "a");
  const auto b = arm_with(specs, {0.0, 0.2, 0.2, 0.2, 0.2}, "b");
  CHECK(distance_total(specs, a, b) == 1.0 / 9.0);
  CHECK(distance_total(specs, a, a) == 0.0);

  const auto c = arm_with(specs, {1.0, 1.0, 1.0, 1.0, 1.0}, "c");
  const auto d = arm_with(specs, {0.0, 0.0, 0.0, 0.0, 0.0}, "d");
  CHECK(distance_total(specs, c, d) == 1.0);
}

TEST_CASE("all-zero weights are rejected") {
  std::vector<CovariateSpec> specs = {CovariateSpec::proportion("p", 0.0)};
  const auto a = arm_with(specs, {0.2}, "a");
  const auto b = arm_with(specs, {0.4}, "b");
  CHECK_THROWS_AS(distance_total(specs, a, b), ValidationError);
}

TEST_CASE("distance symmetry and positive weight scaling") {
  const auto specs = default_covariate_panel();
  Rng rng(7);
  for (int i = 0; i < 1000; ++i) {
    const auto a = synthetic::random_arm(rng, specs, "a",
                                         ArmSummary::Role::Treatment);
    const auto b =
        synthetic::random_arm(rng, specs, "b", ArmSummary::Role::Control);
    const double d_ab = distance_total(specs, a, b);
    const double d_ba = distance_total(specs, b, a);
    CHECK(d_ab == d_ba);
    CHECK(d_ab >= 0.0);
    CHECK(d_ab <= 1.0);

    // power-of-two weight scaling is exact in floating point
    auto scaled = specs;
    for (auto& s : scaled) s.weight *= 4.0;
    CHECK(distance_total(scaled, a, b) == d_ab);

    for (auto& s : scaled) s.weight = s.weight / 4.0 * 3.7;
    CHECK(distance_total(scaled, a, b) == doctest::Approx(d_ab).epsilon(1e-13));
  }
}

TEST_CASE("threshold is the maximum over RCT arm pairs") {
  std::vector<CovariateSpec> specs = {CovariateSpec::proportion("p", 1.0)};
  const auto pair_with_diff = [&](double diff, int i) {
    return std::make_pair(
        arm_with(specs, {0.5}, "t" + std::to_string(i)),
        arm_with(specs, {0.5 + diff}, "c" + std::to_string(i),
                 ArmSummary::Role::Control));
  };
  std::vector<std::pair<ArmSummary, ArmSummary>> pairs = {
      pair_with_diff(0.01, 0), pair_with_diff(0.032, 1), pair_with_diff(0.02, 2)};
  const double expected = std::fabs((0.5 + 0.032) - 0.5);
  CHECK(derive_threshold(pairs, specs) == expected);
  CHECK(derive_threshold(pairs, specs) == doctest::Approx(0.032));

  pairs.resize(1);
  CHECK(derive_threshold(pairs, specs) == std::fabs((0.5 + 0.01) - 0.5));

  const std::vector<std::pair<ArmSummary, ArmSummary>> identical = {
      {arm_with(specs, {0.3}, "x"), arm_with(specs, {0.3}, "y")}};
  CHECK(derive_threshold(identical, specs) == 0.0);

  const std::vector<std::pair<ArmSummary, ArmSummary>> empty;
  CHECK_THROWS_AS(derive_threshold(empty, specs), ValidationError);
}

TEST_CASE("single sub-threshold entry is the forced pairing") {
  std::vector<CovariateSpec> specs = {CovariateSpec::proportion("p", 1.0)};
  const std::vector<ArmSummary> treatment = {
      arm_with(specs, {0.10}, "t1"), arm_with(specs, {0.90}, "t2")};
  const std::vector<ArmSummary> control = {
      arm_with(specs, {0.12}, "c1", ArmSummary::Role::Control),
      arm_with(specs, {0.50}, "c2", ArmSummary::Role::Control)};
  const auto result = match_studies(treatment, control, specs, 0.05);
  REQUIRE(result.pairs.size() == 1);
  CHECK(result.pairs[0].treatment_arm == "t1");
  CHECK(result.pairs[0].control_arm == "c1");
  CHECK(result.candidate_count == 1);
}

TEST_CASE("sixteen by eight matrix with eleven candidates") {
  std::vector<CovariateSpec> specs = {CovariateSpec::proportion("p", 1.0)};
  const std::vector<double> control_vals = {0.10, 0.15, 0.30, 0.45,
                                            0.60, 0.75, 0.90, 0.99};
  const std::vector<double> treatment_vals = {0.125, 0.11, 0.30, 0.31,
                                              0.46,  0.61, 0.74, 0.91,
                                              0.97,  0.155, 0.21, 0.23,
                                              0.38,  0.52, 0.68, 0.83};
  std::vector<ArmSummary> treatment, control;
  for (std::size_t i = 0; i < treatment_vals.size(); ++i)
    treatment.push_back(
        arm_with(specs, {treatment_vals[i]}, "t" + std::to_string(i)));
  for (std::size_t i = 0; i < control_vals.size(); ++i)
    control.push_back(arm_with(specs, {control_vals[i]},
                               "c" + std::to_string(i),
                               ArmSummary::Role::Control));
  REQUIRE(treatment.size() == 16);
  REQUIRE(control.size() == 8);
  const auto result = match_studies(treatment, control, specs, 0.035);
  CHECK(result.candidate_count == 11);
}

TEST_CASE("greedy pairing equals the sequential-minimum oracle") {
  const auto specs = default_covariate_panel();
  Rng rng(123);
  for (int seed = 0; seed < 20; ++seed) {
    std::vector<ArmSummary> treatment, control;
    for (int i = 0; i < 3; ++i) {
      treatment.push_back(synthetic::random_arm(
          rng, specs, "t" + std::to_string(i), ArmSummary::Role::Treatment));
      control.push_back(synthetic::random_arm(rng, specs,
                                              "c" + std::to_string(i),
                                              ArmSummary::Role::Control));
    }
    const double threshold = 0.3;
    const auto greedy = match_studies(treatment, control, specs, threshold);
    const auto oracle =
        synthetic::brute_force_match(treatment, control, specs, threshold);
    REQUIRE(greedy.pairs.size() == oracle.pairs.size());
    CHECK(greedy.candidate_count == oracle.candidate_count);
    for (std::size_t i = 0; i < greedy.pairs.size(); ++i) {
      CHECK(greedy.pairs[i].treatment_arm == oracle.pairs[i].treatment_arm);
      CHECK(greedy.pairs[i].control_arm == oracle.pairs[i].control_arm);
      CHECK(greedy.pairs[i].distance == oracle.pairs[i].distance);
    }
  }
}

TEST_CASE("arms are never paired twice and pairs respect the threshold") {
  const auto specs = default_covariate_panel();
  Rng rng(99);
  std::vector<ArmSummary> treatment, control;
  for (int i = 0; i < 8; ++i) {
    treatment.push_back(synthetic::random_arm(rng, specs,
                                              "t" + std::to_string(i),
                                              ArmSummary::Role::Treatment));
    control.push_back(synthetic::random_arm(
        rng, specs, "c" + std::to_string(i), ArmSummary::Role::Control));
  }
  const auto result = match_studies(treatment, control, specs, 0.25);
  std::set<std::string> seen;
  for (const auto& p : result.pairs) {
    CHECK(p.distance <= result.threshold);
    CHECK(seen.insert(p.treatment_arm).second);
    CHECK(seen.insert(p.control_arm).second);
  }
}

TEST_CASE("empty pairing is a valid result") {
  std::vector<CovariateSpec> specs = {CovariateSpec::proportion("p", 1.0)};
  const std::vector<ArmSummary> treatment = {arm_with(specs, {0.0}, "t")};
  const std::vector<ArmSummary> control = {
      arm_with(specs, {1.0}, "c", ArmSummary::Role::Control)};
  const auto result = match_studies(treatment, control, specs, 0.1);
  CHECK(result.pairs.empty());
  CHECK(result.candidate_count == 0);
}

TEST_CASE("invalid threshold is rejected") {
  std::vector<CovariateSpec> specs = {CovariateSpec::proportion("p", 1.0)};
  CHECK_THROWS_AS(match_studies({}, {}, specs, 1.5), ValidationError);
}

TEST_CASE("match report carries the matrix and flags") {
  std::vector<CovariateSpec> specs = {CovariateSpec::proportion("p", 1.0)};
  const std::vector<ArmSummary> treatment = {arm_with(specs, {0.10}, "t1")};
  const std::vector<ArmSummary> control = {
      arm_with(specs, {0.12}, "c1", ArmSummary::Role::Control),
      arm_with(specs, {0.50}, "c2", ArmSummary::Role::Control)};
  const auto result = match_studies(treatment, control, specs, 0.05);
  const auto report = match_report_text(treatment, control, specs, result);
  CHECK(report.find("tie_break=lexicographic") != std::string::npos);
  CHECK(report.find("t1,c1") != std::string::npos);
  CHECK(report.find("t1,c2") != std::string::npos);
  // one candidate+final row, one non-candidate row
  CHECK(report.find(",1,1\n") != std::string::npos);
  CHECK(report.find(",0,0\n") != std::string::npos);
}

TEST_CASE("default panel mirrors the published covariate setup") {
  const auto specs = default_covariate_panel();
  REQUIRE(specs.size() == 5);
  CHECK(specs[0].name == "treatment_line");
  CHECK(specs[0].weight == 2.0);
  CHECK(specs[1].lo == 18.0);
  CHECK(specs[1].hi == 100.0);
  CHECK(specs[4].name == "sex");
  CHECK(specs[4].weight == 1.0);
}

TEST_CASE("arm csv requires every active covariate") {
  const auto specs = default_covariate_panel();
  const std::string text =
      "arm_id,study_id,role,treatment_line,age,performance_score,"
      "tumour_location,sex\n"
      "a1,s1,treatment,1,62,1,0.6,0.45\n";
  const auto arms = parse_arm_csv(text, specs, "test");
  REQUIRE(arms.size() == 1);
  CHECK(arms[0].value_of("age") == 62.0);

  const std::string missing =
      "arm_id,study_id,role,treatment_line,age,performance_score,"
      "tumour_location\n"
      "a1,s1,treatment,1,62,1,0.6\n";
  CHECK_THROWS_WITH_AS(parse_arm_csv(missing, specs, "test"),
                       doctest::Contains("sex"), ValidationError);
}

TEST_CASE("covariate json round trip") {
  const std::string text = R"([
    {"name": "age", "weight": 2, "kind": "bounded", "lo": 18, "hi": 100},
    {"name": "sex", "weight": 1, "kind": "proportion"}
  ])";
  const auto specs = parse_covariate_json(text, "test");
  REQUIRE(specs.size() == 2);
  CHECK(specs[0].kind == CovariateSpec::Kind::BoundedNumeric);
  CHECK(specs[1].kind == CovariateSpec::Kind::Proportion);
  CHECK_THROWS_AS(parse_covariate_json("{}", "test"), ValidationError);
}

}  // TEST_SUITE
