#pragma once

#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace surrex {

// One covariate used for aggregate-level study matching. Bounded-numeric
// covariates are normalised by their declared range; proportions are already
// on [0,1].
struct CovariateSpec {
  enum class Kind { BoundedNumeric, Proportion };

  std::string name;
  double weight = 0.0;
  Kind kind = Kind::Proportion;
  double lo = 0.0;  // bounded-numeric only
  double hi = 1.0;

  static CovariateSpec bounded(std::string name, double weight, double lo,
                               double hi);
  static CovariateSpec proportion(std::string name, double weight);
};

// Treatment line, age, performance score, tumour location, sex; sex carries
// weight 1 and the rest weight 2.
std::vector<CovariateSpec> default_covariate_panel();

void validate_covariates(std::span<const CovariateSpec> specs);

struct ArmSummary {
  enum class Role { Treatment, Control };

  std::string arm_id;
  std::string study_id;
  Role role = Role::Treatment;
  std::map<std::string, double> values;  // covariate name -> value

  double value_of(const std::string& covariate) const;
};

// |a-b| scaled to [0,1] by the covariate's range.
double normalized_difference(const CovariateSpec& spec, double a, double b);

// Weighted mean of per-covariate normalised differences; symmetric, in [0,1].
double distance_total(std::span<const CovariateSpec> specs,
                      const ArmSummary& j, const ArmSummary& k);

// Maximum inter-arm distance over RCT arm pairs; callers may override the
// result with an explicit threshold (e.g. rounding 0.032 up to 0.035).
double derive_threshold(
    std::span<const std::pair<ArmSummary, ArmSummary>> rct_arm_pairs,
    std::span<const CovariateSpec> specs);

struct MatchPair {
  std::string treatment_arm;
  std::string control_arm;
  double distance = 0.0;
};

struct MatchResult {
  std::vector<MatchPair> pairs;
  double threshold = 0.0;
  int candidate_count = 0;  // matrix entries at or below the threshold
};

// Greedy assignment by globally ascending distance among entries <= threshold,
// each arm used at most once. Ties break lexicographically on
// (treatment_id, control_id).
MatchResult match_studies(std::span<const ArmSummary> treatment_arms,
                          std::span<const ArmSummary> control_arms,
                          std::span<const CovariateSpec> specs,
                          double threshold);

// Arm CSV: arm_id,study_id,role,<one column per covariate>.
std::vector<ArmSummary> read_arm_csv(const std::string& path,
                                     std::span<const CovariateSpec> specs);
std::vector<ArmSummary> parse_arm_csv(const std::string& text,
                                      std::span<const CovariateSpec> specs,
                                      const std::string& context);

// Covariate spec JSON: [{name, weight, kind, lo, hi}, ...]
std::vector<CovariateSpec> read_covariate_json(const std::string& path);
std::vector<CovariateSpec> parse_covariate_json(const std::string& text,
                                                const std::string& context);

// Full distance matrix in long form with candidate/final flags.
std::string match_report_text(std::span<const ArmSummary> treatment_arms,
                              std::span<const ArmSummary> control_arms,
                              std::span<const CovariateSpec> specs,
                              const MatchResult& result);
void write_match_report(const std::string& path,
                        std::span<const ArmSummary> treatment_arms,
                        std::span<const ArmSummary> control_arms,
                        std::span<const CovariateSpec> specs,
                        const MatchResult& result);

// Groups arms of two-arm studies into (treatment, control) pairs by study_id;
// used to derive the threshold from RCT arms.
std::vector<std::pair<ArmSummary, ArmSummary>> group_arm_pairs(
    std::span<const ArmSummary> arms);

}  // namespace surrex
