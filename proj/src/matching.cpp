#include "surrex/matching.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include <json.hpp>

#include "surrex/common.hpp"
#include "surrex/csv.hpp"

namespace surrex {

CovariateSpec CovariateSpec::bounded(std::string name, double weight,
                                     double lo, double hi) {
  return {std::move(name), weight, Kind::BoundedNumeric, lo, hi};
}

CovariateSpec CovariateSpec::proportion(std::string name, double weight) {
  return {std::move(name), weight, Kind::Proportion, 0.0, 1.0};
}

std::vector<CovariateSpec> default_covariate_panel() {
  return {
      CovariateSpec::bounded("treatment_line", 2.0, 1.0, 3.0),
      CovariateSpec::bounded("age", 2.0, 18.0, 100.0),
      CovariateSpec::bounded("performance_score", 2.0, 0.0, 3.0),
      CovariateSpec::proportion("tumour_location", 2.0),
      CovariateSpec::proportion("sex", 1.0),
  };
}

void validate_covariates(std::span<const CovariateSpec> specs) {
  if (specs.empty()) throw ValidationError("no covariates defined");
  bool any_positive = false;
  for (const auto& s : specs) {
    if (s.weight < 0.0)
      throw ValidationError("covariate '" + s.name + "': negative weight");
    if (s.weight > 0.0) any_positive = true;
    if (s.kind == CovariateSpec::Kind::BoundedNumeric && !(s.hi > s.lo))
      throw ValidationError("covariate '" + s.name +
                            "': range upper bound must exceed lower bound");
  }
  if (!any_positive)
    throw ValidationError("at least one covariate must have positive weight");
}

double ArmSummary::value_of(const std::string& covariate) const {
  const auto it = values.find(covariate);
  if (it == values.end())
    throw ValidationError("arm '" + arm_id + "': missing covariate '" +
                          covariate + "'");
  return it->second;
}

static void check_in_range(const CovariateSpec& spec, double v,
                           const char* side) {
  const double lo = spec.kind == CovariateSpec::Kind::Proportion ? 0.0 : spec.lo;
  const double hi = spec.kind == CovariateSpec::Kind::Proportion ? 1.0 : spec.hi;
  if (!(v >= lo && v <= hi))
    throw ValidationError("covariate '" + spec.name + "': " + side + " value " +
                          format_double(v) + " outside [" + format_double(lo) +
                          "," + format_double(hi) + "]");
}

double normalized_difference(const CovariateSpec& spec, double a, double b) {
  check_in_range(spec, a, "first");
  check_in_range(spec, b, "second");
  if (spec.kind == CovariateSpec::Kind::Proportion) return std::fabs(a - b);
  return std::fabs(a - b) / (spec.hi - spec.lo);
}

double distance_total(std::span<const CovariateSpec> specs,
                      const ArmSummary& j, const ArmSummary& k) {
  double num = 0.0, den = 0.0;
  for (const auto& spec : specs) {
    const double delta =
        normalized_difference(spec, j.value_of(spec.name), k.value_of(spec.name));
    num += spec.weight * delta;
    den += spec.weight;
  }
  if (den <= 0.0)
    throw ValidationError("distance undefined: all covariate weights are zero");
  return num / den;
}

double derive_threshold(
    std::span<const std::pair<ArmSummary, ArmSummary>> rct_arm_pairs,
    std::span<const CovariateSpec> specs) {
  if (rct_arm_pairs.empty())
    throw ValidationError("cannot derive threshold: no RCT arm pairs");
  double max_dist = 0.0;
  for (const auto& [a, b] : rct_arm_pairs)
    max_dist = std::max(max_dist, distance_total(specs, a, b));
  return max_dist;
}

namespace {

struct Candidate {
  double distance;
  std::string treatment;
  std::string control;
};

bool candidate_less(const Candidate& a, const Candidate& b) {
  if (a.distance != b.distance) return a.distance < b.distance;
  if (a.treatment != b.treatment) return a.treatment < b.treatment;
  return a.control < b.control;
}

}  // namespace

MatchResult match_studies(std::span<const ArmSummary> treatment_arms,
                          std::span<const ArmSummary> control_arms,
                          std::span<const CovariateSpec> specs,
                          double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0))
    throw ValidationError("threshold must lie in [0,1]");
  validate_covariates(specs);

  std::vector<Candidate> candidates;
  for (const auto& t : treatment_arms)
    for (const auto& c : control_arms) {
      const double d = distance_total(specs, t, c);
      if (d <= threshold) candidates.push_back({d, t.arm_id, c.arm_id});
    }
  std::sort(candidates.begin(), candidates.end(), candidate_less);

  MatchResult result;
  result.threshold = threshold;
  result.candidate_count = static_cast<int>(candidates.size());
  std::set<std::string> used;
  for (const auto& c : candidates) {
    if (used.count(c.treatment) || used.count(c.control)) continue;
    used.insert(c.treatment);
    used.insert(c.control);
    result.pairs.push_back({c.treatment, c.control, c.distance});
  }
  return result;
}

// --------------------------- I/O ---------------------------------------------

std::vector<ArmSummary> parse_arm_csv(const std::string& text,
                                      std::span<const CovariateSpec> specs,
                                      const std::string& context) {
  validate_covariates(specs);
  const auto table = csv::parse(text);
  const int c_arm = table.require_column("arm_id", context);
  const int c_study = table.require_column("study_id", context);
  const int c_role = table.require_column("role", context);
  std::vector<int> cols;
  for (const auto& s : specs)
    cols.push_back(table.require_column(s.name, context));

  std::vector<ArmSummary> arms;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    const std::string where = context + " row " + std::to_string(i + 2);
    ArmSummary arm;
    arm.arm_id = row[c_arm];
    arm.study_id = row[c_study];
    if (row[c_role] == "treatment") arm.role = ArmSummary::Role::Treatment;
    else if (row[c_role] == "control") arm.role = ArmSummary::Role::Control;
    else
      throw ValidationError(where + ": role must be 'treatment' or 'control'");
    for (std::size_t s = 0; s < specs.size(); ++s)
      arm.values[specs[s].name] =
          csv::parse_double(row[cols[s]], where + " " + specs[s].name);
    arms.push_back(std::move(arm));
  }
  return arms;
}

std::vector<ArmSummary> read_arm_csv(const std::string& path,
                                     std::span<const CovariateSpec> specs) {
  return parse_arm_csv(csv::read_text_file(path), specs, path);
}

std::vector<CovariateSpec> parse_covariate_json(const std::string& text,
                                                const std::string& context) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(context + ": invalid JSON: " + e.what());
  }
  if (!j.is_array())
    throw ValidationError(context + ": expected a JSON array of covariates");
  std::vector<CovariateSpec> specs;
  for (const auto& item : j) {
    CovariateSpec s;
    s.name = item.at("name").get<std::string>();
    s.weight = item.at("weight").get<double>();
    const std::string kind = item.at("kind").get<std::string>();
    if (kind == "bounded") {
      s.kind = CovariateSpec::Kind::BoundedNumeric;
      s.lo = item.at("lo").get<double>();
      s.hi = item.at("hi").get<double>();
    } else if (kind == "proportion") {
      s.kind = CovariateSpec::Kind::Proportion;
    } else {
      throw ValidationError(context + ": covariate '" + s.name +
                            "': kind must be 'bounded' or 'proportion'");
    }
    specs.push_back(std::move(s));
  }
  validate_covariates(specs);
  return specs;
}

std::vector<CovariateSpec> read_covariate_json(const std::string& path) {
  return parse_covariate_json(csv::read_text_file(path), path);
}

std::string match_report_text(std::span<const ArmSummary> treatment_arms,
                              std::span<const ArmSummary> control_arms,
                              std::span<const CovariateSpec> specs,
                              const MatchResult& result) {
  std::set<std::pair<std::string, std::string>> final_pairs;
  for (const auto& p : result.pairs)
    final_pairs.insert({p.treatment_arm, p.control_arm});

  std::string out = "# threshold=" + format_double(result.threshold) +
                    " tie_break=lexicographic(treatment_id,control_id)\n";
  out += "treatment_arm,control_arm,distance,candidate,final\n";
  for (const auto& t : treatment_arms)
    for (const auto& c : control_arms) {
      const double d = distance_total(specs, t, c);
      const bool candidate = d <= result.threshold;
      const bool fin = final_pairs.count({t.arm_id, c.arm_id}) > 0;
      out += csv::join_row({t.arm_id, c.arm_id, format_double(d),
                            candidate ? "1" : "0", fin ? "1" : "0"});
    }
  return out;
}

void write_match_report(const std::string& path,
                        std::span<const ArmSummary> treatment_arms,
                        std::span<const ArmSummary> control_arms,
                        std::span<const CovariateSpec> specs,
                        const MatchResult& result) {
  csv::write_file(path, match_report_text(treatment_arms, control_arms, specs,
                                          result));
}

std::vector<std::pair<ArmSummary, ArmSummary>> group_arm_pairs(
    std::span<const ArmSummary> arms) {
  std::map<std::string, std::vector<const ArmSummary*>> by_study;
  for (const auto& a : arms) by_study[a.study_id].push_back(&a);
  std::vector<std::pair<ArmSummary, ArmSummary>> pairs;
  for (const auto& [study, group] : by_study) {
    const ArmSummary* treat = nullptr;
    const ArmSummary* control = nullptr;
    for (const auto* a : group) {
      if (a->role == ArmSummary::Role::Treatment && !treat) treat = a;
      else if (a->role == ArmSummary::Role::Control && !control) control = a;
    }
    if (!treat || !control)
      throw ValidationError("study '" + study +
                            "': need one treatment and one control arm");
    pairs.emplace_back(*treat, *control);
  }
  return pairs;
}

}  // namespace surrex
