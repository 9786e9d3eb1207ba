#include "surrex/evidence.hpp"

#include <cmath>
#include <unordered_set>

#include "surrex/common.hpp"
#include "surrex/csv.hpp"

namespace surrex {

std::string to_string(StudyClass cls) {
  switch (cls) {
    case StudyClass::Rct: return "RCT";
    case StudyClass::Crwe: return "cRWE";
    case StudyClass::MatchedSrwe: return "sRWE";
  }
  return "?";
}

StudyClass study_class_from_string(const std::string& s) {
  if (s == "RCT") return StudyClass::Rct;
  if (s == "cRWE") return StudyClass::Crwe;
  if (s == "sRWE") return StudyClass::MatchedSrwe;
  throw ValidationError("unknown study class '" + s +
                        "' (expected RCT, cRWE or sRWE)");
}

std::vector<std::string> validate_effect_pair(const EffectPair& e) {
  std::vector<std::string> violations;
  if (!std::isfinite(e.y1)) violations.push_back("y1 must be finite");
  if (!std::isfinite(e.y2)) violations.push_back("y2 must be finite");
  if (!(e.se1 > 0.0)) violations.push_back("se1 must be positive");
  if (!(e.se2 > 0.0)) violations.push_back("se2 must be positive");
  if (e.rho_w && !(*e.rho_w >= 0.0 && *e.rho_w <= 1.0))
    violations.push_back("rho_w outside [0,1]");
  return violations;
}

std::vector<std::string> validate_record(const StudyRecord& r) {
  std::vector<std::string> violations = validate_effect_pair(r.effects);
  if (r.study_id.empty()) violations.push_back("study_id must be non-empty");
  if (r.evidence.cls == StudyClass::MatchedSrwe &&
      (r.evidence.source_treatment.empty() ||
       r.evidence.source_control.empty()))
    violations.push_back(
        "matched sRWE record must carry the two source study ids");
  for (auto& v : violations) v = r.study_id + ": " + v;
  return violations;
}

ClassFilter all_classes() {
  return {StudyClass::Rct, StudyClass::Crwe, StudyClass::MatchedSrwe};
}

EvidenceBase build_evidence_base(std::span<const StudyRecord> records,
                                 const ClassFilter& filter) {
  if (records.empty()) throw ValidationError("no study records supplied");
  std::unordered_set<std::string> seen;
  for (const auto& r : records) {
    if (!seen.insert(r.study_id).second)
      throw ValidationError("duplicate study id '" + r.study_id + "'");
  }
  EvidenceBase base;
  base.inclusion_filter = filter;
  for (const auto& r : records)
    if (filter.count(r.evidence.cls)) base.studies.push_back(r);
  if (base.studies.empty())
    throw ValidationError("no studies after filtering");
  return base;
}

// --------------------------- CSV --------------------------------------------

std::vector<StudyRecord> parse_study_csv(const std::string& text,
                                         const std::string& context) {
  const auto table = csv::parse(text);
  const int c_id = table.require_column("study_id", context);
  const int c_label = table.require_column("label", context);
  const int c_class = table.require_column("class", context);
  const int c_y1 = table.require_column("y1", context);
  const int c_se1 = table.require_column("se1", context);
  const int c_y2 = table.require_column("y2", context);
  const int c_se2 = table.require_column("se2", context);
  const int c_rho = table.require_column("rho_w", context);
  const int c_source = table.column("source");
  const int c_srct = table.column("src_treatment");
  const int c_srcc = table.column("src_control");

  std::vector<StudyRecord> out;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    const std::string where = context + " row " + std::to_string(i + 2);
    if (row.size() < table.header.size())
      throw ValidationError(where + ": expected " +
                            std::to_string(table.header.size()) + " fields");
    StudyRecord r;
    r.study_id = row[c_id];
    r.label = row[c_label];
    r.evidence.cls = study_class_from_string(row[c_class]);
    r.effects.y1 = csv::parse_double(row[c_y1], where + " y1");
    r.effects.se1 = csv::parse_double(row[c_se1], where + " se1");
    r.effects.y2 = csv::parse_double(row[c_y2], where + " y2");
    r.effects.se2 = csv::parse_double(row[c_se2], where + " se2");
    r.effects.rho_w = csv::parse_optional_double(row[c_rho], where + " rho_w");
    if (c_source >= 0) r.source = row[c_source];
    if (r.source.empty()) r.source = "reported";
    if (c_srct >= 0) r.evidence.source_treatment = row[c_srct];
    if (c_srcc >= 0) r.evidence.source_control = row[c_srcc];

    if (r.evidence.cls == StudyClass::MatchedSrwe &&
        r.evidence.source_treatment.empty()) {
      // fall back to the "<treat>_vs_<control>" id convention
      const auto pos = r.study_id.find("_vs_");
      if (pos != std::string::npos) {
        r.evidence.source_treatment = r.study_id.substr(0, pos);
        r.evidence.source_control = r.study_id.substr(pos + 4);
      } else {
        throw ValidationError(
            where + ": sRWE row needs src_treatment/src_control columns or a "
                    "'<treat>_vs_<control>' study_id");
      }
    }
    const auto violations = validate_record(r);
    if (!violations.empty()) {
      std::string msg = where + ": invalid record:";
      for (const auto& v : violations) msg += " " + v + ";";
      throw ValidationError(msg);
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<StudyRecord> read_study_csv(const std::string& path) {
  return parse_study_csv(csv::read_text_file(path), path);
}

std::string study_csv_text(std::span<const StudyRecord> records) {
  std::string out =
      "study_id,label,class,y1,se1,y2,se2,rho_w,source,src_treatment,"
      "src_control\n";
  for (const auto& r : records) {
    out += csv::join_row(
        {r.study_id, r.label, to_string(r.evidence.cls),
         format_double(r.effects.y1), format_double(r.effects.se1),
         format_double(r.effects.y2), format_double(r.effects.se2),
         r.effects.rho_w ? format_double(*r.effects.rho_w) : "",
         r.source, r.evidence.source_treatment, r.evidence.source_control});
  }
  return out;
}

void write_study_csv(const std::string& path,
                     std::span<const StudyRecord> records) {
  csv::write_file(path, study_csv_text(records));
}

}  // namespace surrex
