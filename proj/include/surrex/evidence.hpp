#pragma once

#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace surrex {

// Study categories. Matched single-arm records carry the ids of the two
// source single-arm studies they were built from.
enum class StudyClass { Rct, Crwe, MatchedSrwe };

std::string to_string(StudyClass cls);
StudyClass study_class_from_string(const std::string& s);  // RCT|cRWE|sRWE

// Log hazard-ratio pair on the surrogate (y1, PFS) and final (y2, OS)
// outcomes with their standard errors. rho_w is the within-study correlation;
// when absent it is estimated with a Unif(0,1) prior, when present it is
// treated as fixed.
struct EffectPair {
  double y1 = 0.0;
  double se1 = 0.0;
  double y2 = 0.0;
  double se2 = 0.0;
  std::optional<double> rho_w;
};

// Every violated invariant, not just the first.
std::vector<std::string> validate_effect_pair(const EffectPair& e);

struct Evidence {
  StudyClass cls = StudyClass::Rct;
  // matched sRWE only: ids of the treatment-arm and control-arm source studies
  std::string source_treatment;
  std::string source_control;
};

struct StudyRecord {
  std::string study_id;
  std::string label;
  Evidence evidence;
  EffectPair effects;
  std::string source;  // provenance: "reported" or "reconstructed"
};

std::vector<std::string> validate_record(const StudyRecord& r);

using ClassFilter = std::set<StudyClass>;

ClassFilter all_classes();

// Immutable after construction; safe to share read-only across chains.
struct EvidenceBase {
  std::vector<StudyRecord> studies;
  ClassFilter inclusion_filter;

  std::size_t size() const { return studies.size(); }
};

// Keeps only records whose class is in `filter`, preserving input order.
// Throws ValidationError on duplicate ids (naming the id) or when nothing
// survives the filter.
EvidenceBase build_evidence_base(std::span<const StudyRecord> records,
                                 const ClassFilter& filter);

// Study CSV: study_id,label,class,y1,se1,y2,se2,rho_w with optional columns
// source, src_treatment, src_control. For sRWE rows without the src_* columns
// the source pair is recovered from a "<treat>_vs_<control>" study_id.
std::vector<StudyRecord> read_study_csv(const std::string& path);
std::vector<StudyRecord> parse_study_csv(const std::string& text,
                                         const std::string& context);
std::string study_csv_text(std::span<const StudyRecord> records);
void write_study_csv(const std::string& path,
                     std::span<const StudyRecord> records);

}  // namespace surrex
